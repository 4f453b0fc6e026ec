#include "legonet/blocking.hpp"

#include <algorithm>

#include "legonet/error.hpp"

namespace legonet {

MatrixView flatten_to_matrix(const Tensor& t) {
  if (t.role() != TensorRole::kWeight) {
    throw Error(ErrorCode::kInvalidArgument,
                "only weight tensors are flattened, '" + t.name() + "' is not one");
  }
  const auto& s = t.shape();
  switch (s.size()) {
    case 1:
      return {1, s[0], t.data()};
    case 2:
      return {s[0], s[1], t.data()};
    case 4:
      return {s[0], static_cast<std::size_t>(s[1]) * s[2] * s[3], t.data()};
    default:
      throw Error(ErrorCode::kUnsupportedRank,
                  "tensor '" + t.name() + "' has rank " + std::to_string(s.size()));
  }
}

BlockSet::BlockSet(std::uint32_t b, std::vector<float> values,
                   std::vector<BlockOrigin> origins, std::vector<LayerGrid> grids,
                   std::vector<std::uint32_t> skipped_layers)
    : b_(b),
      dim_(static_cast<std::size_t>(b) * b),
      values_(std::move(values)),
      origins_(std::move(origins)),
      grids_(std::move(grids)),
      skipped_(std::move(skipped_layers)) {
  if (b_ == 0) throw Error(ErrorCode::kInvalidArgument, "block side b must be >= 1");
  if (values_.size() != origins_.size() * dim_) {
    throw Error(ErrorCode::kCountMismatch, "block values do not match origin count");
  }
}

BlockSet BlockSet::from_points(std::vector<float> values, std::size_t dim) {
  if (dim == 0 || values.size() % dim != 0) {
    throw Error(ErrorCode::kDimensionMismatch, "point buffer is not a multiple of dim");
  }
  const std::size_t n = values.size() / dim;
  BlockSet set;
  set.b_ = 0;
  set.dim_ = dim;
  set.values_ = std::move(values);
  set.origins_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    set.origins_[i] = {0, static_cast<std::uint32_t>(i), 0};
  }
  set.grids_.push_back({0, static_cast<std::uint32_t>(n), 1, 0});
  return set;
}

BlockSet breakup(const ModelBundle& model, std::uint32_t b) {
  if (b == 0) throw Error(ErrorCode::kInvalidArgument, "block side b must be >= 1");
  std::vector<float> values;
  std::vector<BlockOrigin> origins;
  std::vector<LayerGrid> grids;
  std::vector<std::uint32_t> skipped;

  const auto& layers = model.layers();
  for (std::uint32_t li = 0; li < layers.size(); ++li) {
    const Tensor& t = layers[li];
    if (t.role() != TensorRole::kWeight) continue;
    if (t.rank() == 3 || t.rank() > 4) {
      skipped.push_back(li);
      continue;
    }
    const MatrixView m = flatten_to_matrix(t);
    if (m.rows % b != 0 || m.cols % b != 0) {
      skipped.push_back(li);
      continue;
    }
    const auto grid_rows = static_cast<std::uint32_t>(m.rows / b);
    const auto grid_cols = static_cast<std::uint32_t>(m.cols / b);
    grids.push_back({li, grid_rows, grid_cols, origins.size()});

    values.reserve(values.size() + m.rows * m.cols);
    for (std::uint32_t br = 0; br < grid_rows; ++br) {
      for (std::uint32_t bc = 0; bc < grid_cols; ++bc) {
        origins.push_back({li, br, bc});
        for (std::uint32_t r = 0; r < b; ++r) {
          const float* row = m.values.data() + (br * b + r) * m.cols + bc * b;
          values.insert(values.end(), row, row + b);
        }
      }
    }
  }
  return BlockSet(b, std::move(values), std::move(origins), std::move(grids),
                  std::move(skipped));
}

std::size_t skipped_params(const BlockSet& blocks, const ModelBundle& model) {
  std::size_t total = 0;
  for (auto li : blocks.skipped_layers()) total += model.layers().at(li).size();
  return total;
}

ModelBundle reassemble(const BlockSet& blocks, std::span<const float> block_values,
                       const ModelBundle& model_template) {
  if (block_values.size() != blocks.size() * blocks.dim()) {
    throw Error(ErrorCode::kCountMismatch,
                "got " + std::to_string(block_values.size()) + " values for " +
                    std::to_string(blocks.size()) + " blocks of " +
                    std::to_string(blocks.dim()));
  }
  const std::uint32_t b = blocks.b();
  std::vector<Tensor> layers = model_template.layers();
  for (const auto& grid : blocks.layer_grids()) {
    if (grid.layer_index >= layers.size()) {
      throw Error(ErrorCode::kCountMismatch, "block grid references a missing layer");
    }
    Tensor& t = layers[grid.layer_index];
    const MatrixView m = flatten_to_matrix(t);
    if (m.rows != static_cast<std::size_t>(grid.rows_in_blocks) * b ||
        m.cols != static_cast<std::size_t>(grid.cols_in_blocks) * b) {
      throw Error(ErrorCode::kShapeMismatch,
                  "template layer '" + t.name() + "' does not match its block grid");
    }
    auto out = t.mutable_data();
    const std::size_t cols = m.cols;
    for (std::uint32_t br = 0; br < grid.rows_in_blocks; ++br) {
      for (std::uint32_t bc = 0; bc < grid.cols_in_blocks; ++bc) {
        const std::size_t block = grid.first_block + br * grid.cols_in_blocks + bc;
        const float* src = block_values.data() + block * blocks.dim();
        for (std::uint32_t r = 0; r < b; ++r) {
          std::copy_n(src + r * b, b, out.data() + (br * b + r) * cols + bc * b);
        }
      }
    }
  }
  return ModelBundle(std::move(layers), model_template.manifest());
}

}  // namespace legonet
