#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "legonet/tensor.hpp"

namespace legonet {

// Row-major 2D view over a weight tensor's storage.
struct MatrixView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const float> values;

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// [n] -> [1, n], [r, c] -> itself, [out, in, kh, kw] -> [out, in*kh*kw].
// Element order is unchanged in every case. Rank 3 and rank > 4 raise
// UnsupportedRank.
MatrixView flatten_to_matrix(const Tensor& t);

struct BlockOrigin {
  std::uint32_t layer_index = 0;
  std::uint32_t block_row = 0;
  std::uint32_t block_col = 0;

  bool operator==(const BlockOrigin&) const = default;
};

struct LayerGrid {
  std::uint32_t layer_index = 0;
  std::uint32_t rows_in_blocks = 0;
  std::uint32_t cols_in_blocks = 0;
  std::size_t first_block = 0;

  std::size_t block_count() const {
    return static_cast<std::size_t>(rows_in_blocks) * cols_in_blocks;
  }
  bool operator==(const LayerGrid&) const = default;
};

// All b x b tiles of the compressible weight layers, stored contiguously:
// block i occupies values[i*b*b, (i+1)*b*b) in row-major block order. Blocks
// are ordered by layer (model order) and then row-major within the layer.
class BlockSet {
 public:
  BlockSet() = default;
  BlockSet(std::uint32_t b, std::vector<float> values, std::vector<BlockOrigin> origins,
           std::vector<LayerGrid> grids, std::vector<std::uint32_t> skipped_layers);

  // Wraps free-standing vectors (e.g. test points) as a single-layer set of
  // dim-length blocks. dim need not be a perfect square.
  static BlockSet from_points(std::vector<float> values, std::size_t dim);

  std::uint32_t b() const { return b_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return origins_.size(); }
  bool empty() const { return origins_.empty(); }

  std::span<const float> block(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }
  std::span<const float> values() const { return values_; }
  const std::vector<BlockOrigin>& origins() const { return origins_; }
  const std::vector<LayerGrid>& layer_grids() const { return grids_; }
  const std::vector<std::uint32_t>& skipped_layers() const { return skipped_; }

  std::size_t covered_params() const { return values_.size(); }

 private:
  std::uint32_t b_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::vector<BlockOrigin> origins_;
  std::vector<LayerGrid> grids_;
  std::vector<std::uint32_t> skipped_;
};

// Tiles every weight-role layer whose flattened matrix has both dims
// divisible by b. Other weight layers are listed in skipped_layers and left
// raw; non-weight tensors are ignored entirely.
BlockSet breakup(const ModelBundle& model, std::uint32_t b);

// Sum of element counts of skipped weight layers.
std::size_t skipped_params(const BlockSet& blocks, const ModelBundle& model);

// Inverse of breakup: writes block_values (size() * b*b floats, canonical
// order) back into the compressed layers of the template; every other tensor
// is copied verbatim.
ModelBundle reassemble(const BlockSet& blocks, std::span<const float> block_values,
                       const ModelBundle& model_template);

}  // namespace legonet
