#include "legonet/tensor.hpp"

#include <set>
#include <sstream>

#include "legonet/error.hpp"

namespace legonet {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kTrailingData: return "TrailingData";
    case ErrorCode::kBadManifest: return "BadManifest";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnsupportedRank: return "UnsupportedRank";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kTooFewBlocks: return "TooFewBlocks";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kIndexOverflow: return "IndexOverflow";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
  }
  return "Unknown";
}

std::size_t shape_elements(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::string name, Shape shape, std::vector<float> data,
               TensorRole role)
    : name_(std::move(name)),
      shape_(std::move(shape)),
      data_(std::move(data)),
      role_(role) {
  if (shape_.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "tensor '" + name_ + "' has no dims");
  }
  for (auto d : shape_) {
    if (d == 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "tensor '" + name_ + "' has a zero dim " + shape_to_string(shape_));
    }
  }
  if (shape_elements(shape_) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "tensor '" + name_ + "' shape " + shape_to_string(shape_) +
                    " does not match " + std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::zeros(std::string name, Shape shape, TensorRole role) {
  std::vector<float> data(shape_elements(shape), 0.0f);
  return Tensor(std::move(name), std::move(shape), std::move(data), role);
}

LayerSpec LayerSpec::dense(std::uint32_t in, std::uint32_t out, std::string weight,
                           std::string bias) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_features = in;
  s.out_features = out;
  s.weight = std::move(weight);
  s.bias = std::move(bias);
  return s;
}

LayerSpec LayerSpec::conv2d(std::uint32_t in_channels, std::uint32_t out_channels,
                            std::uint32_t kernel, std::uint32_t stride,
                            std::uint32_t padding, std::string weight,
                            std::string bias) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel_h = kernel;
  s.kernel_w = kernel;
  s.stride = stride;
  s.padding = padding;
  s.weight = std::move(weight);
  s.bias = std::move(bias);
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool2d(std::uint32_t kernel, std::uint32_t stride) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool2d;
  s.kernel_h = kernel;
  s.kernel_w = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::kFlatten;
  return s;
}

namespace {

void expect_tensor_shape(const ModelBundle& model, const std::string& name,
                         const Shape& expected, const char* what) {
  const Tensor* t = model.find(name);
  if (t == nullptr) {
    throw Error(ErrorCode::kBadManifest,
                std::string(what) + " tensor '" + name + "' not found");
  }
  if (t->shape() != expected) {
    throw Error(ErrorCode::kBadManifest,
                std::string(what) + " tensor '" + name + "' has shape " +
                    shape_to_string(t->shape()) + ", manifest expects " +
                    shape_to_string(expected));
  }
}

void validate_manifest(const ModelBundle& model) {
  for (const auto& spec : model.manifest().layers) {
    switch (spec.kind) {
      case LayerKind::kDense:
        expect_tensor_shape(model, spec.weight, {spec.out_features, spec.in_features},
                            "dense weight");
        if (!spec.bias.empty()) {
          expect_tensor_shape(model, spec.bias, {spec.out_features}, "dense bias");
        }
        break;
      case LayerKind::kConv2d:
        expect_tensor_shape(
            model, spec.weight,
            {spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w},
            "conv2d weight");
        if (!spec.bias.empty()) {
          expect_tensor_shape(model, spec.bias, {spec.out_channels}, "conv2d bias");
        }
        if (spec.stride == 0) {
          throw Error(ErrorCode::kBadManifest, "conv2d stride must be >= 1");
        }
        break;
      case LayerKind::kMaxPool2d:
        if (spec.kernel_h == 0 || spec.stride == 0) {
          throw Error(ErrorCode::kBadManifest, "maxpool2d kernel and stride must be >= 1");
        }
        [[fallthrough]];
      case LayerKind::kRelu:
      case LayerKind::kFlatten:
        if (!spec.weight.empty() || !spec.bias.empty()) {
          throw Error(ErrorCode::kBadManifest,
                      "pooling/activation layers must not reference tensors");
        }
        break;
    }
  }
}

}  // namespace

ModelBundle::ModelBundle(std::vector<Tensor> layers, ArchManifest manifest)
    : layers_(std::move(layers)), manifest_(std::move(manifest)) {
  std::set<std::string> seen;
  for (const auto& t : layers_) {
    if (!seen.insert(t.name()).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate layer name '" + t.name() + "'");
    }
  }
  validate_manifest(*this);
}

const Tensor* ModelBundle::find(const std::string& name) const {
  for (const auto& t : layers_) {
    if (t.name() == name) return &t;
  }
  return nullptr;
}

std::optional<std::size_t> ModelBundle::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name() == name) return i;
  }
  return std::nullopt;
}

std::size_t model_param_count(const ModelBundle& model) {
  std::size_t total = 0;
  for (const auto& t : model.layers()) {
    if (t.role() == TensorRole::kWeight) total += t.size();
  }
  return total;
}

DatasetBundle::DatasetBundle(Tensor inputs, std::vector<std::uint32_t> labels,
                             std::uint32_t num_classes)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (labels_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "dataset must contain at least one sample");
  }
  if (inputs_.rank() < 2 || inputs_.shape()[0] != labels_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "dataset inputs " + shape_to_string(inputs_.shape()) + " do not match " +
                    std::to_string(labels_.size()) + " labels");
  }
  for (auto label : labels_) {
    if (label >= num_classes_) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(label) + " >= num_classes " +
                      std::to_string(num_classes_));
    }
  }
}

Shape DatasetBundle::sample_shape() const {
  return Shape(inputs_.shape().begin() + 1, inputs_.shape().end());
}

std::span<const float> DatasetBundle::sample(std::size_t i) const {
  const std::size_t stride = inputs_.size() / labels_.size();
  return inputs_.data().subspan(i * stride, stride);
}

}  // namespace legonet
