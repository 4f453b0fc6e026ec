#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace legonet {

enum class TensorRole : std::uint8_t {
  kWeight = 0,
  kBias = 1,
  kBatchnormParam = 2,
  kOther = 3,
};

// Only f32 is defined in format version 1.
enum class DType : std::uint8_t {
  kF32 = 0,
};

inline constexpr int kWordLengthBits = 32;

using Shape = std::vector<std::uint32_t>;

std::size_t shape_elements(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Named, row-major f32 tensor. The constructor enforces that the shape is
// non-empty, every dim is >= 1 and the element count matches the data.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::string name, Shape shape, std::vector<float> data,
         TensorRole role = TensorRole::kWeight);

  static Tensor zeros(std::string name, Shape shape,
                      TensorRole role = TensorRole::kWeight);

  const std::string& name() const { return name_; }
  const Shape& shape() const { return shape_; }
  TensorRole role() const { return role_; }
  DType dtype() const { return DType::kF32; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  bool operator==(const Tensor& other) const = default;

 private:
  std::string name_;
  Shape shape_;
  std::vector<float> data_;
  TensorRole role_ = TensorRole::kOther;
};

enum class LayerKind : std::uint8_t {
  kDense = 0x10,
  kConv2d = 0x11,
  kRelu = 0x12,
  kMaxPool2d = 0x13,
  kFlatten = 0x14,
};

// One step of the forward graph. Which fields are meaningful depends on kind:
//   dense     in_features, out_features, weight [out, in], optional bias [out]
//   conv2d    in/out channels, kernel, stride, padding, weight [out, in, kh, kw]
//   maxpool2d kernel_h (square window), stride
//   relu, flatten carry nothing.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::uint32_t in_features = 0;
  std::uint32_t out_features = 0;
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  std::uint32_t kernel_h = 0;
  std::uint32_t kernel_w = 0;
  std::uint32_t stride = 1;
  std::uint32_t padding = 0;
  std::string weight;
  std::string bias;

  bool operator==(const LayerSpec& other) const = default;

  static LayerSpec dense(std::uint32_t in, std::uint32_t out, std::string weight,
                         std::string bias = {});
  static LayerSpec conv2d(std::uint32_t in_channels, std::uint32_t out_channels,
                          std::uint32_t kernel, std::uint32_t stride,
                          std::uint32_t padding, std::string weight,
                          std::string bias = {});
  static LayerSpec relu();
  static LayerSpec maxpool2d(std::uint32_t kernel, std::uint32_t stride);
  static LayerSpec flatten();
};

// Per-sample input shape plus the ordered layer list. An empty manifest is
// valid for weight-only bundles that are never run.
struct ArchManifest {
  Shape input_shape;
  std::vector<LayerSpec> layers;

  bool empty() const { return input_shape.empty() && layers.empty(); }
  bool operator==(const ArchManifest& other) const = default;
};

class ModelBundle {
 public:
  ModelBundle() = default;
  ModelBundle(std::vector<Tensor> layers, ArchManifest manifest = {});

  const std::vector<Tensor>& layers() const { return layers_; }
  const ArchManifest& manifest() const { return manifest_; }

  const Tensor* find(const std::string& name) const;
  std::optional<std::size_t> index_of(const std::string& name) const;

  bool operator==(const ModelBundle& other) const = default;

 private:
  std::vector<Tensor> layers_;
  ArchManifest manifest_;
};

// Sum of element counts over weight-role tensors. Biases and batchnorm
// parameters are stored but never counted.
std::size_t model_param_count(const ModelBundle& model);

class DatasetBundle {
 public:
  DatasetBundle() = default;
  // inputs has shape [N, ...]; labels has N entries, each < num_classes.
  DatasetBundle(Tensor inputs, std::vector<std::uint32_t> labels,
                std::uint32_t num_classes);

  const Tensor& inputs() const { return inputs_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  std::uint32_t num_classes() const { return num_classes_; }
  std::size_t count() const { return labels_.size(); }
  Shape sample_shape() const;
  std::span<const float> sample(std::size_t i) const;

  bool operator==(const DatasetBundle& other) const = default;

 private:
  Tensor inputs_;
  std::vector<std::uint32_t> labels_;
  std::uint32_t num_classes_ = 0;
};

}  // namespace legonet
