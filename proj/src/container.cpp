#include "legonet/container.hpp"

#include "legonet/detail/byte_io.hpp"
#include "legonet/detail/records.hpp"
#include "legonet/error.hpp"

namespace legonet {

namespace detail {

namespace {

constexpr std::uint8_t kInputTag = 0x01;

bool known_kind(std::uint8_t tag) {
  return tag >= static_cast<std::uint8_t>(LayerKind::kDense) &&
         tag <= static_cast<std::uint8_t>(LayerKind::kFlatten);
}

void write_spec_value(ByteWriter& w, const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::kDense:
      w.u32(s.in_features);
      w.u32(s.out_features);
      w.str16(s.weight);
      w.str16(s.bias);
      break;
    case LayerKind::kConv2d:
      w.u32(s.in_channels);
      w.u32(s.out_channels);
      w.u32(s.kernel_h);
      w.u32(s.kernel_w);
      w.u32(s.stride);
      w.u32(s.padding);
      w.str16(s.weight);
      w.str16(s.bias);
      break;
    case LayerKind::kMaxPool2d:
      w.u32(s.kernel_h);
      w.u32(s.stride);
      break;
    case LayerKind::kRelu:
    case LayerKind::kFlatten:
      break;
  }
}

LayerSpec read_spec_value(LayerKind kind, ByteReader& r) {
  LayerSpec s;
  s.kind = kind;
  switch (kind) {
    case LayerKind::kDense:
      s.in_features = r.u32();
      s.out_features = r.u32();
      s.weight = r.str16();
      s.bias = r.str16();
      break;
    case LayerKind::kConv2d:
      s.in_channels = r.u32();
      s.out_channels = r.u32();
      s.kernel_h = r.u32();
      s.kernel_w = r.u32();
      s.stride = r.u32();
      s.padding = r.u32();
      s.weight = r.str16();
      s.bias = r.str16();
      break;
    case LayerKind::kMaxPool2d:
      s.kernel_h = r.u32();
      s.kernel_w = s.kernel_h;
      s.stride = r.u32();
      break;
    case LayerKind::kRelu:
    case LayerKind::kFlatten:
      break;
  }
  return s;
}

void write_record(ByteWriter& w, std::uint8_t tag, ByteWriter&& value) {
  auto bytes = value.take();
  w.u8(tag);
  w.u32(static_cast<std::uint32_t>(bytes.size()));
  w.bytes(bytes);
}

}  // namespace

void write_shape(ByteWriter& w, const Shape& shape) {
  if (shape.size() > 255) throw Error(ErrorCode::kUnsupportedRank, "rank > 255");
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) w.u32(d);
}

Shape read_shape(ByteReader& r) {
  Shape shape(r.u8());
  for (auto& d : shape) d = r.u32();
  return shape;
}

void write_tensor_record(ByteWriter& w, const Tensor& t) {
  w.str16(t.name());
  w.u8(static_cast<std::uint8_t>(t.role()));
  w.u8(static_cast<std::uint8_t>(t.dtype()));
  write_shape(w, t.shape());
  w.f32s(t.data());
}

Tensor read_tensor_record(ByteReader& r) {
  auto name = r.str16();
  const auto role = r.u8();
  const auto dtype = r.u8();
  if (role > static_cast<std::uint8_t>(TensorRole::kOther)) {
    throw Error(ErrorCode::kInvalidArgument,
                "tensor '" + name + "' has unknown role " + std::to_string(role));
  }
  if (dtype != static_cast<std::uint8_t>(DType::kF32)) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "tensor '" + name + "' has dtype " + std::to_string(dtype));
  }
  auto shape = read_shape(r);
  if (shape.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "tensor '" + name + "' has rank 0");
  }
  // Guard against absurd dims before allocating.
  std::size_t count = 1;
  for (auto d : shape) {
    if (d == 0 || count > r.remaining() / 4 / d) {
      throw Error(ErrorCode::kTruncatedFile,
                  "tensor '" + name + "' payload " + shape_to_string(shape) +
                      " exceeds remaining bytes");
    }
    count *= d;
  }
  auto data = r.f32s(count);
  return Tensor(std::move(name), std::move(shape), std::move(data),
                static_cast<TensorRole>(role));
}

void write_manifest(ByteWriter& w, const ArchManifest& manifest) {
  ByteWriter body;
  if (!manifest.input_shape.empty()) {
    ByteWriter value;
    write_shape(value, manifest.input_shape);
    write_record(body, kInputTag, std::move(value));
  }
  for (const auto& spec : manifest.layers) {
    ByteWriter value;
    write_spec_value(value, spec);
    write_record(body, static_cast<std::uint8_t>(spec.kind), std::move(value));
  }
  auto bytes = body.take();
  w.u32(static_cast<std::uint32_t>(bytes.size()));
  w.bytes(bytes);
}

ArchManifest read_manifest(ByteReader& r) {
  const auto length = r.u32();
  ByteReader body(r.bytes(length));
  ArchManifest manifest;
  while (body.remaining() > 0) {
    const auto tag = body.u8();
    const auto len = body.u32();
    ByteReader value(body.bytes(len));
    if (tag == kInputTag) {
      if (!manifest.input_shape.empty() || !manifest.layers.empty()) {
        throw Error(ErrorCode::kBadManifest, "input record must come first and only once");
      }
      manifest.input_shape = read_shape(value);
    } else if (known_kind(tag)) {
      manifest.layers.push_back(read_spec_value(static_cast<LayerKind>(tag), value));
    } else {
      throw Error(ErrorCode::kBadManifest, "unknown manifest tag " + std::to_string(tag));
    }
    if (value.remaining() != 0) {
      throw Error(ErrorCode::kBadManifest,
                  "manifest record with tag " + std::to_string(tag) + " has " +
                      std::to_string(value.remaining()) + " unread bytes");
    }
  }
  return manifest;
}

}  // namespace detail

using detail::ByteReader;
using detail::ByteWriter;

std::vector<std::uint8_t> encode_model(const ModelBundle& model) {
  ByteWriter w;
  w.magic("LGTW");
  w.u16(kLgtwVersion);
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& t : model.layers()) detail::write_tensor_record(w, t);
  detail::write_manifest(w, model.manifest());
  detail::close_frame(w);
  return w.take();
}

ModelBundle decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(detail::open_frame(bytes, "LGTW", kLgtwVersion));
  const auto count = r.u32();
  std::vector<Tensor> layers;
  for (std::uint32_t i = 0; i < count; ++i) layers.push_back(detail::read_tensor_record(r));
  auto manifest = detail::read_manifest(r);
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kTrailingData,
                std::to_string(r.remaining()) + " unparsed bytes before checksum");
  }
  return ModelBundle(std::move(layers), std::move(manifest));
}

ModelBundle read_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path));
}

void write_model(const ModelBundle& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(model));
}

std::vector<std::uint8_t> encode_dataset(const DatasetBundle& dataset) {
  ByteWriter w;
  w.magic("LGTD");
  w.u16(kLgtdVersion);
  w.u32(static_cast<std::uint32_t>(dataset.count()));
  w.u32(dataset.num_classes());
  detail::write_shape(w, dataset.sample_shape());
  w.f32s(dataset.inputs().data());
  for (auto label : dataset.labels()) w.u32(label);
  detail::close_frame(w);
  return w.take();
}

DatasetBundle decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(detail::open_frame(bytes, "LGTD", kLgtdVersion));
  const auto count = r.u32();
  const auto num_classes = r.u32();
  auto sample_shape = detail::read_shape(r);
  if (count == 0 || sample_shape.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "dataset with zero samples or rank-0 inputs");
  }
  Shape shape{count};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  const auto elements = shape_elements(shape);
  if (elements > r.remaining() / 4) {
    throw Error(ErrorCode::kTruncatedFile, "dataset payload exceeds remaining bytes");
  }
  auto data = r.f32s(elements);
  std::vector<std::uint32_t> labels(count);
  for (auto& label : labels) label = r.u32();
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kTrailingData,
                std::to_string(r.remaining()) + " unparsed bytes before checksum");
  }
  return DatasetBundle(Tensor("inputs", std::move(shape), std::move(data), TensorRole::kOther),
                       std::move(labels), num_classes);
}

DatasetBundle read_dataset(const std::filesystem::path& path) {
  return decode_dataset(detail::read_file(path));
}

void write_dataset(const DatasetBundle& dataset, const std::filesystem::path& path) {
  detail::write_file(path, encode_dataset(dataset));
}

}  // namespace legonet
