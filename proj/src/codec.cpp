#include "legonet/codec.hpp"

#include <algorithm>
#include <bit>

#include "legonet/blocking.hpp"
#include "legonet/detail/byte_io.hpp"
#include "legonet/detail/records.hpp"
#include "legonet/error.hpp"

namespace legonet {

unsigned bits_for_k(std::uint64_t k) {
  if (k <= 1) return 1;
  return static_cast<unsigned>(std::bit_width(k - 1));
}

namespace {

void check_bits(unsigned bits) {
  if (bits < 1 || bits > 32) {
    throw Error(ErrorCode::kInvalidArgument,
                "bits per index must be in 1..=32, got " + std::to_string(bits));
  }
}

}  // namespace

std::vector<std::uint8_t> pack_indices(std::span<const std::uint32_t> indices, unsigned bits) {
  check_bits(bits);
  const std::uint64_t limit = std::uint64_t{1} << bits;
  std::vector<std::uint8_t> out;
  out.reserve(packed_size(indices.size(), bits));
  std::uint64_t acc = 0;
  unsigned filled = 0;
  for (auto idx : indices) {
    if (idx >= limit) {
      throw Error(ErrorCode::kIndexOverflow,
                  "index " + std::to_string(idx) + " needs more than " + std::to_string(bits) +
                      " bits");
    }
    acc |= static_cast<std::uint64_t>(idx) << filled;
    filled += bits;
    while (filled >= 8) {
      out.push_back(static_cast<std::uint8_t>(acc & 0xFF));
      acc >>= 8;
      filled -= 8;
    }
  }
  if (filled > 0) out.push_back(static_cast<std::uint8_t>(acc & 0xFF));
  return out;
}

std::vector<std::uint32_t> unpack_indices(std::span<const std::uint8_t> stream,
                                          std::size_t count, unsigned bits) {
  check_bits(bits);
  if (stream.size() != packed_size(count, bits)) {
    throw Error(ErrorCode::kLengthMismatch,
                "stream of " + std::to_string(stream.size()) + " bytes cannot hold exactly " +
                    std::to_string(count) + " x " + std::to_string(bits) + "-bit indices");
  }
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::vector<std::uint32_t> out(count);
  std::uint64_t acc = 0;
  unsigned filled = 0;
  std::size_t pos = 0;
  for (auto& v : out) {
    while (filled < bits) {
      acc |= static_cast<std::uint64_t>(stream[pos++]) << filled;
      filled += 8;
    }
    v = static_cast<std::uint32_t>(acc & mask);
    acc >>= bits;
    filled -= bits;
  }
  return out;
}

std::uint64_t codebook_bits(std::uint64_t k, std::uint32_t b, unsigned wordlength) {
  return static_cast<std::uint64_t>(b) * b * k * wordlength;
}

CrBreakdown compute_cr(std::uint64_t p_compressed, std::uint64_t p_raw, std::uint64_t k,
                       std::uint32_t b, unsigned wordlength) {
  if (k == 0 || b == 0 || wordlength == 0) {
    throw Error(ErrorCode::kInvalidArgument, "K, b and wordlength must be positive");
  }
  CrBreakdown out;
  out.bits_per_index = bits_for_k(k);
  const std::uint64_t area = static_cast<std::uint64_t>(b) * b;
  out.theoretical_cr = static_cast<double>(area * wordlength) / out.bits_per_index;
  out.index_bits = (p_compressed * out.bits_per_index + area - 1) / area;
  out.codebook_bits = codebook_bits(k, b, wordlength);
  out.raw_bits = p_raw * wordlength;
  out.compressed_bits = out.index_bits + out.codebook_bits + out.raw_bits;
  return out;
}

std::size_t CompressedModel::block_count() const {
  std::size_t n = 0;
  for (const auto& s : streams) n += s.block_count();
  return n;
}

std::size_t CompressedModel::compressed_params() const {
  return block_count() * b * b;
}

std::size_t CompressedModel::raw_params() const {
  std::size_t n = 0;
  for (const auto& r : raw_layers) n += r.tensor.size();
  return n;
}

void CompressedModel::validate() const {
  if (b == 0) throw Error(ErrorCode::kInvalidArgument, "b must be >= 1");
  if (wordlength != kWordLengthBits) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "wordlength " + std::to_string(wordlength) + " (only 32 is defined)");
  }
  if (codebook.size() == 0 || codebook.dim() != static_cast<std::size_t>(b) * b) {
    throw Error(ErrorCode::kDimensionMismatch, "codebook does not hold b*b legos");
  }
  if (bits_per_index != bits_for_k(k())) {
    throw Error(ErrorCode::kInvalidArgument,
                "bits_per_index " + std::to_string(bits_per_index) + " != max(1, ceil(log2 " +
                    std::to_string(k()) + "))");
  }
  std::vector<bool> seen(layer_count(), false);
  auto mark = [&](std::uint32_t li) {
    if (li >= seen.size() || seen[li]) {
      throw Error(ErrorCode::kCountMismatch,
                  "layer index " + std::to_string(li) + " is out of range or repeated");
    }
    seen[li] = true;
  };
  for (const auto& s : streams) {
    mark(s.layer_index);
    const Tensor probe = Tensor::zeros(s.name, s.shape);
    const MatrixView m = flatten_to_matrix(probe);
    if (m.rows != static_cast<std::size_t>(s.rows_in_blocks) * b ||
        m.cols != static_cast<std::size_t>(s.cols_in_blocks) * b) {
      throw Error(ErrorCode::kShapeMismatch,
                  "layer '" + s.name + "' shape " + shape_to_string(s.shape) +
                      " does not match its block grid");
    }
    const auto indices = unpack_indices(s.stream, s.block_count(), bits_per_index);
    for (auto idx : indices) {
      if (idx >= k()) {
        throw Error(ErrorCode::kIndexOverflow,
                    "layer '" + s.name + "' references lego " + std::to_string(idx) + " of " +
                        std::to_string(k()));
      }
    }
  }
  for (const auto& r : raw_layers) mark(r.layer_index);
}

std::vector<std::uint8_t> encode_compressed(const CompressedModel& cm) {
  cm.validate();
  detail::ByteWriter w;
  w.magic("LGNC");
  w.u16(kLgncVersion);
  w.u8(static_cast<std::uint8_t>(cm.b));
  w.u32(static_cast<std::uint32_t>(cm.k()));
  w.u8(static_cast<std::uint8_t>(cm.bits_per_index));
  w.u8(static_cast<std::uint8_t>(cm.wordlength));
  w.f32s(cm.codebook.values());
  w.u32(static_cast<std::uint32_t>(cm.streams.size()));
  for (const auto& s : cm.streams) {
    w.u32(s.layer_index);
    w.str16(s.name);
    detail::write_shape(w, s.shape);
    w.u32(s.rows_in_blocks);
    w.u32(s.cols_in_blocks);
    w.u32(static_cast<std::uint32_t>(s.stream.size()));
    w.bytes(s.stream);
  }
  w.u32(static_cast<std::uint32_t>(cm.raw_layers.size()));
  for (const auto& r : cm.raw_layers) {
    w.u32(r.layer_index);
    detail::write_tensor_record(w, r.tensor);
  }
  detail::write_manifest(w, cm.manifest);
  detail::close_frame(w);
  return w.take();
}

CompressedModel decode_compressed(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(detail::open_frame(bytes, "LGNC", kLgncVersion));
  CompressedModel cm;
  cm.b = r.u8();
  const auto k = r.u32();
  cm.bits_per_index = r.u8();
  cm.wordlength = r.u8();
  if (cm.b == 0 || k == 0) throw Error(ErrorCode::kInvalidArgument, "b and K must be >= 1");
  const std::size_t dim = static_cast<std::size_t>(cm.b) * cm.b;
  if (k > r.remaining() / 4 / dim) {
    throw Error(ErrorCode::kTruncatedFile, "codebook exceeds remaining bytes");
  }
  cm.codebook = Codebook(cm.b, dim, r.f32s(static_cast<std::size_t>(k) * dim));

  const auto stream_count = r.u32();
  for (std::uint32_t i = 0; i < stream_count; ++i) {
    IndexStream s;
    s.layer_index = r.u32();
    s.name = r.str16();
    s.shape = detail::read_shape(r);
    s.rows_in_blocks = r.u32();
    s.cols_in_blocks = r.u32();
    const auto len = r.u32();
    auto payload = r.bytes(len);
    s.stream.assign(payload.begin(), payload.end());
    cm.streams.push_back(std::move(s));
  }
  const auto raw_count = r.u32();
  for (std::uint32_t i = 0; i < raw_count; ++i) {
    RawLayer raw;
    raw.layer_index = r.u32();
    raw.tensor = detail::read_tensor_record(r);
    cm.raw_layers.push_back(std::move(raw));
  }
  cm.manifest = detail::read_manifest(r);
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kTrailingData,
                std::to_string(r.remaining()) + " unparsed bytes before checksum");
  }
  cm.validate();
  return cm;
}

void write_compressed(const CompressedModel& cm, const std::filesystem::path& path) {
  detail::write_file(path, encode_compressed(cm));
}

CompressedModel read_compressed(const std::filesystem::path& path) {
  return decode_compressed(detail::read_file(path));
}

}  // namespace legonet
