#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "legonet/clustering.hpp"
#include "legonet/tensor.hpp"

namespace legonet {

inline constexpr std::uint16_t kLgncVersion = 1;

// max(1, ceil(log2 K)). K = 1 still spends one bit so streams stay decodable.
unsigned bits_for_k(std::uint64_t k);

// LSB-first bitstream: index i occupies bits [i*bits, (i+1)*bits), bit p of
// the stream lives in byte p/8 at position p%8. The last byte is zero-padded.
std::vector<std::uint8_t> pack_indices(std::span<const std::uint32_t> indices, unsigned bits);
std::vector<std::uint32_t> unpack_indices(std::span<const std::uint8_t> stream,
                                          std::size_t count, unsigned bits);

inline std::size_t packed_size(std::size_t count, unsigned bits) {
  return (count * bits + 7) / 8;
}

struct CrBreakdown {
  double theoretical_cr = 0.0;       // b^2 * wordlength / bits_per_index
  std::uint64_t index_bits = 0;      // P_compressed * bits_per_index / b^2
  std::uint64_t codebook_bits = 0;   // b^2 * K * wordlength
  std::uint64_t raw_bits = 0;        // P_raw * wordlength
  std::uint64_t compressed_bits = 0; // sum of the three terms above
  unsigned bits_per_index = 0;
};

std::uint64_t codebook_bits(std::uint64_t k, std::uint32_t b, unsigned wordlength);

// Size model of the compressed representation. The headline ratio ignores
// the codebook and raw layers; compressed_bits includes both.
CrBreakdown compute_cr(std::uint64_t p_compressed, std::uint64_t p_raw, std::uint64_t k,
                       std::uint32_t b, unsigned wordlength = kWordLengthBits);

struct IndexStream {
  std::uint32_t layer_index = 0;
  std::string name;
  Shape shape;  // original tensor shape, e.g. [out, in, kh, kw]
  std::uint32_t rows_in_blocks = 0;
  std::uint32_t cols_in_blocks = 0;
  std::vector<std::uint8_t> stream;

  std::size_t block_count() const {
    return static_cast<std::size_t>(rows_in_blocks) * cols_in_blocks;
  }
  bool operator==(const IndexStream&) const = default;
};

struct RawLayer {
  std::uint32_t layer_index = 0;
  Tensor tensor;

  bool operator==(const RawLayer&) const = default;
};

// The compressed representation: one shared codebook, a byte-aligned index
// stream per compressed layer, everything else stored verbatim.
struct CompressedModel {
  std::uint32_t b = 0;
  unsigned bits_per_index = 1;
  unsigned wordlength = kWordLengthBits;
  Codebook codebook;
  std::vector<IndexStream> streams;
  std::vector<RawLayer> raw_layers;
  ArchManifest manifest;

  std::size_t k() const { return codebook.size(); }
  std::size_t block_count() const;
  std::size_t compressed_params() const;
  std::size_t raw_params() const;
  std::size_t layer_count() const { return streams.size() + raw_layers.size(); }

  // Checks every structural invariant; throws on the first violation.
  void validate() const;

  bool operator==(const CompressedModel&) const = default;
};

std::vector<std::uint8_t> encode_compressed(const CompressedModel& cm);
CompressedModel decode_compressed(std::span<const std::uint8_t> bytes);

void write_compressed(const CompressedModel& cm, const std::filesystem::path& path);
CompressedModel read_compressed(const std::filesystem::path& path);

}  // namespace legonet
