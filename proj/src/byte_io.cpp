#include "legonet/detail/byte_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>

namespace legonet::detail {

void ByteWriter::str16(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "string too long for u16 length prefix");
  }
  u16(static_cast<std::uint16_t>(s.size()));
  raw(s.data(), s.size());
}

void ByteReader::need(std::size_t n) const {
  if (n > bytes_.size() - pos_) {
    throw Error(ErrorCode::kTruncatedFile,
                "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                    ", only " + std::to_string(bytes_.size() - pos_) + " remain");
  }
}

std::vector<float> ByteReader::f32s(std::size_t count) {
  if (count > remaining() / sizeof(float)) need(count * sizeof(float));
  std::vector<float> out(count);
  std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(float));
  pos_ += count * sizeof(float);
  return out;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t count) {
  need(count);
  auto out = bytes_.subspan(pos_, count);
  pos_ += count;
  return out;
}

std::string ByteReader::str16() {
  const auto len = u16();
  auto b = bytes(len);
  return std::string(b.begin(), b.end());
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto n = std::min(kChunk, bytes.size() - off);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

std::span<const std::uint8_t> open_frame(std::span<const std::uint8_t> file,
                                         std::string_view magic,
                                         std::uint16_t version) {
  constexpr std::size_t kHeader = 4 + 2;
  if (file.size() < 4) {
    throw Error(ErrorCode::kTruncatedFile, "file shorter than magic");
  }
  if (std::memcmp(file.data(), magic.data(), 4) != 0) {
    throw Error(ErrorCode::kBadMagic,
                "expected '" + std::string(magic) + "', found '" +
                    std::string(file.begin(), file.begin() + 4) + "'");
  }
  if (file.size() < kHeader + 4) {
    throw Error(ErrorCode::kTruncatedFile, "file shorter than header and checksum");
  }
  std::uint16_t file_version;
  std::memcpy(&file_version, file.data() + 4, 2);
  if (file_version != version) {
    throw Error(ErrorCode::kUnsupportedVersion,
                std::string(magic) + " version " + std::to_string(file_version));
  }
  const auto covered = file.first(file.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, file.data() + covered.size(), 4);
  if (crc32(covered) != stored) {
    throw Error(ErrorCode::kChecksumMismatch, std::string(magic) + " payload checksum");
  }
  return covered.subspan(kHeader);
}

void close_frame(ByteWriter& w) { w.u32(crc32(w.buffer())); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "read failed on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot create '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed on '" + path.string() + "'");
}

}  // namespace legonet::detail
