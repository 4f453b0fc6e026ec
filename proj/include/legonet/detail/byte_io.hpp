#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "legonet/error.hpp"

namespace legonet::detail {

static_assert(std::endian::native == std::endian::little,
              "container formats assume a little-endian host");

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32s(std::span<const float> values) { raw(values.data(), values.size_bytes()); }
  void bytes(std::span<const std::uint8_t> b) { raw(b.data(), b.size()); }
  void magic(std::string_view m) { raw(m.data(), m.size()); }

  // u16 length prefix followed by the raw bytes.
  void str16(std::string_view s);

  std::size_t size() const { return buf_.size(); }
  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  std::vector<std::uint8_t> buf_;
};

// Bounds-checked cursor; any read past the end raises TruncatedFile.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::vector<float> f32s(std::size_t count);
  std::span<const std::uint8_t> bytes(std::size_t count);
  std::string str16();

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Shared framing for all three containers: magic (4 bytes), version u16,
// body, CRC-32 over everything before the trailing checksum. Returns the body.
std::span<const std::uint8_t> open_frame(std::span<const std::uint8_t> file,
                                         std::string_view magic,
                                         std::uint16_t version);
void close_frame(ByteWriter& w);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace legonet::detail
