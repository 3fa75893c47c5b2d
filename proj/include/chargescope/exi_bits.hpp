#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "chargescope/bytes.hpp"

namespace chargescope::exi {

/// Thrown by BitReader on overrun or malformed primitive; carries the bit
/// position at which decoding stopped.
class BitError : public std::runtime_error {
 public:
  BitError(std::size_t bit_offset, const std::string& what)
      : std::runtime_error(what), bit_offset_(bit_offset) {}
  std::size_t bit_offset() const { return bit_offset_; }

 private:
  std::size_t bit_offset_;
};

/// MSB-first bit packer (EXI bit-packed alignment).
class BitWriter {
 public:
  void bits(std::uint32_t value, unsigned width) {
    for (unsigned i = width; i-- > 0;) push((value >> i) & 1U);
  }

  /// EXI Unsigned Integer: little-endian groups of 7 bits, high bit = more.
  void uvar(std::uint64_t value) {
    do {
      auto group = static_cast<std::uint32_t>(value & 0x7F);
      value >>= 7;
      bits(group | (value ? 0x80U : 0U), 8);
    } while (value);
  }

  Bytes finish() const { return bytes_; }
  std::size_t bit_count() const { return bit_count_; }

 private:
  void push(std::uint32_t bit) {
    if (bit_count_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80U >> (bit_count_ % 8));
    ++bit_count_;
  }

  Bytes bytes_;
  std::size_t bit_count_ = 0;
};

class BitReader {
 public:
  explicit BitReader(ByteView data) : data_(data) {}

  std::uint32_t bits(unsigned width) {
    std::uint32_t v = 0;
    for (unsigned i = 0; i < width; ++i) {
      if (pos_ >= data_.size() * 8) throw BitError(pos_, "unexpected end of stream");
      std::uint32_t bit = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1U;
      v = (v << 1) | bit;
      ++pos_;
    }
    return v;
  }

  /// Rejects encodings longer than `max_groups` 7-bit groups.
  std::uint64_t uvar(unsigned max_groups = 10) {
    std::size_t start = pos_;
    std::uint64_t value = 0;
    for (unsigned i = 0; i < max_groups; ++i) {
      std::uint32_t octet = bits(8);
      value |= static_cast<std::uint64_t>(octet & 0x7F) << (7 * i);
      if (!(octet & 0x80)) return value;
    }
    throw BitError(start, "unsigned integer too long");
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() * 8 - pos_; }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

/// Number of bits needed to distinguish `n` event codes.
constexpr unsigned code_width(std::size_t n) {
  unsigned w = 0;
  while ((std::size_t{1} << w) < n) ++w;
  return w;
}

}  // namespace chargescope::exi
