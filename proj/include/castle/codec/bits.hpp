#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "castle/errors.hpp"

namespace castle {

using BigUint = boost::multiprecision::cpp_int;

/// Growable bit sequence, packed MSB-first into bytes.
class Bits {
 public:
  Bits() = default;

  static Bits from_bytes(std::span<const std::uint8_t> bytes) {
    Bits b;
    b.bytes_.assign(bytes.begin(), bytes.end());
    b.size_ = bytes.size() * 8;
    return b;
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool operator[](std::size_t i) const noexcept {
    return (bytes_[i / 8] >> (7 - i % 8)) & 1u;
  }

  void push_back(bool bit) {
    if (size_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (size_ % 8));
    ++size_;
  }

  /// Appends the low `width` bits of `value`, most significant first.
  void append(const BigUint& value, std::size_t width) {
    for (std::size_t i = width; i-- > 0;) push_back(boost::multiprecision::bit_test(value, i));
  }

  void append_uint(std::uint64_t value, unsigned width) {
    for (unsigned i = width; i-- > 0;) push_back((value >> i) & 1u);
  }

  void append(const Bits& other) {
    if (size_ % 8 == 0) {
      bytes_.insert(bytes_.end(), other.bytes_.begin(), other.bytes_.end());
      size_ += other.size_;
      return;
    }
    for (std::size_t i = 0; i < other.size_; ++i) push_back(other[i]);
  }

  /// Interprets bits [offset, offset + width) as an unsigned integer.
  BigUint slice_value(std::size_t offset, std::size_t width) const {
    BigUint v = 0;
    std::vector<std::uint8_t> raw(width);
    for (std::size_t i = 0; i < width; ++i) raw[i] = (*this)[offset + i];
    if (width) boost::multiprecision::import_bits(v, raw.begin(), raw.end(), 1);
    return v;
  }

  /// Packed bytes; trailing bits of the last byte are zero.
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  bool all_zero_from(std::size_t offset) const noexcept {
    for (std::size_t i = offset; i < size_; ++i)
      if ((*this)[i]) return false;
    return true;
  }

  friend bool operator==(const Bits& a, const Bits& b) noexcept {
    return a.size_ == b.size_ && a.bytes_ == b.bytes_;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t size_ = 0;
};

/// Positional reader over a byte sequence with arbitrary-width reads.
///
/// Reads past the end yield zero bits (tail padding); the cursor itself never
/// moves beyond the last real bit and the number of padded bits is tracked
/// separately. Bytes may be appended while reading is in progress.
class BitStream {
 public:
  BitStream() = default;
  explicit BitStream(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  void append(std::span<const std::uint8_t> more) { bytes_.insert(bytes_.end(), more.begin(), more.end()); }

  std::size_t size_bits() const noexcept { return bytes_.size() * 8; }
  std::size_t cursor() const noexcept { return cursor_; }
  std::size_t remaining() const noexcept { return size_bits() - cursor_; }
  bool exhausted() const noexcept { return cursor_ >= size_bits(); }
  std::size_t padded_bits() const noexcept { return padded_; }

  bool read_bit() {
    if (cursor_ >= size_bits()) {
      ++padded_;
      return false;
    }
    const bool bit = (bytes_[cursor_ / 8] >> (7 - cursor_ % 8)) & 1u;
    ++cursor_;
    return bit;
  }

  /// Next `width` bits as an unsigned integer, MSB first.
  BigUint read(std::size_t width) {
    BigUint v = 0;
    if (width == 0) return v;
    std::vector<std::uint8_t> raw(width);
    for (auto& b : raw) b = read_bit();
    boost::multiprecision::import_bits(v, raw.begin(), raw.end(), 1);
    return v;
  }

  std::uint64_t read_uint(unsigned width) {
    if (width > 64) throw RangeError("read_uint width exceeds 64");
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) v = (v << 1) | static_cast<std::uint64_t>(read_bit());
    return v;
  }

  /// Drops consumed whole bytes so long-lived streams do not grow unbounded.
  void compact() {
    const std::size_t whole = cursor_ / 8;
    if (whole == 0) return;
    bytes_.erase(bytes_.begin(), bytes_.begin() + static_cast<std::ptrdiff_t>(whole));
    cursor_ -= whole * 8;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t cursor_ = 0;
  std::size_t padded_ = 0;
};

}  // namespace castle
