#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "castle/codec/bits.hpp"
#include "castle/errors.hpp"

namespace castle {

/// Exact binomial coefficient C(n, r); zero when r > n.
inline BigUint binom(std::uint64_t n, std::uint64_t r) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  BigUint c = 1;
  for (std::uint64_t i = 1; i <= r; ++i) {
    c *= n - r + i;
    c /= i;
  }
  return c;
}

/// floor(log2 v) for v > 0; the number of bits a value below v can always carry.
inline std::size_t floor_log2(const BigUint& v) {
  if (v <= 0) throw RangeError("floor_log2 of non-positive value");
  return boost::multiprecision::msb(v);
}

/// Real-valued log2 of a positive big integer, accurate to double precision.
inline double log2_real(const BigUint& v) {
  if (v <= 0) throw RangeError("log2 of non-positive value");
  const std::size_t top = boost::multiprecision::msb(v);
  if (top < 53) return std::log2(v.convert_to<double>());
  const std::size_t shift = top - 52;
  const BigUint head = v >> shift;
  return std::log2(head.convert_to<double>()) + static_cast<double>(shift);
}

/// Colex rank of a selection given in strictly descending id order.
///
/// Accumulates C(id_j, size--) for the ids walked from largest to smallest.
/// The binomials are carried incrementally down from C(n, |selected|) so each
/// step costs one small multiply and divide instead of a fresh product.
inline BigUint rank_selection(const std::vector<std::uint32_t>& selected, std::uint32_t n) {
  const std::size_t size = selected.size();
  for (std::size_t j = 0; j < size; ++j) {
    if (selected[j] >= n) throw InvalidCommand("selected id " + std::to_string(selected[j]) + " out of range");
    if (j > 0 && selected[j] >= selected[j - 1]) throw InvalidCommand("selected ids not distinct and descending");
  }
  BigUint z = 0;
  if (size == 0) return z;

  // c tracks C(i, r) while i walks down from n.
  std::uint64_t r = size;
  BigUint c = binom(n, r);
  std::size_t next = 0;
  for (std::uint64_t i = n; r > 0; --i) {
    if (i == selected[next]) {
      z += c;
      // C(i-1, r-1) = C(i, r) * r / i
      if (i > 0) {
        c *= r;
        c /= i;
      }
      --r;
      ++next;
    } else if (i > 0) {
      // C(i-1, r) = C(i, r) * (i - r) / i
      if (i > r) {
        c *= i - r;
        c /= i;
      } else {
        c = 0;
      }
    }
    if (i == 0) break;
  }
  return z;
}

/// Inverse of rank_selection: the r-subset of {0..n-1} with colex rank z.
///
/// Scans i from n down to 0 and takes i whenever C(i, r) <= z. The
/// non-strict test is the right one: C(i, r) is nondecreasing in i, so the
/// first i passing it is the largest element whose binomial fits, and the
/// exhaustive colex oracle in the tests confirms equality cases land here.
inline std::vector<std::uint32_t> unrank_selection(BigUint z, std::uint32_t n, std::uint32_t r) {
  const BigUint total = binom(n, r);
  if (z < 0 || z >= total) throw RangeError("rank out of range for C(" + std::to_string(n) + ", " + std::to_string(r) + ")");
  std::vector<std::uint32_t> selected;
  selected.reserve(r);
  std::uint64_t rr = r;
  BigUint c = total;  // C(i, rr)
  for (std::uint64_t i = n; rr > 0; --i) {
    if (c <= z) {
      z -= c;
      selected.push_back(static_cast<std::uint32_t>(i));
      if (i > 0) {
        c *= rr;
        c /= i;
      }
      --rr;
    } else if (i > 0) {
      if (i > rr) {
        c *= i - rr;
        c /= i;
      } else {
        c = 0;
      }
    }
    if (i == 0) break;
  }
  return selected;
}

}  // namespace castle
