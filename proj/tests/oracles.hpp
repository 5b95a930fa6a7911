#pragma once

#include <cmath>

// Independent reference computations used to freeze expected values.
// Nothing here calls into the library's codec paths.

#include <bit>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using boost::multiprecision::cpp_int;

/// All r-subsets of {0..n-1} in colex order, each listed in descending order.
/// Colex order on subsets coincides with numeric order of their bitmasks.
inline std::vector<std::vector<std::uint32_t>> colex_subsets(unsigned n, unsigned r) {
  std::vector<std::vector<std::uint32_t>> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<unsigned>(std::popcount(mask)) != r) continue;
    std::vector<std::uint32_t> s;
    for (int b = static_cast<int>(n) - 1; b >= 0; --b)
      if (mask & (1u << b)) s.push_back(static_cast<std::uint32_t>(b));
    out.push_back(std::move(s));
  }
  return out;
}

/// Row n of Pascal's triangle built additively, entries 0..max_r.
inline std::vector<cpp_int> pascal_row(unsigned n, unsigned max_r) {
  std::vector<cpp_int> row(max_r + 1, 0);
  row[0] = 1;
  for (unsigned i = 1; i <= n; ++i)
    for (unsigned j = std::min(i, max_r); j >= 1; --j) row[j] += row[j - 1];
  return row;
}

/// KS by direct evaluation of both ECDFs at every sample point.
inline double ks_brute(const std::vector<double>& a, const std::vector<double>& b) {
  auto ecdf = [](const std::vector<double>& s, double x) {
    std::size_t c = 0;
    for (double v : s) c += v <= x;
    return static_cast<double>(c) / static_cast<double>(s.size());
  };
  double d = 0;
  for (const auto* s : {&a, &b})
    for (double x : *s) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  return d;
}

}  // namespace oracle
