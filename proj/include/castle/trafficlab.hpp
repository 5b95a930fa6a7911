#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "castle/errors.hpp"
#include "castle/trace.hpp"

namespace castle {

/// Two-sample Kolmogorov-Smirnov statistic: sup |ECDF_a - ECDF_b|.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("KS needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline std::vector<double> packet_sizes(const PacketTrace& t) {
  std::vector<double> out;
  out.reserve(t.records.size());
  for (const auto& r : t.records) out.push_back(r.size);
  return out;
}

inline std::vector<double> inter_packet_times(const PacketTrace& t) {
  std::vector<double> out;
  for (std::size_t i = 1; i < t.records.size(); ++i)
    out.push_back(t.records[i].timestamp_ms - t.records[i - 1].timestamp_ms);
  return out;
}

/// Splits a trace into consecutive half-open windows [start + i*w, start + (i+1)*w)
/// measured from the first packet; empty windows are dropped.
inline std::vector<PacketTrace> chunk_trace(const PacketTrace& t, double window_seconds) {
  if (!(window_seconds > 0)) throw ArgumentError("window must be positive");
  std::vector<PacketTrace> out;
  if (t.records.empty()) return out;
  const double w = window_seconds * 1000.0;
  const double start = t.records.front().timestamp_ms;
  long long current = -1;
  for (const auto& r : t.records) {
    const auto idx = static_cast<long long>(std::floor((r.timestamp_ms - start) / w));
    if (idx != current) {
      current = idx;
      out.push_back(PacketTrace{t.label + " [" + std::to_string(idx) + "]", {}});
    }
    out.back().records.push_back(r);
  }
  return out;
}

struct Histogram {
  double bin_width = 1;
  std::vector<std::uint64_t> counts;  // bin i covers [i*w, (i+1)*w)

  void add(double v) {
    if (v < 0) throw ArgumentError("histogram values must be non-negative");
    const auto i = static_cast<std::size_t>(std::floor(v / bin_width));
    if (i >= counts.size()) counts.resize(i + 1, 0);
    ++counts[i];
  }

  std::uint64_t total() const noexcept {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  std::size_t nonempty_bins() const noexcept {
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  }
};

inline constexpr double kSizeBinBytes = 16;
inline constexpr double kTimeBinMs = 10;

struct TraceFeatures {
  Histogram sizes{kSizeBinBytes, {}};
  Histogram gaps{kTimeBinMs, {}};
};

inline TraceFeatures feature_histograms(const PacketTrace& t) {
  TraceFeatures f;
  for (double s : packet_sizes(t)) f.sizes.add(s);
  for (double g : inter_packet_times(t)) f.gaps.add(g);
  return f;
}

struct LabeledHistogram {
  std::string label;
  Histogram hist;
};

struct Classification {
  std::string label;
  double score = 0;  // posterior probability of `label`
};

/// Multinomial naive Bayes with add-one smoothing over histogram bins.
/// A stand-in classifier; ties go to the lexicographically smallest label.
inline Classification nb_classify(std::span<const LabeledHistogram> train, const Histogram& test) {
  if (train.empty()) throw ArgumentError("classifier needs training examples");
  std::size_t vocab = test.counts.size();
  for (const auto& ex : train) {
    if (ex.hist.bin_width != test.bin_width) throw ArgumentError("bin widths differ between train and test");
    vocab = std::max(vocab, ex.hist.counts.size());
  }
  if (vocab == 0) throw ArgumentError("histograms carry no bins");

  struct ClassModel {
    std::size_t examples = 0;
    std::vector<double> counts;
    double total = 0;
  };
  std::map<std::string, ClassModel> classes;
  for (const auto& ex : train) {
    auto& c = classes[ex.label];
    c.counts.resize(vocab, 0);
    ++c.examples;
    for (std::size_t i = 0; i < ex.hist.counts.size(); ++i) {
      c.counts[i] += static_cast<double>(ex.hist.counts[i]);
      c.total += static_cast<double>(ex.hist.counts[i]);
    }
  }

  std::vector<std::pair<std::string, double>> logp;
  for (const auto& [label, c] : classes) {
    double lp = std::log(static_cast<double>(c.examples) / static_cast<double>(train.size()));
    const double denom = c.total + static_cast<double>(vocab);
    for (std::size_t i = 0; i < test.counts.size(); ++i)
      if (test.counts[i]) lp += static_cast<double>(test.counts[i]) * std::log((c.counts[i] + 1.0) / denom);
    logp.emplace_back(label, lp);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < logp.size(); ++i)
    if (logp[i].second > logp[best].second) best = i;
  double z = 0;
  for (const auto& [_, lp] : logp) z += std::exp(lp - logp[best].second);
  return {logp[best].first, 1.0 / z};
}

/// Covert payload goodput in bytes per second.
inline double throughput(std::uint64_t payload_bytes, double elapsed_seconds) {
  if (!(elapsed_seconds > 0)) throw DegenerateMeasure("elapsed time must be positive");
  return static_cast<double>(payload_bytes) / elapsed_seconds;
}

}  // namespace castle
