#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "castle/experiments.hpp"
#include "castle/trafficlab.hpp"
#include "oracles.hpp"

using namespace castle;

namespace {

PacketTrace synthetic(std::size_t count, double spacing_ms, std::uint32_t size) {
  PacketTrace t{"synthetic", {}};
  for (std::size_t i = 0; i < count; ++i)
    t.records.push_back({static_cast<double>(i) * spacing_ms, size, i % 2 ? Direction::BtoA : Direction::AtoB});
  return t;
}

Histogram hist(double width, std::vector<std::uint64_t> counts) { return {width, std::move(counts)}; }

}  // namespace

TEST(Ks, WorkedExamples) {
  const std::vector<double> a = {1, 2, 3}, b = {10, 11};
  EXPECT_DOUBLE_EQ(ks_statistic(a, a), 0.0);
  EXPECT_DOUBLE_EQ(ks_statistic(a, b), 1.0);
  const std::vector<double> c = {1, 2, 3, 4}, d = {2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(ks_statistic(c, d), 0.25);
  EXPECT_THROW(ks_statistic(std::vector<double>{}, a), ArgumentError);
}

TEST(Ks, MatchesBruteForceEcdf) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::uniform_int_distribution<int> len(1, 40), val(0, 15);  // small range forces ties
    std::vector<double> a(len(rng)), b(len(rng));
    for (auto& v : a) v = val(rng);
    for (auto& v : b) v = val(rng);
    const double got = ks_statistic(a, b);
    EXPECT_NEAR(got, oracle::ks_brute(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(got, ks_statistic(b, a));
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(Chunk, Windows) {
  auto t = synthetic(1201, 100, 60);  // 0 .. 120 s
  auto chunks = chunk_trace(t, 60);
  ASSERT_EQ(chunks.size(), 3u);  // the packet at exactly 120 s opens a third window
  EXPECT_EQ(chunks[0].records.size(), 600u);
  EXPECT_EQ(chunks[1].records.size(), 600u);
  EXPECT_EQ(chunks[2].records.size(), 1u);
  t.records.pop_back();
  EXPECT_EQ(chunk_trace(t, 60).size(), 2u);
  EXPECT_EQ(chunk_trace(t, 1000).size(), 1u);
  EXPECT_THROW(chunk_trace(t, 0), ArgumentError);
}

TEST(Chunk, ConservesRecordsAndDropsEmptyWindows) {
  PacketTrace t{"gappy", {}};
  for (double ts : {0.0, 10.0, 5000.0, 5001.0, 30'000.0}) t.records.push_back({ts, 100, Direction::AtoB});
  auto chunks = chunk_trace(t, 1);
  ASSERT_EQ(chunks.size(), 3u);
  std::size_t total = 0;
  for (const auto& c : chunks) total += c.records.size();
  EXPECT_EQ(total, t.records.size());
}

TEST(Histograms, SinglePacket) {
  auto f = feature_histograms(synthetic(1, 0, 70));
  EXPECT_EQ(f.sizes.total(), 1u);
  EXPECT_EQ(f.sizes.counts.size(), 5u);  // 70 bytes falls in [64, 80)
  EXPECT_EQ(f.sizes.counts[4], 1u);
  EXPECT_EQ(f.gaps.total(), 0u);
}

TEST(Histograms, UniformTraceIsFlat) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::uint32_t> size(1, 16 * 20);  // 20 bins
  PacketTrace t{"uniform", {}};
  for (int i = 0; i < 200'000; ++i) t.records.push_back({i * 1.0, size(rng), Direction::AtoB});
  auto f = feature_histograms(t);
  EXPECT_EQ(f.sizes.total(), t.records.size());
  EXPECT_EQ(f.gaps.total(), t.records.size() - 1);
  // Sizes 1..320 land in bins 0..20; bins 1..19 hold 16 values each.
  const double expect = 200'000.0 * 16 / 320;
  for (std::size_t i = 1; i < 20; ++i) EXPECT_NEAR(f.sizes.counts[i], expect, 5 * std::sqrt(expect));
}

TEST(NaiveBayes, PicksMatchingClass) {
  std::vector<LabeledHistogram> train = {{"small", hist(16, {50, 40, 0, 0})}, {"large", hist(16, {0, 0, 45, 55})}};
  auto c = nb_classify(train, train[0].hist);
  EXPECT_EQ(c.label, "small");
  EXPECT_GT(c.score, 0.99);
  EXPECT_EQ(nb_classify(train, train[1].hist).label, "large");
}

TEST(NaiveBayes, SymmetricClassesScoreHalf) {
  std::vector<LabeledHistogram> train = {{"a", hist(16, {10, 0})}, {"b", hist(16, {0, 10})}};
  auto c = nb_classify(train, hist(16, {3, 3}));
  EXPECT_NEAR(c.score, 0.5, 1e-12);
  EXPECT_EQ(c.label, "a");
}

TEST(NaiveBayes, LabelPermutationInvariant) {
  std::vector<LabeledHistogram> train = {{"x", hist(16, {9, 1, 0})}, {"y", hist(16, {1, 9, 2})}, {"x", hist(16, {7, 3})}};
  const auto test = hist(16, {2, 5, 1});
  auto base = nb_classify(train, test);
  std::reverse(train.begin(), train.end());
  auto rev = nb_classify(train, test);
  EXPECT_EQ(base.label, rev.label);
  EXPECT_DOUBLE_EQ(base.score, rev.score);
}

TEST(NaiveBayes, Errors) {
  EXPECT_THROW(nb_classify({}, hist(16, {1})), ArgumentError);
  std::vector<LabeledHistogram> train = {{"a", hist(16, {1})}};
  EXPECT_THROW(nb_classify(train, hist(10, {1})), ArgumentError);
}

TEST(Throughput, Values) {
  EXPECT_NEAR(throughput(10 * 1024, 52), 196.9, 0.1);
  EXPECT_EQ(throughput(0, 5), 0.0);
  EXPECT_THROW(throughput(10, 0), DegenerateMeasure);
}

TEST(TraceFile, RoundTrip) {
  PacketTrace t{"cfg k=200", {{0.5, 56, Direction::AtoB}, {100.25, 80, Direction::BtoA}}};
  std::stringstream s;
  write_trace(s, t);
  auto back = read_trace(s);
  EXPECT_EQ(back.label, t.label);
  EXPECT_EQ(back.records, t.records);
  std::stringstream bad("1.0 50 ab\n2.0 x ba\n");
  try {
    read_trace(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::stringstream backwards("5 50 ab\n1 50 ab\n");
  EXPECT_THROW(read_trace(backwards), ArgumentError);
}

TEST(Traces, SameSeedIdentical) {
  experiments::Setup s;
  s.seed = 3;
  auto a = experiments::covert_trace(s, 20);
  auto b = experiments::covert_trace(s, 20);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(ks_statistic(packet_sizes(a), packet_sizes(b)), 0.0);
}

TEST(Traces, SelfSimilarityBeatsCrossConfig) {
  experiments::Setup s200, s25;
  s200.k = 200;
  s25.k = 25;
  s25.per_event_ms = s200.per_event_ms = s200.profile(s200.resolved_map()).per_event_ms;
  int wins = 0;
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    s200.seed = 100 + trial;
    auto a = experiments::covert_trace(s200, 60);
    s200.seed = 200 + trial;
    auto b = experiments::covert_trace(s200, 60);
    s25.seed = 300 + trial;
    auto c = experiments::covert_trace(s25, 60);
    const double same = ks_statistic(packet_sizes(a), packet_sizes(b));
    const double cross = ks_statistic(packet_sizes(a), packet_sizes(c));
    wins += same < cross;
  }
  EXPECT_EQ(wins, 3);
}

TEST(Traces, DecoyTraceHasHumanPace) {
  experiments::Setup s;
  auto t = experiments::decoy_trace(s, 60);
  // One datagram per player per tick: about 1200 in a minute.
  EXPECT_NEAR(static_cast<double>(t.records.size()), 1200, 10);
  auto f = feature_histograms(t);
  EXPECT_EQ(f.sizes.total(), t.records.size());
}
