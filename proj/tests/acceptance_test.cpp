// Acceptance suite. Prints one PASS/FAIL line per criterion; with an
// argument, runs only that criterion. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "castle/experiments.hpp"
#include "castle/replay.hpp"
#include "castle/session/link.hpp"
#include "castle/trafficlab.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace castle;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::string failures;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures += " [failed: " + what + "]";
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool within(double v, double target, double rel) { return std::abs(v - target) <= rel * target; }

// 1. Colex rank/unrank against brute-force enumeration.
void codec_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  std::size_t checked = 0;
  bool ok = true;
  for (unsigned n = 0; n <= 12 && ok; ++n) {
    for (unsigned r = 0; r <= n && ok; ++r) {
      const auto subsets = oracle::colex_subsets(n, r);
      ok = BigUint(subsets.size()) == binom(n, r);
      for (std::size_t rank = 0; rank < subsets.size() && ok; ++rank) {
        ok = unrank_selection(rank, n, r) == subsets[rank] && rank_selection(subsets[rank], n) == rank;
        ++checked;
      }
    }
  }
  const double secs = seconds_since(t0);
  o.check(ok, "rank/unrank mismatch");
  o.check(secs < 10, "runtime");
  o.detail << "ranks=" << checked << " runtime=" << secs << "s";
}

// 2. 100 KiB through the whole pipeline under drop and reorder.
void round_trip(Outcome& o) {
  experiments::Setup s;
  s.loss.drop_prob = 0.10;
  s.loss.reorder_prob = 0.05;
  s.seed = 2;
  const auto data = experiments::random_payload(100 * 1024, 99);
  const auto t0 = Clock::now();
  const auto r = experiments::run_transfer(s, data);
  const double wall = seconds_since(t0);
  o.check(r.exact, "bytes differ");
  o.check(wall < 60, "wall time");
  o.detail << "bytes=" << r.report.bytes << " exact=" << r.exact << " virtual=" << r.report.seconds
           << "s retransmits=" << r.report.retransmissions << " wall=" << wall << "s";
}

// 3. Closed-form rate, selection term only.
void rate_formula(Outcome& o) {
  const auto zero_ad = avg_bits_per_command(generate_map(1600, 320, 256, 16).channel(200));
  ChannelConfig aeons;
  aeons.n = 435;
  aeons.k = 435;
  aeons.x_max = 256;
  aeons.y_max = 256;
  const auto ae = avg_bits_per_command(aeons);
  o.check(within(zero_ad.selection_bytes(), 65, 0.02), "n=1600 k=200 selection term outside 65 B +-2%");
  o.check(ae.selection_bytes() >= 37 && ae.selection_bytes() <= 40, "n=435 k=435 outside [37, 40] B");
  o.detail << "n=1600,k=200 selection=" << zero_ad.selection_bytes() << "B (with location "
           << zero_ad.total_bytes() << "B); n=435,k=435 selection=" << ae.selection_bytes() << "B";
}

// 4. Throughput on the calibrated profiles.
void throughput_repro(Outcome& o) {
  experiments::Setup s;  // 325 ms per command, no added delay
  const auto ten = experiments::run_transfer(s, experiments::random_payload(10 * 1024, 4));
  o.check(ten.exact, "10 KiB not exact");
  o.check(within(ten.report.goodput_Bps, 190, 0.15), "goodput outside 190 B/s +-15%");
  o.check(within(ten.report.seconds, 52, 0.15), "10 KiB time outside 52 s +-15%");

  experiments::Setup bc;
  bc.mode = ChannelMode::ByteClick;
  bc.per_event_ms = 0.33;  // 2.5 ms per command in total
  bc.delay_ms = 2.17;
  const auto byte = experiments::run_transfer(bc, experiments::random_payload(20 * 1024, 5));
  o.check(byte.exact, "byte-click not exact");
  o.check(within(byte.report.goodput_Bps, 400, 0.10), "byte-click outside 400 B/s +-10%");

  bc.per_event_ms = kFastestClickMs;
  bc.delay_ms = 0;
  const auto fast = experiments::run_transfer(bc, experiments::random_payload(100 * 1024, 6));
  o.check(fast.exact, "fast byte-click not exact");
  o.check(fast.report.goodput_Bps >= 3000, "max click rate below 3 KB/s");

  o.detail << "0AD goodput=" << ten.report.goodput_Bps << "B/s 10KiB=" << ten.report.seconds
           << "s byte-click@2.5ms=" << byte.report.goodput_Bps << "B/s byte-click@" << kFastestClickMs
           << "ms=" << fast.report.goodput_Bps << "B/s";
}

// 5. Goodput monotone in k and in delay.
void sweep_shape(Outcome& o) {
  experiments::Setup s;
  const std::vector<std::uint32_t> ks = {25, 50, 100, 200};
  const std::vector<double> delays = {100, 250, 500, 1000};
  const auto rows = experiments::sweep(s, ks, delays, 20000, PacketTrace{});
  auto at = [&](std::size_t di, std::size_t ki) { return rows[di * ks.size() + ki]; };
  for (std::size_t di = 0; di < delays.size(); ++di)
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      o.check(at(di, ki).exact, "transfer not exact");
      if (ki > 0 && at(di, ki).goodput_Bps < at(di, ki - 1).goodput_Bps)
        o.check(false, "decreasing in k at delay " + std::to_string(delays[di]));
      if (di > 0 && at(di, ki).goodput_Bps > at(di - 1, ki).goodput_Bps)
        o.check(false, "increasing in delay at k " + std::to_string(ks[ki]));
    }
  o.detail << "goodput B/s by delay (rows) x k (cols):";
  for (std::size_t di = 0; di < delays.size(); ++di) {
    o.detail << " [" << delays[di] << "ms:";
    for (std::size_t ki = 0; ki < ks.size(); ++ki) o.detail << " " << std::lround(at(di, ki).goodput_Bps);
    o.detail << "]";
  }
}

// 6. KS identities, worked value, and self- vs cross-config similarity.
void ks_properties(Outcome& o) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 100);
  bool ident = true, sym = true;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(1 + rng() % 50), y(1 + rng() % 50);
    for (auto& v : x) v = std::floor(u(rng));
    for (auto& v : y) v = std::floor(u(rng));
    ident = ident && ks_statistic(x, x) == 0.0;
    sym = sym && ks_statistic(x, y) == ks_statistic(y, x);
  }
  o.check(ident, "KS(x,x) != 0");
  o.check(sym, "KS not symmetric");
  const double worked = ks_statistic(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 3, 4, 5});
  o.check(std::abs(worked - 0.25) < 1e-12, "worked example");

  experiments::Setup k200, k25;
  k200.k = 200;
  k25.k = 25;
  k25.per_event_ms = k200.per_event_ms = k200.profile(k200.resolved_map()).per_event_ms;
  int wins = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    k200.seed = 1000 + trial;
    const auto a = packet_sizes(experiments::covert_trace(k200, 60));
    k200.seed = 2000 + trial;
    const auto b = packet_sizes(experiments::covert_trace(k200, 60));
    k25.seed = 3000 + trial;
    const auto c = packet_sizes(experiments::covert_trace(k25, 60));
    wins += ks_statistic(a, b) < ks_statistic(a, c);
  }
  o.check(wins >= 9, "self-similarity won fewer than 9 of 10 trials");
  o.detail << "KS(x,x)=0:" << ident << " symmetric:" << sym << " worked=" << worked << " same<cross in " << wins
           << "/10";
}

// 7. Tamper rejection, no plaintext on the wire, decoy isolation, knock.
void security(Outcome& o) {
  // Real datagrams of a covert transfer carrying a known marker.
  TempDir dir;
  experiments::Setup s;
  s.seed = 77;
  std::vector<std::uint8_t> marker;
  for (const char c : std::string("CASTLE-PLAINTEXT-MARKER-0123456789")) marker.push_back(static_cast<std::uint8_t>(c));
  std::vector<std::uint8_t> payload;
  for (int i = 0; i < 40; ++i) payload.insert(payload.end(), marker.begin(), marker.end());
  session::CovertLink link(s.link(dir.path()));
  link.session().capture_payloads(true);
  link.transfer(payload);
  const bool delivered = link.last_received() == payload;
  const auto& wire = link.session().captured();
  const auto key = net::derive_session_key(s.password, s.seed, net::KdfStrength::Minimal);

  std::size_t leaks = 0;
  const std::vector<std::uint8_t> probe(marker.begin(), marker.begin() + 12);
  for (const auto& d : wire) leaks += std::search(d.begin(), d.end(), probe.begin(), probe.end()) != d.end();

  std::mt19937_64 rng(7);
  std::size_t accepted = 0, originals_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& pkt = wire[rng() % wire.size()];
    const std::uint8_t recipient = static_cast<std::uint8_t>(1 - pkt[3]);
    originals_ok += net::open_packet(key, s.seed, recipient, pkt).has_value();
    auto bad = pkt;
    const auto bit = rng() % (bad.size() * 8);
    bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    accepted += net::open_packet(key, s.seed, recipient, bad).has_value();
  }
  o.check(delivered, "marker transfer failed");
  o.check(originals_ok == 1000, "unmodified packets failed to open");
  o.check(accepted == 0, "a flipped packet authenticated");
  o.check(leaks == 0, "marker visible on the wire");

  // Wrong-password peers in decoy mode.
  std::size_t decoy_frames = 0, decoy_sent = 0, decoy_served = 0, verified_peers = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    TempDir d;
    experiments::Setup ds;
    ds.seed = 500 + i;
    auto cfg = ds.link(d.path());
    cfg.session.admission = net::Admission::Decoy;
    cfg.client_password = "guess-" + std::to_string(i);
    cfg.client_profile = cfg.proxy_profile = {1.0, 0, 0};
    session::CovertLink l(cfg);
    session::DocumentStore store;
    store.put("a", session::to_bytes("hidden document"));
    l.serve(std::cref(store));
    l.client().send_message(1, session::to_bytes("doc:a"), session::FrameType::Request);
    l.run_for(60);
    decoy_frames += l.client().assembler().stats().frames + l.client().has_message();
    decoy_sent += l.proxy().stats().commands_sent;
    decoy_served += l.served();
    verified_peers += l.client_verified();
  }
  o.check(decoy_frames == 0 && decoy_sent == 0 && decoy_served == 0 && verified_peers == 0,
          "decoy peer saw covert traffic");

  // Knock: the right opening verifies, random openings do not.
  const auto map = generate_map(1600, 320, 256, 16);
  CommandCodec codec(map.channel(200));
  const auto knock = session::knock_bits(s.password);
  session::KnockVerifier good(knock, 600);
  for (const auto& c : session::knock_commands(knock, codec, rng)) good.feed(codec.decode(c));
  o.check(good.state() == session::KnockState::Verified, "correct knock not accepted");
  std::size_t false_accepts = 0;
  for (int i = 0; i < 10000; ++i) {
    session::KnockVerifier v(knock, 600);
    const auto bytes = experiments::random_payload(64, 10'000 + i);
    BitStream stream(bytes);
    while (v.state() == session::KnockState::Pending) v.feed(codec.decode(codec.encode(stream, rng)));
    false_accepts += v.state() == session::KnockState::Verified;
  }
  o.check(false_accepts == 0, "random opening accepted");

  o.detail << "bitflips accepted=" << accepted << "/1000 marker hits=" << leaks << " in " << wire.size()
           << " datagrams; decoy sessions=100 frames=" << decoy_frames << " covert commands=" << decoy_sent
           << "; knock ok=" << (good.state() == session::KnockState::Verified)
           << " random accepted=" << false_accepts << "/10000";
}

ReplayRecord random_record(std::mt19937_64& rng) {
  ReplayRecord r;
  r.tick = static_cast<std::uint32_t>(rng());
  r.player = static_cast<std::uint8_t>(rng() % 8);
  r.opcode = rng() % 2 ? Opcode::Move : Opcode::SetRallyPoint;
  r.ids.resize(1 + rng() % 200);
  for (auto& id : r.ids) id = static_cast<std::uint32_t>(rng());
  r.x = static_cast<std::uint16_t>(rng());
  r.y = static_cast<std::uint16_t>(rng());
  return r;
}

// 8. Replay serialization and a racing tailer.
void replay_format(Outcome& o) {
  std::mt19937_64 rng(8);
  std::size_t mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto rec = random_record(rng);
    const auto bytes = serialize_record(rec);
    std::size_t used = 0;
    const auto back = parse_record(bytes, 0, &used);
    mismatches += !back || *back != rec || used != bytes.size();
  }
  o.check(mismatches == 0, "round trip mismatch");

  TempDir dir;
  const auto path = dir.path() / "race.creplay";
  ReplayWriter w(path);
  std::vector<ReplayRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    recs.push_back(random_record(rng));
    recs.back().tick = static_cast<std::uint32_t>(i);
  }
  std::thread writer([&] {
    for (const auto& r : recs) {
      w.append(r);
      if (r.tick % 25 == 0) std::this_thread::sleep_for(std::chrono::microseconds(300));
    }
  });
  ReplayTailer t(path, 0, PlayerFilter::all(), std::chrono::milliseconds(1));
  std::vector<ReplayRecord> got;
  const auto deadline = Clock::now() + std::chrono::seconds(30);
  while (got.size() < recs.size() && Clock::now() < deadline)
    for (auto& r : t.wait(std::chrono::milliseconds(20))) got.push_back(std::move(r));
  writer.join();
  for (auto& r : t.poll()) got.push_back(std::move(r));
  o.check(got == recs, "tailer output differs from the written sequence");
  o.detail << "round trip mismatches=" << mismatches << "/10000; tailer got " << got.size() << "/1000 in order="
           << (got == recs);
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "codec oracle equivalence", codec_oracle}, {2, "end-to-end round trip", round_trip},
      {3, "rate formula", rate_formula},             {4, "throughput reproduction", throughput_repro},
      {5, "sweep shape", sweep_shape},               {6, "KS properties", ks_properties},
      {7, "security properties", security},          {8, "replay format", replay_format},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (const auto& c : all) {
    if (only && c.id != only) continue;
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                (o.detail.str() + o.failures).c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
