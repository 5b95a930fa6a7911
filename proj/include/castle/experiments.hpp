#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "castle/net/decoy.hpp"
#include "castle/session/link.hpp"
#include "castle/trafficlab.hpp"

namespace castle::experiments {

/// Scratch directory for replay logs, removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("castle-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Everything needed to reproduce one run.
struct Setup {
  std::uint32_t n = 1600;
  std::uint32_t width = 320;
  std::uint32_t height = 256;
  unsigned region_bits = 16;
  std::optional<MapSpec> map;  // replaces the generated map when set

  std::uint32_t k = 200;
  ChannelMode mode = ChannelMode::Combinatorial;
  unsigned m_bits = 8;

  double command_ms = 325;             // mean issue time per command ...
  std::optional<double> per_event_ms;  // ... unless the click time is pinned
  double delay_ms = 0;
  double jitter_ms = 0;

  net::LossModel loss{0, 5, 5, 0, 0};
  double tick_ms = 100;
  std::string password = "castle-default-passphrase";
  std::uint64_t seed = 1;

  MapSpec resolved_map() const { return map ? *map : generate_map(n, width, height, region_bits); }

  TimingProfile profile(const MapSpec& m) const {
    const auto ch = m.channel(mode == ChannelMode::ByteClick ? 1 : k, mode, m_bits);
    if (per_event_ms) return {*per_event_ms, delay_ms, jitter_ms};
    return profile_for_command_ms(ch, command_ms, delay_ms, jitter_ms);
  }

  session::LinkConfig link(const std::filesystem::path& log_dir) const {
    session::LinkConfig c;
    c.map = resolved_map();
    c.k = mode == ChannelMode::ByteClick ? 1 : k;
    c.mode = mode;
    c.m_bits = m_bits;
    c.client_profile = c.proxy_profile = profile(c.map);
    c.session.tick_ms = tick_ms;
    c.session.loss = loss;
    c.session.password = password;
    c.session.kdf = net::KdfStrength::Minimal;
    c.session.session_id = seed;
    c.client_password = password;
    c.seed = seed;
    c.log_dir = log_dir;
    return c;
  }
};

inline std::vector<std::uint8_t> random_payload(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

struct TransferResult {
  session::TransferReport report;
  bool exact = false;
  PacketTrace trace;
};

/// One client-to-proxy transfer of `data`; the trace covers the whole game.
inline TransferResult run_transfer(const Setup& s, std::span<const std::uint8_t> data) {
  ScratchDir dir;
  session::CovertLink link(s.link(dir.path()));
  TransferResult r;
  r.report = link.transfer(data);
  r.exact = link.last_received().size() == data.size() &&
            std::equal(data.begin(), data.end(), link.last_received().begin());
  r.trace = link.session().trace();
  r.trace.label = "k=" + std::to_string(s.k) + " delay=" + std::to_string(static_cast<int>(s.delay_ms)) +
                  "ms seed=" + std::to_string(s.seed);
  return r;
}

/// Packets of a game carrying a continuous covert upload for `seconds`.
inline PacketTrace covert_trace(const Setup& s, double seconds) {
  ScratchDir dir;
  session::CovertLink link(s.link(dir.path()));
  // More data than the channel can move in the window keeps it saturated.
  link.client().send_message(1, random_payload(static_cast<std::size_t>(seconds * 4000) + 1024, s.seed));
  link.run_for(seconds);
  PacketTrace t = link.session().trace();
  t.label = "covert k=" + std::to_string(s.k) + " seed=" + std::to_string(s.seed);
  return t;
}

/// Packets of a game where both players are the scripted AI.
inline PacketTrace decoy_trace(const Setup& s, double seconds) {
  ScratchDir dir;
  net::SessionConfig cfg;
  cfg.tick_ms = s.tick_ms;
  cfg.loss = s.loss;
  cfg.kdf = net::KdfStrength::Minimal;
  cfg.session_id = s.seed;
  const auto key = net::derive_session_key(s.password, cfg.session_id, cfg.kdf);
  net::LockstepSession game(cfg, key, s.seed, dir.path());
  const MapSpec map = s.resolved_map();
  std::vector<net::DecoyAi> ais;
  for (std::uint8_t p = 0; p < 2; ++p) ais.emplace_back(map, s.k, s.seed * 31 + p);
  std::function<void(std::uint8_t)> play = [&](std::uint8_t p) {
    game.loop().schedule(game.loop().now() + ais[p].next_delay(), [&, p] {
      const GameCommand c = ais[p].next_command();
      game.endpoint(p).submit(std::span(&c, 1));
      play(p);
    });
  };
  play(0);
  play(1);
  game.start();
  game.loop().run_until(from_ms(seconds * 1000.0));
  PacketTrace t = game.trace();
  t.label = "decoy seed=" + std::to_string(s.seed);
  return t;
}

struct SweepRow {
  std::uint32_t k = 0;
  double delay_ms = 0;
  double goodput_Bps = 0;
  double seconds = 0;
  double ks_sizes = 0;  // packet sizes against the baseline trace
  double ks_gaps = 0;   // inter-packet times against the baseline trace
  bool exact = false;
};

/// Goodput and trace similarity over a grid of selection limits and delays.
/// Click speed is held fixed across the grid at the base setup's value.
inline std::vector<SweepRow> sweep(const Setup& base, std::span<const std::uint32_t> ks,
                                   std::span<const double> delays, std::size_t bytes, const PacketTrace& baseline) {
  Setup pinned = base;
  if (!pinned.per_event_ms) pinned.per_event_ms = base.profile(base.resolved_map()).per_event_ms;
  const auto data = random_payload(bytes, base.seed);
  const auto base_sizes = packet_sizes(baseline);
  const auto base_gaps = inter_packet_times(baseline);
  std::vector<SweepRow> rows;
  for (double d : delays) {
    for (auto k : ks) {
      Setup s = pinned;
      s.k = k;
      s.delay_ms = d;
      auto r = run_transfer(s, data);
      SweepRow row{k, d, r.report.goodput_Bps, r.report.seconds, 0, 0, r.exact};
      if (!base_sizes.empty()) row.ks_sizes = ks_statistic(packet_sizes(r.trace), base_sizes);
      if (!base_gaps.empty()) row.ks_gaps = ks_statistic(inter_packet_times(r.trace), base_gaps);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace castle::experiments
