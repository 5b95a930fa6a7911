#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "castle/codec/codec.hpp"
#include "castle/mapgen.hpp"
#include "castle/sim_time.hpp"

namespace castle {

struct ClickObject {
  std::uint32_t id;
  std::uint32_t x, y;  // map cell of the object
  friend bool operator==(const ClickObject&, const ClickObject&) = default;
};
struct ClickCell {
  std::uint32_t x, y;  // absolute map cell
  friend bool operator==(const ClickCell&, const ClickCell&) = default;
};
enum class Modifier { MultiSelect };
struct KeyPress {
  Modifier key;
  bool down;
  friend bool operator==(const KeyPress&, const KeyPress&) = default;
};

using InputAction = std::variant<ClickObject, ClickCell, KeyPress>;

struct InputEvent {
  SimTime at;
  InputAction action;
};

struct TimingProfile {
  double per_event_ms = 0;
  double inter_command_delay_ms = 0;
  double jitter_ms = 0;  // half-width of uniform jitter applied to each click gap

  void validate() const {
    if (per_event_ms < 0 || inter_command_delay_ms < 0 || jitter_ms < 0)
      throw ArgumentError("timing profile values must be non-negative");
  }
};

/// Fastest automated click we model (AutoHotkey-class tools, ~3300 clicks/s).
inline constexpr double kFastestClickMs = 0.3;

/// Ceiling reported by expected_rate for zero-duration profiles.
inline constexpr double kMaxCommandRate = 1e6;

/// Clicks needed for a command: one per selected object plus the target click.
/// Byte-click commands are a single selection click.
inline double clicks_for(std::size_t selected, ChannelMode mode) {
  return mode == ChannelMode::ByteClick ? 1.0 : static_cast<double>(selected) + 1.0;
}

inline double mean_clicks_per_command(const ChannelConfig& cfg) {
  if (cfg.mode == ChannelMode::ByteClick) return 1.0;
  return (cfg.k + 1) / 2.0 + 1.0;
}

/// Profile whose mean command issue time equals `command_ms` under `cfg`.
inline TimingProfile profile_for_command_ms(const ChannelConfig& cfg, double command_ms, double delay_ms = 0,
                                            double jitter_ms = 0) {
  return TimingProfile{command_ms / mean_clicks_per_command(cfg), delay_ms, jitter_ms};
}

struct ScheduledCommand {
  std::vector<InputEvent> events;
  SimTime completed;
};

/// Turns commands into timed click sequences on a simulated clock.
class InputScheduler {
 public:
  InputScheduler(const MapSpec& map, TimingProfile profile, ChannelMode mode, std::uint64_t seed)
      : map_(&map), profile_(profile), mode_(mode), rng_(seed) {
    profile_.validate();
  }

  const TimingProfile& profile() const noexcept { return profile_; }

  ScheduledCommand schedule(const GameCommand& cmd, SimTime clock) {
    for (auto id : cmd.selected) map_->object(id);
    ScheduledCommand out;
    SimTime t = clock;
    const bool multi = cmd.selected.size() > 1;
    if (multi) out.events.push_back({t, KeyPress{Modifier::MultiSelect, true}});
    for (std::size_t i = 0; i < cmd.selected.size(); ++i) {
      const auto& o = map_->object(cmd.selected[i]);
      out.events.push_back({t, ClickObject{o.id, o.x, o.y}});
      t += gap();
    }
    if (multi) out.events.push_back({t, KeyPress{Modifier::MultiSelect, false}});
    if (mode_ == ChannelMode::Combinatorial) {
      out.events.push_back(
          {t, ClickCell{map_->region.origin_x + cmd.target.x, map_->region.origin_y + cmd.target.y}});
      t += gap();
    }
    out.completed = t;
    return out;
  }

  /// Earliest start of the next command after one completes.
  SimTime next_start(SimTime completed) const { return completed + from_ms(profile_.inter_command_delay_ms); }

 private:
  SimTime gap() {
    double ms = profile_.per_event_ms;
    if (profile_.jitter_ms > 0) ms += std::uniform_real_distribution<double>(-profile_.jitter_ms, profile_.jitter_ms)(rng_);
    return from_ms(std::max(0.0, ms));
  }

  const MapSpec* map_;
  TimingProfile profile_;
  ChannelMode mode_;
  std::mt19937_64 rng_;
};

struct RateEstimate {
  double commands_per_second = 0;
  double bytes_per_second = 0;
  double command_ms = 0;
};

/// Closed-form throughput for a channel driven at a given profile.
inline RateEstimate expected_rate(const ChannelConfig& cfg, const TimingProfile& profile) {
  profile.validate();
  RateEstimate e;
  e.command_ms = mean_clicks_per_command(cfg) * profile.per_event_ms;
  const double cycle = e.command_ms + profile.inter_command_delay_ms;
  e.commands_per_second = cycle > 0 ? std::min(kMaxCommandRate, 1000.0 / cycle) : kMaxCommandRate;
  e.bytes_per_second = e.commands_per_second * avg_bits_per_command_floor(cfg).total_bytes();
  return e;
}

}  // namespace castle
