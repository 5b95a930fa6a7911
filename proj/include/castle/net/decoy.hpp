#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

#include "castle/codec/command.hpp"
#include "castle/mapgen.hpp"
#include "castle/sim_time.hpp"

namespace castle::net {

/// Scripted opponent: uniformly random legal MOVE commands at a human pace,
/// one every 1 to 3 seconds.
class DecoyAi {
 public:
  DecoyAi(const MapSpec& map, std::uint32_t max_select, std::uint64_t seed)
      : map_(&map), max_select_(std::clamp<std::uint32_t>(max_select, 1, map.object_count())), rng_(seed) {}

  GameCommand next_command() {
    std::uniform_int_distribution<std::uint32_t> size(1, max_select_);
    const std::uint32_t r = size(rng_);
    GameCommand c;
    c.opcode = Opcode::Move;
    std::vector<std::uint32_t> ids(map_->object_count());
    for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    std::sample(ids.begin(), ids.end(), std::back_inserter(c.selected), r, rng_);
    c.target = {std::uniform_int_distribution<std::uint32_t>(0, map_->width - 1)(rng_),
                std::uniform_int_distribution<std::uint32_t>(0, map_->height - 1)(rng_)};
    c.canonicalize();
    return c;
  }

  SimTime next_delay() { return from_ms(std::uniform_real_distribution<double>(1000.0, 3000.0)(rng_)); }

 private:
  const MapSpec* map_;
  std::uint32_t max_select_;
  std::mt19937_64 rng_;
};

}  // namespace castle::net
