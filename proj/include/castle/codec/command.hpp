#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "castle/errors.hpp"

namespace castle {

enum class Opcode : std::uint8_t { Move = 0x01, SetRallyPoint = 0x02 };

inline bool valid_opcode(std::uint8_t raw) noexcept { return raw == 0x01 || raw == 0x02; }

struct Coord {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

/// One in-game order: the selected objects and the target cell.
///
/// Coordinates are relative to the rally region; the game log records them in
/// absolute map cells, which the replay layer translates.
struct GameCommand {
  Opcode opcode = Opcode::Move;
  std::vector<std::uint32_t> selected;
  Coord target;

  friend bool operator==(const GameCommand&, const GameCommand&) = default;

  /// Sorts ids into the canonical descending order.
  void canonicalize() { std::sort(selected.begin(), selected.end(), std::greater<>()); }
};

enum class ChannelMode { Combinatorial, ByteClick };

struct ChannelConfig {
  std::uint32_t n = 0;      // selectable objects on the map
  std::uint32_t k = 1;      // maximum objects per command
  std::uint32_t x_max = 0;  // rally-region width in cells
  std::uint32_t y_max = 0;  // rally-region height in cells
  ChannelMode mode = ChannelMode::Combinatorial;
  unsigned m_bits = 8;      // bits per click in byte-click mode

  std::uint64_t locations() const noexcept { return std::uint64_t{x_max} * y_max; }

  void validate() const {
    if (k < 1 || n < k) throw ArgumentError("channel config requires n >= k >= 1");
    if (locations() < 2) throw ArgumentError("channel config requires at least two locations");
    if (x_max > 0x10000 || y_max > 0x10000) throw ArgumentError("rally region exceeds 16-bit coordinates");
    if (mode == ChannelMode::ByteClick) {
      if (m_bits < 1 || m_bits > 24) throw ArgumentError("m_bits must be in [1, 24]");
      if (n < (std::uint64_t{1} << m_bits)) throw ArgumentError("byte-click mode requires n >= 2^m_bits");
    }
  }
};

}  // namespace castle
