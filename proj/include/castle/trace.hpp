#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "castle/errors.hpp"

namespace castle {

enum class Direction : std::uint8_t { AtoB, BtoA };

struct PacketRecord {
  double timestamp_ms = 0;
  std::uint32_t size = 0;
  Direction dir = Direction::AtoB;
  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

/// Timestamped packet sizes as seen on the wire.
struct PacketTrace {
  std::string label;
  std::vector<PacketRecord> records;

  double duration_ms() const { return records.empty() ? 0.0 : records.back().timestamp_ms - records.front().timestamp_ms; }

  void validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].size == 0) throw ArgumentError("trace packet with zero size");
      if (i && records[i].timestamp_ms < records[i - 1].timestamp_ms) throw ArgumentError("trace timestamps decrease");
    }
  }
};

// Text form: one "<timestamp_ms> <size> <dir>" line per packet, dir "ab" or "ba".
// Lines starting with '#' are comments; "# label: <text>" sets the label.

inline void write_trace(std::ostream& out, const PacketTrace& t) {
  if (!t.label.empty()) out << "# label: " << t.label << '\n';
  out.precision(3);
  out << std::fixed;
  for (const auto& r : t.records) out << r.timestamp_ms << ' ' << r.size << ' ' << (r.dir == Direction::AtoB ? "ab" : "ba") << '\n';
}

inline PacketTrace read_trace(std::istream& in) {
  PacketTrace t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr std::string_view tag = "# label: ";
      if (line.rfind(tag, 0) == 0) t.label = line.substr(tag.size());
      continue;
    }
    std::istringstream ls(line);
    PacketRecord r;
    std::string dir;
    if (!(ls >> r.timestamp_ms >> r.size >> dir) || (dir != "ab" && dir != "ba"))
      throw ParseError(lineno, "expected '<timestamp_ms> <size> <ab|ba>'");
    r.dir = dir == "ab" ? Direction::AtoB : Direction::BtoA;
    t.records.push_back(r);
  }
  t.validate();
  return t;
}

}  // namespace castle
