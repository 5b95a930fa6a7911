#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "castle/codec/command.hpp"
#include "castle/errors.hpp"

namespace castle {

enum class ObjectKind { Unit, Building };

inline std::string_view to_string(ObjectKind k) { return k == ObjectKind::Unit ? "unit" : "building"; }

struct MapObject {
  std::uint32_t id = 0;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  ObjectKind kind = ObjectKind::Building;
  friend bool operator==(const MapObject&, const MapObject&) = default;
};

struct RallyRegion {
  std::uint32_t origin_x = 0;
  std::uint32_t origin_y = 0;
  std::uint32_t x_max = 0;
  std::uint32_t y_max = 0;

  std::uint64_t area() const noexcept { return std::uint64_t{x_max} * y_max; }
  bool contains(std::uint32_t x, std::uint32_t y) const noexcept {
    return x >= origin_x && y >= origin_y && x - origin_x < x_max && y - origin_y < y_max;
  }
  friend bool operator==(const RallyRegion&, const RallyRegion&) = default;
};

/// A custom map: n immobile objects at known cells plus an empty rally region.
struct MapSpec {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<MapObject> objects;  // objects[i].id == i
  RallyRegion region;

  friend bool operator==(const MapSpec&, const MapSpec&) = default;

  std::uint32_t object_count() const noexcept { return static_cast<std::uint32_t>(objects.size()); }

  const MapObject& object(std::uint32_t id) const {
    if (id >= objects.size()) throw InvalidCommand("unknown object id " + std::to_string(id));
    return objects[id];
  }

  /// Channel parameters implied by the map.
  ChannelConfig channel(std::uint32_t k, ChannelMode mode = ChannelMode::Combinatorial, unsigned m_bits = 8) const {
    ChannelConfig c;
    c.n = object_count();
    c.k = k;
    c.x_max = region.x_max;
    c.y_max = region.y_max;
    c.mode = mode;
    c.m_bits = m_bits;
    return c;
  }

  /// Checks the structural invariants; `line` tags parse errors.
  void validate(std::size_t line = 0) const {
    if (objects.empty()) throw ParseError(line, "map has no objects");
    if (region.x_max == 0 || region.y_max == 0) throw ParseError(line, "empty rally region");
    if (std::uint64_t{region.origin_x} + region.x_max > width || std::uint64_t{region.origin_y} + region.y_max > height)
      throw ParseError(line, "rally region exceeds map bounds");
    std::set<std::pair<std::uint32_t, std::uint32_t>> cells;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& o = objects[i];
      if (o.id != i) throw ParseError(line, "object ids must be exactly 0..n-1");
      if (o.x >= width || o.y >= height) throw ParseError(line, "object " + std::to_string(o.id) + " outside map");
      if (region.contains(o.x, o.y)) throw ParseError(line, "object " + std::to_string(o.id) + " inside rally region");
      if (!cells.emplace(o.x, o.y).second) throw ParseError(line, "two objects share a cell");
    }
  }
};

/// Deterministic layout: the rally region sits at the highest-coordinate
/// corner and objects fill the remaining cells in row-major order.
///
/// region_bits = b gives a 2^ceil(b/2) x 2^floor(b/2) region, i.e. exactly
/// 2^b locations.
inline MapSpec generate_map(std::uint32_t n, std::uint32_t width, std::uint32_t height, unsigned region_bits,
                            ObjectKind kind = ObjectKind::Building) {
  if (n == 0) throw ArgumentError("map needs at least one object");
  if (region_bits < 1 || region_bits > 32) throw ArgumentError("region_bits must be in [1, 32]");
  const std::uint64_t rx = std::uint64_t{1} << ((region_bits + 1) / 2);
  const std::uint64_t ry = std::uint64_t{1} << (region_bits / 2);
  if (rx > width || ry > height) throw CapacityError("rally region does not fit on the map");
  MapSpec spec;
  spec.width = width;
  spec.height = height;
  spec.region = {static_cast<std::uint32_t>(width - rx), static_cast<std::uint32_t>(height - ry),
                 static_cast<std::uint32_t>(rx), static_cast<std::uint32_t>(ry)};
  const std::uint64_t free_cells = std::uint64_t{width} * height - spec.region.area();
  if (n > free_cells)
    throw CapacityError("map has room for " + std::to_string(free_cells) + " objects, " + std::to_string(n) + " requested");
  spec.objects.reserve(n);
  for (std::uint32_t y = 0; y < height && spec.objects.size() < n; ++y)
    for (std::uint32_t x = 0; x < width && spec.objects.size() < n; ++x)
      if (!spec.region.contains(x, y))
        spec.objects.push_back({static_cast<std::uint32_t>(spec.objects.size()), x, y, kind});
  return spec;
}

inline std::string serialize_map(const MapSpec& spec) {
  std::ostringstream out;
  out << "castlemap v1 " << spec.width << ' ' << spec.height << '\n';
  for (const auto& o : spec.objects) out << "obj " << o.id << ' ' << o.x << ' ' << o.y << ' ' << to_string(o.kind) << '\n';
  out << "region " << spec.region.origin_x << ' ' << spec.region.origin_y << ' ' << spec.region.x_max << ' '
      << spec.region.y_max << '\n';
  return out.str();
}

namespace detail {

inline std::uint32_t parse_u32(std::istringstream& in, std::size_t line, const char* field) {
  std::string tok;
  if (!(in >> tok)) throw ParseError(line, std::string("missing ") + field);
  std::uint64_t v = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') throw ParseError(line, std::string("bad ") + field + " '" + tok + "'");
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
    if (v > 0xFFFFFFFFull) throw ParseError(line, std::string(field) + " overflows 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

inline void expect_end(std::istringstream& in, std::size_t line) {
  std::string extra;
  if (in >> extra) throw ParseError(line, "trailing token '" + extra + "'");
}

}  // namespace detail

inline MapSpec parse_map(std::string_view text) {
  MapSpec spec;
  std::istringstream all{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  bool header = false, region = false;
  std::set<std::uint32_t> ids;
  std::vector<MapObject> objs;
  while (std::getline(all, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    std::istringstream in(raw);
    std::string tag;
    in >> tag;
    if (!header) {
      std::string version;
      if (tag != "castlemap" || !(in >> version) || version != "v1") throw ParseError(line, "expected 'castlemap v1' header");
      spec.width = detail::parse_u32(in, line, "width");
      spec.height = detail::parse_u32(in, line, "height");
      detail::expect_end(in, line);
      header = true;
    } else if (tag == "obj") {
      MapObject o;
      o.id = detail::parse_u32(in, line, "id");
      o.x = detail::parse_u32(in, line, "x");
      o.y = detail::parse_u32(in, line, "y");
      std::string kind;
      if (!(in >> kind)) throw ParseError(line, "missing kind");
      if (kind == "unit")
        o.kind = ObjectKind::Unit;
      else if (kind == "building")
        o.kind = ObjectKind::Building;
      else
        throw ParseError(line, "unknown object kind '" + kind + "'");
      detail::expect_end(in, line);
      if (!ids.insert(o.id).second) throw ParseError(line, "duplicate object id " + std::to_string(o.id));
      objs.push_back(o);
    } else if (tag == "region") {
      if (region) throw ParseError(line, "duplicate region line");
      spec.region.origin_x = detail::parse_u32(in, line, "origin_x");
      spec.region.origin_y = detail::parse_u32(in, line, "origin_y");
      spec.region.x_max = detail::parse_u32(in, line, "x_max");
      spec.region.y_max = detail::parse_u32(in, line, "y_max");
      detail::expect_end(in, line);
      region = true;
    } else {
      throw ParseError(line, "unknown record '" + tag + "'");
    }
  }
  if (!header) throw ParseError(line, "missing header");
  if (!region) throw ParseError(line, "missing region line");
  spec.objects.resize(objs.size());
  for (const auto& o : objs) {
    if (o.id >= objs.size()) throw ParseError(line, "object ids must be exactly 0..n-1");
    spec.objects[o.id] = o;
  }
  spec.validate(line);
  return spec;
}

}  // namespace castle
