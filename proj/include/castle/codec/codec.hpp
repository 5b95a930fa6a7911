#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "castle/codec/bits.hpp"
#include "castle/codec/combinadic.hpp"
#include "castle/codec/command.hpp"
#include "castle/errors.hpp"

namespace castle {

inline Coord encode_location(std::uint64_t z2, const ChannelConfig& cfg) {
  if (z2 >= cfg.locations()) throw RangeError("location index out of range");
  return {static_cast<std::uint32_t>(z2 % cfg.x_max), static_cast<std::uint32_t>(z2 / cfg.x_max)};
}

inline std::uint64_t decode_location(Coord xy, const ChannelConfig& cfg) {
  if (xy.x >= cfg.x_max || xy.y >= cfg.y_max) throw InvalidCommand("target outside rally region");
  return std::uint64_t{xy.y} * cfg.x_max + xy.x;
}

inline GameCommand encode_byte_click(std::uint32_t value, const ChannelConfig& cfg) {
  if (cfg.mode != ChannelMode::ByteClick) throw ArgumentError("encode_byte_click requires byte-click mode");
  if (value >= (1u << cfg.m_bits)) throw RangeError("value does not fit in m_bits");
  return GameCommand{Opcode::Move, {value}, {0, 0}};
}

inline std::uint32_t decode_byte_click(const GameCommand& cmd, const ChannelConfig& cfg) {
  if (cmd.selected.size() != 1) throw InvalidCommand("byte-click command must select exactly one unit");
  if (cmd.selected[0] >= (1u << cfg.m_bits)) throw InvalidCommand("byte-click unit id out of range");
  return cmd.selected[0];
}

/// Per-configuration encoder/decoder with cached field widths.
///
/// Combinatorial mode: each command draws r uniformly from 1..k, carries
/// floor(log2 C(n, r)) bits in the selection and floor(log2 m) bits in the
/// target cell. Byte-click mode: each command selects one unit whose id is the
/// next m_bits of the stream.
class CommandCodec {
 public:
  explicit CommandCodec(ChannelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    location_bits_ = floor_log2(BigUint(cfg_.locations()));
    if (cfg_.mode == ChannelMode::Combinatorial) {
      totals_.resize(cfg_.k + 1);
      widths_.resize(cfg_.k + 1);
      BigUint c = 1;  // C(n, 0)
      for (std::uint32_t r = 1; r <= cfg_.k; ++r) {
        c *= cfg_.n - r + 1;
        c /= r;
        totals_[r] = c;
        widths_[r] = floor_log2(c);
      }
    }
  }

  const ChannelConfig& config() const noexcept { return cfg_; }
  std::size_t location_bits() const noexcept { return location_bits_; }

  /// Selection payload width for a command selecting r objects.
  std::size_t selection_bits(std::uint32_t r) const {
    if (r < 1 || r > cfg_.k) throw RangeError("selection size out of range");
    return widths_[r];
  }

  /// Payload bits carried by a command of the given selection size.
  std::size_t payload_bits(std::uint32_t r) const {
    if (cfg_.mode == ChannelMode::ByteClick) return cfg_.m_bits;
    return selection_bits(r) + location_bits_;
  }

  /// Encodes with an explicit selection size.
  GameCommand encode_with_size(BitStream& stream, std::uint32_t r, Opcode op = Opcode::Move) const {
    if (cfg_.mode == ChannelMode::ByteClick)
      return encode_byte_click(static_cast<std::uint32_t>(stream.read_uint(cfg_.m_bits)), cfg_);
    const BigUint z1 = stream.read(selection_bits(r));
    GameCommand cmd;
    cmd.opcode = op;
    cmd.selected = unrank_selection(z1, cfg_.n, r);
    const BigUint z2 = stream.read(location_bits_);
    cmd.target = encode_location(z2.convert_to<std::uint64_t>(), cfg_);
    return cmd;
  }

  template <class Rng>
  GameCommand encode(BitStream& stream, Rng& rng, Opcode op = Opcode::Move) const {
    if (cfg_.mode == ChannelMode::ByteClick) return encode_with_size(stream, 1, op);
    std::uniform_int_distribution<std::uint32_t> pick(1, cfg_.k);
    return encode_with_size(stream, pick(rng), op);
  }

  /// Exact bits carried by a command; fixed widths so a stream of commands
  /// concatenates back into the source bit stream.
  Bits decode(const GameCommand& cmd) const {
    Bits out;
    if (cfg_.mode == ChannelMode::ByteClick) {
      out.append_uint(decode_byte_click(cmd, cfg_), cfg_.m_bits);
      return out;
    }
    const std::size_t r = cmd.selected.size();
    if (r < 1 || r > cfg_.k) throw InvalidCommand("selection size outside 1..k");
    GameCommand canon = cmd;
    canon.canonicalize();
    const BigUint z1 = rank_selection(canon.selected, cfg_.n);
    const std::size_t w1 = widths_[r];
    if (z1 >> w1 != 0) throw DecodeError("selection rank exceeds the encoded field width");
    const std::uint64_t z2 = decode_location(cmd.target, cfg_);
    if ((z2 >> location_bits_) != 0) throw DecodeError("location index exceeds the encoded field width");
    out.append(z1, w1);
    out.append_uint(z2, static_cast<unsigned>(location_bits_));
    return out;
  }

  /// Checks a command against the configuration without decoding it.
  void validate(const GameCommand& cmd) const {
    if (cmd.selected.empty() || cmd.selected.size() > cfg_.k) throw InvalidCommand("selection size outside 1..k");
    for (auto id : cmd.selected)
      if (id >= cfg_.n) throw InvalidCommand("selected id out of range");
    decode_location(cmd.target, cfg_);
  }

 private:
  ChannelConfig cfg_;
  std::size_t location_bits_ = 0;
  std::vector<BigUint> totals_;
  std::vector<std::size_t> widths_;
};

/// Split of the average payload per command into its two fields, in bits.
struct RateTerms {
  double selection_bits = 0;
  double location_bits = 0;
  double total_bits() const noexcept { return selection_bits + location_bits; }
  double total_bytes() const noexcept { return total_bits() / 8.0; }
  double selection_bytes() const noexcept { return selection_bits / 8.0; }
};

/// Average bits per command from the closed-form rate:
/// (sum_{i=1..k} log2 C(n, i)) / k + log2 m.
inline RateTerms avg_bits_per_command(const ChannelConfig& cfg) {
  cfg.validate();
  if (cfg.mode != ChannelMode::Combinatorial) throw ArgumentError("rate formula applies to combinatorial mode");
  RateTerms t;
  BigUint c = 1;
  double sum = 0;
  for (std::uint32_t i = 1; i <= cfg.k; ++i) {
    c *= cfg.n - i + 1;
    c /= i;
    sum += log2_real(c);
  }
  t.selection_bits = sum / cfg.k;
  t.location_bits = std::log2(static_cast<double>(cfg.locations()));
  return t;
}

/// The average this implementation achieves with floor-width fields.
inline RateTerms avg_bits_per_command_floor(const ChannelConfig& cfg) {
  cfg.validate();
  if (cfg.mode != ChannelMode::Combinatorial) {
    return RateTerms{static_cast<double>(cfg.m_bits), 0.0};
  }
  RateTerms t;
  BigUint c = 1;
  double sum = 0;
  for (std::uint32_t i = 1; i <= cfg.k; ++i) {
    c *= cfg.n - i + 1;
    c /= i;
    sum += static_cast<double>(floor_log2(c));
  }
  t.selection_bits = sum / cfg.k;
  t.location_bits = static_cast<double>(floor_log2(BigUint(cfg.locations())));
  return t;
}

}  // namespace castle
