#pragma once

// Datagram layout (little-endian):
//
//   magic 0xCA57 (2) | version (1) | sender (1) | seq (8) | ack (8) |
//   tick (4) | nonce (12) | ciphertext length (2) | ciphertext
//
// The ciphertext is an AEAD-sealed command batch including its 16-byte tag.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "castle/codec/command.hpp"
#include "castle/errors.hpp"
#include "castle/wire_le.hpp"

namespace castle::net {

inline constexpr std::uint16_t kMagic = 0xCA57;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kHeaderBytes = 38;
inline constexpr std::size_t kNonceOffset = 24;
inline constexpr std::uint16_t kDefaultPort = 35701;

using Nonce = std::array<std::uint8_t, kNonceBytes>;

struct PacketHeader {
  std::uint8_t sender = 0;
  std::uint64_t seq = 0;
  std::uint64_t ack = 0;  // next seq expected from the recipient
  std::uint32_t tick = 0;
  Nonce nonce{};
  std::uint16_t ciphertext_len = 0;
};

inline std::vector<std::uint8_t> encode_header(const PacketHeader& h) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + h.ciphertext_len);
  le::put_u16(out, kMagic);
  out.push_back(kVersion);
  out.push_back(h.sender);
  le::put_u64(out, h.seq);
  le::put_u64(out, h.ack);
  le::put_u32(out, h.tick);
  out.insert(out.end(), h.nonce.begin(), h.nonce.end());
  le::put_u16(out, h.ciphertext_len);
  return out;
}

/// Parses and checks the fixed header; nullopt for anything malformed.
inline std::optional<PacketHeader> decode_header(std::span<const std::uint8_t> d) {
  if (d.size() < kHeaderBytes) return std::nullopt;
  if (le::get_u16(d.data()) != kMagic || d[2] != kVersion) return std::nullopt;
  PacketHeader h;
  h.sender = d[3];
  h.seq = le::get_u64(d.data() + 4);
  h.ack = le::get_u64(d.data() + 12);
  h.tick = le::get_u32(d.data() + 20);
  std::copy_n(d.data() + kNonceOffset, kNonceBytes, h.nonce.begin());
  h.ciphertext_len = le::get_u16(d.data() + 36);
  if (d.size() != kHeaderBytes + h.ciphertext_len) return std::nullopt;
  return h;
}

/// Wire form of a GameCommand inside a batch: opcode (1) | count (2) |
/// ids (4 each) | x (2) | y (2). Coordinates are absolute map cells.
inline std::size_t command_wire_size(const GameCommand& c) { return 7 + 4 * c.selected.size(); }

inline void put_command(std::vector<std::uint8_t>& out, const GameCommand& c) {
  if (c.selected.empty() || c.selected.size() > 0xFFFF) throw InvalidCommand("command selection size not encodable");
  if (c.target.x > 0xFFFF || c.target.y > 0xFFFF) throw InvalidCommand("target exceeds 16-bit coordinates");
  out.push_back(static_cast<std::uint8_t>(c.opcode));
  le::put_u16(out, static_cast<std::uint16_t>(c.selected.size()));
  for (auto id : c.selected) le::put_u32(out, id);
  le::put_u16(out, static_cast<std::uint16_t>(c.target.x));
  le::put_u16(out, static_cast<std::uint16_t>(c.target.y));
}

/// Batch plaintext: count (2) followed by that many commands.
inline std::vector<std::uint8_t> encode_batch(std::span<const GameCommand> cmds) {
  std::vector<std::uint8_t> out;
  le::put_u16(out, static_cast<std::uint16_t>(cmds.size()));
  for (const auto& c : cmds) put_command(out, c);
  return out;
}

inline std::optional<std::vector<GameCommand>> decode_batch(std::span<const std::uint8_t> d) {
  if (d.size() < 2) return std::nullopt;
  const std::size_t count = le::get_u16(d.data());
  std::size_t pos = 2;
  std::vector<GameCommand> cmds;
  cmds.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (d.size() < pos + 3) return std::nullopt;
    if (!valid_opcode(d[pos])) return std::nullopt;
    GameCommand c;
    c.opcode = static_cast<Opcode>(d[pos]);
    const std::size_t n = le::get_u16(d.data() + pos + 1);
    if (n == 0 || d.size() < pos + 7 + 4 * n) return std::nullopt;
    pos += 3;
    c.selected.resize(n);
    for (auto& id : c.selected) {
      id = le::get_u32(d.data() + pos);
      pos += 4;
    }
    c.target = {le::get_u16(d.data() + pos), le::get_u16(d.data() + pos + 2)};
    pos += 4;
    cmds.push_back(std::move(c));
  }
  if (pos != d.size()) return std::nullopt;
  return cmds;
}

}  // namespace castle::net
