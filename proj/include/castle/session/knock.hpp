#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "castle/codec/codec.hpp"
#include "castle/net/crypto.hpp"

namespace castle::session {

inline constexpr std::size_t kKnockBytes = 16;

/// 128 knock bits derived from the shared password.
inline Bits knock_bits(std::string_view password) {
  net::ensure_sodium();
  constexpr std::string_view tag = "castle-knock";
  std::vector<std::uint8_t> in(password.begin(), password.end());
  in.insert(in.end(), tag.begin(), tag.end());
  std::array<std::uint8_t, kKnockBytes> out{};
  crypto_generichash(out.data(), out.size(), in.data(), in.size(), nullptr, 0);
  return Bits::from_bytes(out);
}

/// Opening moves carrying the knock; the last one is zero-padded.
template <class Rng>
std::vector<GameCommand> knock_commands(const Bits& knock, const CommandCodec& codec, Rng& rng) {
  BitStream s(knock.bytes());
  std::vector<GameCommand> out;
  while (!s.exhausted()) out.push_back(codec.encode(s, rng));
  return out;
}

enum class KnockState { Pending, Verified, Rejected };

/// Checks that the first commands from a peer spell out the knock.
class KnockVerifier {
 public:
  KnockVerifier(Bits expected, std::uint32_t timeout_ticks) : expected_(std::move(expected)), timeout_(timeout_ticks) {}

  KnockState state() const noexcept { return state_; }

  /// Feeds the decoded bits of the next command from the peer.
  KnockState feed(const Bits& command_bits) {
    if (state_ != KnockState::Pending) return state_;
    got_.append(command_bits);
    if (got_.size() < expected_.size()) return state_;
    bool match = got_.all_zero_from(expected_.size());
    for (std::size_t i = 0; match && i < expected_.size(); ++i) match = got_[i] == expected_[i];
    state_ = match ? KnockState::Verified : KnockState::Rejected;
    return state_;
  }

  /// A command that does not decode under the channel cannot be part of a knock.
  KnockState feed_invalid() {
    if (state_ == KnockState::Pending) state_ = KnockState::Rejected;
    return state_;
  }

  KnockState on_tick() {
    if (state_ == KnockState::Pending && ++ticks_ > timeout_) state_ = KnockState::Rejected;
    return state_;
  }

 private:
  Bits expected_;
  Bits got_;
  std::uint32_t timeout_;
  std::uint32_t ticks_ = 0;
  KnockState state_ = KnockState::Pending;
};

}  // namespace castle::session
