#pragma once

#include <sodium.h>

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "castle/errors.hpp"
#include "castle/net/wire.hpp"

namespace castle::net {

inline void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw Error("libsodium initialisation failed");
}

using SessionKey = std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_KEYBYTES>;

/// Argon2id cost. Minimal exists so tests and large simulations that derive
/// hundreds of keys stay fast; real sessions use Interactive.
enum class KdfStrength { Minimal, Interactive };

inline SessionKey derive_session_key(std::string_view password, std::uint64_t session_id,
                                     KdfStrength strength = KdfStrength::Interactive) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_pwhash_SALTBYTES> salt{};
  std::array<std::uint8_t, 8 + 12> salt_input{};
  for (int i = 0; i < 8; ++i) salt_input[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(session_id >> (8 * i));
  constexpr std::string_view tag = "castle-salt";
  std::copy(tag.begin(), tag.end(), salt_input.begin() + 8);
  crypto_generichash(salt.data(), salt.size(), salt_input.data(), salt_input.size(), nullptr, 0);

  const auto ops = strength == KdfStrength::Minimal ? crypto_pwhash_OPSLIMIT_MIN : crypto_pwhash_OPSLIMIT_INTERACTIVE;
  const auto mem = strength == KdfStrength::Minimal ? crypto_pwhash_MEMLIMIT_MIN : crypto_pwhash_MEMLIMIT_INTERACTIVE;
  SessionKey key{};
  if (crypto_pwhash(key.data(), key.size(), password.data(), password.size(), salt.data(), ops, mem,
                    crypto_pwhash_ALG_ARGON2ID13) != 0)
    throw Error("key derivation ran out of memory");
  return key;
}

/// Constant-time password comparison; both sides are hashed first so the
/// comparison does not depend on their lengths.
inline bool password_matches(std::string_view expected, std::string_view attempt) {
  ensure_sodium();
  std::array<std::uint8_t, 32> a{}, b{};
  crypto_generichash(a.data(), a.size(), reinterpret_cast<const unsigned char*>(expected.data()), expected.size(),
                     nullptr, 0);
  crypto_generichash(b.data(), b.size(), reinterpret_cast<const unsigned char*>(attempt.data()), attempt.size(),
                     nullptr, 0);
  return sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

/// Nonce = sender id | 3 zero bytes | 64-bit transmission counter (LE).
inline Nonce make_nonce(std::uint8_t sender, std::uint64_t counter) {
  Nonce n{};
  n[0] = sender;
  for (int i = 0; i < 8; ++i) n[4 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(counter >> (8 * i));
  return n;
}

inline std::uint64_t nonce_counter(const Nonce& n) { return le::get_u64(n.data() + 4); }

/// Associated data: session id, recipient, and every header byte except the
/// nonce (which enters the cipher directly).
inline std::vector<std::uint8_t> associated_data(std::uint64_t session_id, std::uint8_t recipient,
                                                 std::span<const std::uint8_t> header) {
  std::vector<std::uint8_t> ad;
  ad.reserve(9 + kHeaderBytes - kNonceBytes);
  le::put_u64(ad, session_id);
  ad.push_back(recipient);
  ad.insert(ad.end(), header.begin(), header.begin() + kNonceOffset);
  ad.insert(ad.end(), header.begin() + kNonceOffset + kNonceBytes, header.begin() + kHeaderBytes);
  return ad;
}

inline constexpr std::size_t kTagBytes = crypto_aead_chacha20poly1305_ietf_ABYTES;
inline constexpr std::size_t kMaxPlaintext = 0xFFFF - kTagBytes;

/// Builds a complete datagram: header followed by the sealed batch.
inline std::vector<std::uint8_t> seal_packet(const SessionKey& key, std::uint64_t session_id, std::uint8_t recipient,
                                             PacketHeader h, std::span<const std::uint8_t> plaintext) {
  ensure_sodium();
  if (plaintext.size() > kMaxPlaintext) throw InvalidCommand("batch too large for one datagram");
  h.ciphertext_len = static_cast<std::uint16_t>(plaintext.size() + kTagBytes);
  auto out = encode_header(h);
  const auto ad = associated_data(session_id, recipient, out);
  out.resize(kHeaderBytes + h.ciphertext_len);
  unsigned long long clen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data() + kHeaderBytes, &clen, plaintext.data(), plaintext.size(),
                                            ad.data(), ad.size(), nullptr, h.nonce.data(), key.data());
  return out;
}

struct OpenedPacket {
  PacketHeader header;
  std::vector<std::uint8_t> plaintext;
};

/// Verifies and decrypts; nullopt on any malformed or unauthenticated input.
inline std::optional<OpenedPacket> open_packet(const SessionKey& key, std::uint64_t session_id, std::uint8_t recipient,
                                               std::span<const std::uint8_t> datagram) {
  ensure_sodium();
  auto h = decode_header(datagram);
  if (!h || h->ciphertext_len < kTagBytes) return std::nullopt;
  const auto ad = associated_data(session_id, recipient, datagram.first(kHeaderBytes));
  OpenedPacket p{*h, std::vector<std::uint8_t>(h->ciphertext_len - kTagBytes)};
  unsigned long long mlen = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(p.plaintext.data(), &mlen, nullptr, datagram.data() + kHeaderBytes,
                                                h->ciphertext_len, ad.data(), ad.size(), h->nonce.data(),
                                                key.data()) != 0)
    return std::nullopt;
  return p;
}

/// Sliding-window anti-replay filter over nonce counters.
class ReplayWindow {
 public:
  static constexpr std::size_t kWidth = 1024;

  /// True (and records it) if the counter has not been accepted before.
  bool accept(std::uint64_t counter) {
    if (!any_) {
      any_ = true;
      highest_ = counter;
      seen_.reset();
      seen_.set(0);
      return true;
    }
    if (counter > highest_) {
      const std::uint64_t shift = counter - highest_;
      if (shift >= kWidth)
        seen_.reset();
      else
        seen_ <<= static_cast<std::size_t>(shift);
      seen_.set(0);
      highest_ = counter;
      return true;
    }
    const std::uint64_t back = highest_ - counter;
    if (back >= kWidth || seen_.test(static_cast<std::size_t>(back))) return false;
    seen_.set(static_cast<std::size_t>(back));
    return true;
  }

 private:
  bool any_ = false;
  std::uint64_t highest_ = 0;
  std::bitset<kWidth> seen_;
};

}  // namespace castle::net
