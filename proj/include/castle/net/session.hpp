#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "castle/errors.hpp"
#include "castle/net/crypto.hpp"
#include "castle/net/endpoint.hpp"
#include "castle/net/event_loop.hpp"
#include "castle/replay.hpp"
#include "castle/trace.hpp"

namespace castle::net {

struct LossModel {
  double drop_prob = 0;
  double delay_ms = 5;         // one-way base latency
  double delay_jitter_ms = 5;  // uniform extra latency in [0, jitter]
  double reorder_prob = 0;     // packet held back 1..3 ticks
  double duplicate_prob = 0;

  void validate() const {
    for (double p : {drop_prob, reorder_prob, duplicate_prob})
      if (p < 0 || p > 1) throw ArgumentError("loss probabilities must lie in [0, 1]");
    if (delay_ms < 0 || delay_jitter_ms < 0) throw ArgumentError("delays must be non-negative");
  }
};

enum class Transport { InProcess, DatagramLoopback };
enum class Admission { Strict, Decoy };

struct SessionConfig {
  std::uint64_t session_id = 1;
  double tick_ms = 100;
  std::uint8_t players = 2;
  Transport transport = Transport::InProcess;
  std::optional<std::string> password;
  Admission admission = Admission::Strict;
  LossModel loss;
  double dead_interval_ms = 10'000;
  std::size_t max_batch_bytes = 16 * 1024;
  KdfStrength kdf = KdfStrength::Interactive;
  std::uint16_t port = kDefaultPort;

  void validate() const {
    if (!(tick_ms > 0)) throw ArgumentError("tick_ms must be positive");
    if (players < 2 || players > 8) throw ArgumentError("sessions hold 2..8 players");
    if (dead_interval_ms <= tick_ms) throw ArgumentError("dead interval must exceed one tick");
    loss.validate();
  }

  EndpointConfig endpoint(std::uint8_t self) const {
    EndpointConfig e;
    e.session_id = session_id;
    e.self = self;
    e.players = players;
    e.tick = from_ms(tick_ms);
    e.dead_interval = from_ms(dead_interval_ms);
    e.max_batch_bytes = max_batch_bytes;
    return e;
  }
};

/// Outcome of joining a hosted game.
struct JoinTicket {
  std::uint8_t player = 0;
  bool verified = false;  // knew the password; eligible for covert service
  SessionKey key{};
};

/// Admission control for a hosted game.
///
/// A matching password yields a verified ticket whose key derives from the
/// password. A wrong password is refused in strict mode; in decoy mode the
/// peer is admitted unverified, with the link keyed from the secret it
/// presented, and the host plays scripted moves to it only.
class SessionHost {
 public:
  explicit SessionHost(SessionConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    host_key_ = derive_session_key(cfg_.password.value_or(""), cfg_.session_id, cfg_.kdf);
  }

  const SessionConfig& config() const noexcept { return cfg_; }

  JoinTicket host_ticket() const { return {0, true, host_key_}; }

  JoinTicket join(std::string_view /*identity*/, std::string_view attempt) {
    if (next_player_ >= cfg_.players) throw JoinRejected("session is full");
    const bool ok = !cfg_.password || password_matches(*cfg_.password, attempt);
    if (!ok && cfg_.admission == Admission::Strict) throw JoinRejected("wrong password");
    JoinTicket t;
    t.player = next_player_++;
    t.verified = ok;
    t.key = ok ? host_key_ : derive_session_key(attempt, cfg_.session_id, cfg_.kdf);
    return t;
  }

 private:
  SessionConfig cfg_;
  SessionKey host_key_{};
  std::uint8_t next_player_ = 1;
};

/// All players of one session running in-process on a virtual clock, joined
/// by a lossy datagram channel. Each player's committed turns go to its own
/// replay log under `log_dir`.
class LockstepSession {
 public:
  using Tamper = std::function<void(std::uint8_t from, std::uint8_t to, std::vector<std::uint8_t>& bytes)>;

  LockstepSession(SessionConfig cfg, const SessionKey& key, std::uint64_t seed, std::filesystem::path log_dir)
      : cfg_(std::move(cfg)), rng_(seed), log_dir_(std::move(log_dir)) {
    cfg_.validate();
    std::filesystem::create_directories(log_dir_);
    trace_.label = "session " + std::to_string(cfg_.session_id);
    for (std::uint8_t p = 0; p < cfg_.players; ++p) {
      auto ep = std::make_unique<LockstepEndpoint>(cfg_.endpoint(p), key);
      auto path = log_dir_ / ("player" + std::to_string(p) + ".creplay");
      auto writer = std::make_shared<ReplayWriter>(path);
      ep->set_record_sink([writer](const ReplayRecord& r) { writer->append(r); });
      endpoints_.push_back(std::move(ep));
      log_paths_.push_back(std::move(path));
      writers_.push_back(std::move(writer));
    }
  }

  const SessionConfig& config() const noexcept { return cfg_; }
  EventLoop& loop() noexcept { return loop_; }
  LockstepEndpoint& endpoint(std::uint8_t p) { return *endpoints_.at(p); }
  const std::filesystem::path& log_path(std::uint8_t p) const { return log_paths_.at(p); }
  const PacketTrace& trace() const noexcept { return trace_; }

  void set_tamper(Tamper t) { tamper_ = std::move(t); }
  void set_partitioned(bool on) { partitioned_ = on; }
  void capture_payloads(bool on) { capture_ = on; }
  const std::vector<std::vector<std::uint8_t>>& captured() const noexcept { return captured_; }

  /// Delivers raw bytes to a player as if they arrived from the network.
  void inject(SimTime at, std::uint8_t to, std::vector<std::uint8_t> bytes) {
    loop_.schedule(at, [this, to, b = std::move(bytes)] { deliver(to, b); });
  }

  /// Schedules every player's tick train starting at the current time.
  void start() {
    for (std::uint8_t p = 0; p < cfg_.players; ++p) schedule_tick(p, loop_.now());
  }

  bool any_lost() const {
    for (const auto& e : endpoints_)
      if (e->lost()) return true;
    return false;
  }

 private:
  void schedule_tick(std::uint8_t p, SimTime at) {
    loop_.schedule(at, [this, p] {
      auto& ep = *endpoints_[p];
      if (ep.lost() || ep.closed()) return;
      ep.on_tick(loop_.now());
      flush(p);
      schedule_tick(p, loop_.now() + from_ms(cfg_.tick_ms));
    });
  }

  void flush(std::uint8_t from) {
    for (auto& d : endpoints_[from]->take_outbox()) send(from, d.to, std::move(d.bytes));
  }

  void send(std::uint8_t from, std::uint8_t to, std::vector<std::uint8_t> bytes) {
    const SimTime now = loop_.now();
    trace_.records.push_back({to_ms(now), static_cast<std::uint32_t>(bytes.size()), from < to ? Direction::AtoB : Direction::BtoA});
    if (capture_) captured_.push_back(bytes);
    if (partitioned_) return;
    if (tamper_) tamper_(from, to, bytes);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& loss = cfg_.loss;
    if (u(rng_) < loss.drop_prob) return;
    double delay = loss.delay_ms + u(rng_) * loss.delay_jitter_ms;
    if (u(rng_) < loss.reorder_prob) delay += cfg_.tick_ms * (1.0 + 2.0 * u(rng_));
    if (u(rng_) < loss.duplicate_prob)
      loop_.schedule(now + from_ms(delay + u(rng_) * cfg_.tick_ms), [this, to, b = bytes] { deliver(to, b); });
    loop_.schedule(now + from_ms(delay), [this, to, b = std::move(bytes)] { deliver(to, b); });
  }

  void deliver(std::uint8_t to, const std::vector<std::uint8_t>& bytes) {
    auto& ep = *endpoints_[to];
    ep.on_datagram(loop_.now(), bytes);
    flush(to);
  }

  SessionConfig cfg_;
  EventLoop loop_;
  std::mt19937_64 rng_;
  std::filesystem::path log_dir_;
  std::vector<std::unique_ptr<LockstepEndpoint>> endpoints_;
  std::vector<std::filesystem::path> log_paths_;
  std::vector<std::shared_ptr<ReplayWriter>> writers_;
  PacketTrace trace_;
  Tamper tamper_;
  bool partitioned_ = false;
  bool capture_ = false;
  std::vector<std::vector<std::uint8_t>> captured_;
};

}  // namespace castle::net
