#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>

#include "castle/automation.hpp"
#include "castle/codec/codec.hpp"
#include "castle/mapgen.hpp"
#include "castle/net/decoy.hpp"
#include "castle/net/endpoint.hpp"
#include "castle/net/event_loop.hpp"
#include "castle/replay.hpp"
#include "castle/session/frame.hpp"
#include "castle/session/knock.hpp"

namespace castle::session {

struct AgentConfig {
  ChannelConfig channel;
  TimingProfile profile;
  std::uint64_t seed = 1;
  std::uint8_t peer = 1;
  bool peer_verified = true;           // false: the peer failed admission
  std::optional<Bits> send_knock;      // opening moves we play
  std::optional<Bits> expect_knock;    // opening moves we demand
  std::uint32_t knock_timeout_ticks = 600;
};

enum class AgentMode { Covert, AwaitingKnock, Decoy };

struct AgentStats {
  std::uint64_t commands_sent = 0;
  std::uint64_t knock_commands = 0;
  std::uint64_t decoy_commands = 0;
  std::uint64_t records_seen = 0;
  std::uint64_t undecodable = 0;
  std::uint64_t bits_received = 0;
};

struct Received {
  Message msg;
  SimTime at;
};

/// One player's covert endpoint inside a running game.
///
/// Send path: queued messages become frames, frames become a bit stream,
/// bits become commands, commands become timed clicks, and the finished
/// command is handed to the game at the time the last click lands.
/// Receive path: on every committed turn the player's replay log is tailed
/// for the peer's records, which are decoded back to bits and reassembled.
class CovertAgent {
 public:
  using MessageHandler = std::function<void(const Received&)>;

  CovertAgent(const MapSpec& map, AgentConfig cfg, net::EventLoop& loop, net::LockstepEndpoint& endpoint,
              const std::filesystem::path& replay_log)
      : map_(&map),
        cfg_(std::move(cfg)),
        codec_(cfg_.channel),
        scheduler_(map, cfg_.profile, cfg_.channel.mode, cfg_.seed),
        rng_(cfg_.seed ^ 0x9E3779B97F4A7C15ull),
        decoy_(map, cfg_.channel.mode == ChannelMode::ByteClick ? 1 : cfg_.channel.k, cfg_.seed + 1),
        loop_(&loop),
        ep_(&endpoint),
        tailer_(replay_log, 0, PlayerFilter::only(cfg_.peer)) {
    if (cfg_.channel.mode == ChannelMode::Combinatorial)
      for (std::uint32_t r = 1; r <= cfg_.channel.k; ++r) max_payload_bits_ = std::max(max_payload_bits_, codec_.payload_bits(r));
    else
      max_payload_bits_ = cfg_.channel.m_bits;
    if (cfg_.send_knock) knock_out_ = BitStream(cfg_.send_knock->bytes());
    if (cfg_.expect_knock) verifier_.emplace(*cfg_.expect_knock, cfg_.knock_timeout_ticks);
    ep_->set_commit_hook([this](std::uint32_t) { on_commit(); });
    if (!cfg_.peer_verified)
      enter_decoy();
    else
      mode_ = verifier_ ? AgentMode::AwaitingKnock : AgentMode::Covert;
    loop_->schedule(loop_->now(), [this] { pump(); });
  }

  CovertAgent(const CovertAgent&) = delete;
  CovertAgent& operator=(const CovertAgent&) = delete;

  AgentMode mode() const noexcept { return mode_; }
  const AgentStats& stats() const noexcept { return stats_; }
  const FrameAssembler& assembler() const noexcept { return assembler_; }
  const CommandCodec& codec() const noexcept { return codec_; }

  /// Queues a message; frames leave as soon as the peer is cleared for them.
  void send_message(std::uint16_t stream_id, std::span<const std::uint8_t> bytes, FrameType type = FrameType::Data) {
    if (ep_->lost()) throw SessionLost("session lost");
    writer_.enqueue(stream_id, type, bytes);
    pump();
  }

  std::optional<Received> recv() {
    if (inbox_.empty()) return std::nullopt;
    Received r = std::move(inbox_.front());
    inbox_.pop_front();
    return r;
  }

  std::optional<Message> recv_message() {
    auto r = recv();
    if (!r) return std::nullopt;
    return std::move(r->msg);
  }

  bool has_message() const noexcept { return !inbox_.empty(); }

  /// Routes completed messages to a handler instead of the inbox.
  void on_message(MessageHandler h) { handler_ = std::move(h); }

  /// True when nothing is queued or in flight on the send side.
  bool send_idle() const noexcept {
    return !busy_ && writer_.empty() && frame_out_.exhausted() && knock_out_.exhausted();
  }

 private:
  void pump() {
    if (busy_ || mode_ == AgentMode::Decoy || ep_->lost() || ep_->closed()) return;
    BitStream* source = nullptr;
    bool knock = false;
    if (!knock_out_.exhausted()) {
      source = &knock_out_;
      knock = true;
    } else if (mode_ == AgentMode::Covert) {
      while (frame_out_.remaining() < max_payload_bits_) {
        auto f = writer_.next_frame();
        if (!f) break;
        frame_out_.append(*f);
      }
      if (!frame_out_.exhausted()) source = &frame_out_;
    }
    if (!source) return;

    const SimTime now = loop_->now();
    if (next_start_ > now) {
      if (!wake_pending_) {
        wake_pending_ = true;
        loop_->schedule(next_start_, [this] {
          wake_pending_ = false;
          pump();
        });
      }
      return;
    }

    GameCommand cmd = codec_.encode(*source, rng_);
    source->compact();
    auto timed = scheduler_.schedule(cmd, now);
    busy_ = true;
    if (knock) ++stats_.knock_commands;
    loop_->schedule(timed.completed, [this, cmd = std::move(cmd), done = timed.completed]() mutable {
      busy_ = false;
      next_start_ = scheduler_.next_start(done);
      if (ep_->lost() || ep_->closed()) return;
      to_absolute(cmd);
      ep_->submit(std::span(&cmd, 1));
      ++stats_.commands_sent;
      pump();
    });
  }

  void to_absolute(GameCommand& cmd) const {
    if (cfg_.channel.mode != ChannelMode::Combinatorial) return;
    cmd.target.x += map_->region.origin_x;
    cmd.target.y += map_->region.origin_y;
  }

  std::optional<Bits> decode_record(const ReplayRecord& rec) const {
    GameCommand cmd{rec.opcode, rec.ids, {rec.x, rec.y}};
    if (cfg_.channel.mode == ChannelMode::Combinatorial) {
      if (rec.x < map_->region.origin_x || rec.y < map_->region.origin_y) return std::nullopt;
      cmd.target.x -= map_->region.origin_x;
      cmd.target.y -= map_->region.origin_y;
    }
    try {
      codec_.validate(cmd);
      return codec_.decode(cmd);
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  void on_commit() {
    for (const auto& rec : tailer_.poll()) handle_record(rec);
    if (mode_ == AgentMode::AwaitingKnock && verifier_->on_tick() == KnockState::Rejected) enter_decoy();
  }

  void handle_record(const ReplayRecord& rec) {
    ++stats_.records_seen;
    if (mode_ == AgentMode::Decoy) return;
    auto bits = decode_record(rec);
    if (!bits) ++stats_.undecodable;
    if (mode_ == AgentMode::AwaitingKnock) {
      const auto st = bits ? verifier_->feed(*bits) : verifier_->feed_invalid();
      if (st == KnockState::Verified) {
        mode_ = AgentMode::Covert;
        loop_->schedule(loop_->now(), [this] { pump(); });
      } else if (st == KnockState::Rejected) {
        enter_decoy();
      }
      return;
    }
    if (!bits) {
      assembler_.reset();
      return;
    }
    stats_.bits_received += bits->size();
    assembler_.push(*bits);
    while (auto m = assembler_.pop()) {
      Received r{std::move(*m), loop_->now()};
      if (handler_)
        handler_(r);
      else
        inbox_.push_back(std::move(r));
    }
  }

  void enter_decoy() {
    mode_ = AgentMode::Decoy;
    schedule_decoy();
  }

  void schedule_decoy() {
    loop_->schedule(loop_->now() + decoy_.next_delay(), [this] {
      if (ep_->lost() || ep_->closed()) return;
      const GameCommand c = decoy_.next_command();
      ep_->submit(std::span(&c, 1));
      ++stats_.decoy_commands;
      schedule_decoy();
    });
  }

  const MapSpec* map_;
  AgentConfig cfg_;
  CommandCodec codec_;
  InputScheduler scheduler_;
  std::mt19937_64 rng_;
  net::DecoyAi decoy_;
  net::EventLoop* loop_;
  net::LockstepEndpoint* ep_;
  ReplayTailer tailer_;

  AgentMode mode_ = AgentMode::Covert;
  std::optional<KnockVerifier> verifier_;
  BitStream knock_out_;
  BitStream frame_out_;
  FrameWriter writer_;
  FrameAssembler assembler_;
  std::size_t max_payload_bits_ = 0;
  bool busy_ = false;
  bool wake_pending_ = false;
  SimTime next_start_ = SimTime::zero();

  std::deque<Received> inbox_;
  MessageHandler handler_;
  AgentStats stats_;
};

}  // namespace castle::session
