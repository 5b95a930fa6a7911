#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "castle/codec/command.hpp"
#include "castle/errors.hpp"
#include "castle/net/crypto.hpp"
#include "castle/net/wire.hpp"
#include "castle/replay.hpp"
#include "castle/sim_time.hpp"

namespace castle::net {

struct EndpointConfig {
  std::uint64_t session_id = 0;
  std::uint8_t self = 0;
  std::uint8_t players = 2;
  SimTime tick = from_ms(100);
  SimTime dead_interval = from_ms(10'000);
  std::size_t max_batch_bytes = 16 * 1024;
};

struct EndpointStats {
  std::uint64_t datagrams_sent = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t malformed = 0;
  std::uint64_t auth_failures = 0;
  std::uint64_t replayed_nonces = 0;
  std::uint64_t duplicate_batches = 0;
  std::uint64_t batches_delivered = 0;
  std::uint64_t records_committed = 0;
};

struct Datagram {
  std::uint8_t to = 0;
  std::vector<std::uint8_t> bytes;
};

/// One player's side of a lockstep session, free of any I/O.
///
/// Every tick the endpoint seals the commands queued since the previous tick
/// into one batch (possibly empty) and sends it to every peer; batch sequence
/// numbers equal tick indices. Peers acknowledge cumulatively in their own
/// tick packets and unacknowledged batches are resent once
/// max(2 x smoothed RTT, tick) has passed. Turn t is committed to the local
/// record sink once batch t from every player, including this one, is in
/// hand; records within a turn are ordered by player id.
///
/// The driver feeds ticks and datagrams in and drains the outbox.
class LockstepEndpoint {
 public:
  using RecordSink = std::function<void(const ReplayRecord&)>;

  LockstepEndpoint(EndpointConfig cfg, SessionKey key) : cfg_(cfg), key_(key), peers_(cfg.players), turns_(cfg.players) {
    if (cfg.players < 2 || cfg.players > 8) throw ArgumentError("sessions hold 2..8 players");
    if (cfg.self >= cfg.players) throw ArgumentError("player id out of range");
    if (cfg.tick <= SimTime::zero()) throw ArgumentError("tick interval must be positive");
    delivered_.assign(cfg.players, 0);
    for (auto& p : peers_) p.srtt_ms = to_ms(cfg.tick);
    cumulative_commands_.push_back(0);
  }

  const EndpointConfig& config() const noexcept { return cfg_; }
  const EndpointStats& stats() const noexcept { return stats_; }
  bool lost() const noexcept { return lost_; }
  bool closed() const noexcept { return closed_; }
  std::uint32_t ticks_sent() const noexcept { return static_cast<std::uint32_t>(next_seq_); }
  std::uint32_t turns_committed() const noexcept { return commit_next_; }
  std::size_t pending_commands() const noexcept { return pending_.size(); }
  std::uint64_t commands_submitted() const noexcept { return submitted_; }

  void set_record_sink(RecordSink sink) { sink_ = std::move(sink); }
  void set_commit_hook(std::function<void(std::uint32_t)> hook) { commit_hook_ = std::move(hook); }

  /// Queues commands for the next tick; returns how many were queued.
  std::size_t submit(std::span<const GameCommand> cmds) {
    if (lost_) throw SessionLost("session lost");
    if (closed_) throw ChannelError("session closed");
    for (const auto& c : cmds) {
      if (2 + command_wire_size(c) > kMaxPlaintext) throw InvalidCommand("command too large for a datagram");
      pending_.push_back(c);
    }
    submitted_ += cmds.size();
    return cmds.size();
  }

  void close() noexcept { closed_ = true; }

  /// Commands carried by batches every peer has acknowledged.
  std::uint64_t commands_acked_by_all() const {
    std::uint64_t upto = next_seq_;
    for (std::uint8_t p = 0; p < cfg_.players; ++p)
      if (p != cfg_.self) upto = std::min(upto, peers_[p].acked);
    return cumulative_commands_[upto];
  }

  double rto_ms(std::uint8_t peer) const { return std::max(2.0 * peers_[peer].srtt_ms, to_ms(cfg_.tick)); }

  void on_tick(SimTime now) {
    if (lost_ || closed_) return;
    if (!started_) {
      started_ = true;
      for (auto& p : peers_) p.last_heard = std::max(p.last_heard, now);
    }
    for (std::uint8_t p = 0; p < cfg_.players; ++p) {
      if (p != cfg_.self && now - peers_[p].last_heard > cfg_.dead_interval) {
        lost_ = true;
        return;
      }
    }

    std::vector<GameCommand> batch;
    std::size_t bytes = 2;
    while (!pending_.empty()) {
      const std::size_t sz = command_wire_size(pending_.front());
      if (!batch.empty() && bytes + sz > cfg_.max_batch_bytes) break;
      bytes += sz;
      batch.push_back(std::move(pending_.front()));
      pending_.pop_front();
    }

    const std::uint64_t seq = next_seq_++;
    const auto tick = static_cast<std::uint32_t>(seq);
    SentBatch sb;
    sb.seq = seq;
    sb.plaintext = encode_batch(batch);
    sb.last_sent.assign(cfg_.players, SimTime::zero());
    sb.retransmitted.assign(cfg_.players, false);
    cumulative_commands_.push_back(cumulative_commands_.back() + batch.size());
    turns_[cfg_.self][tick] = std::move(batch);
    delivered_[cfg_.self] = tick + 1;
    sent_.push_back(std::move(sb));

    for (std::uint8_t p = 0; p < cfg_.players; ++p) {
      if (p == cfg_.self) continue;
      auto& peer = peers_[p];
      for (std::uint64_t s = std::max(peer.acked, sent_base_); s < seq; ++s) {
        auto& old = sent_[static_cast<std::size_t>(s - sent_base_)];
        if (to_ms(now - old.last_sent[p]) >= rto_ms(p)) {
          old.retransmitted[p] = true;
          ++stats_.retransmissions;
          transmit(old, p, now);
        }
      }
      transmit(sent_.back(), p, now);
    }
    prune_sent();
    try_commit();
  }

  void on_datagram(SimTime now, std::span<const std::uint8_t> bytes) {
    if (lost_ || closed_) return;
    const auto header = decode_header(bytes);
    if (!header || header->sender >= cfg_.players || header->sender == cfg_.self) {
      ++stats_.malformed;
      return;
    }
    auto opened = open_packet(key_, cfg_.session_id, cfg_.self, bytes);
    if (!opened) {
      ++stats_.auth_failures;
      return;
    }
    const PacketHeader& h = opened->header;
    auto& peer = peers_[h.sender];
    if (!peer.window.accept(nonce_counter(h.nonce))) {
      ++stats_.replayed_nonces;
      return;
    }
    peer.last_heard = now;
    process_ack(h.sender, std::min(h.ack, next_seq_), now);

    auto cmds = decode_batch(opened->plaintext);
    if (!cmds || h.seq != h.tick) {
      ++stats_.malformed;
      return;
    }
    if (h.seq < peer.next_expected || peer.out_of_order.count(h.seq)) {
      ++stats_.duplicate_batches;
      return;
    }
    peer.out_of_order.emplace(h.seq, std::move(*cmds));
    for (auto it = peer.out_of_order.find(peer.next_expected); it != peer.out_of_order.end();
         it = peer.out_of_order.find(peer.next_expected)) {
      turns_[h.sender][static_cast<std::uint32_t>(it->first)] = std::move(it->second);
      peer.out_of_order.erase(it);
      ++peer.next_expected;
      delivered_[h.sender] = static_cast<std::uint32_t>(peer.next_expected);
      ++stats_.batches_delivered;
    }
    try_commit();
  }

  std::vector<Datagram> take_outbox() { return std::exchange(outbox_, {}); }

 private:
  struct SentBatch {
    std::uint64_t seq = 0;
    std::vector<std::uint8_t> plaintext;
    std::vector<SimTime> last_sent;
    std::vector<bool> retransmitted;
  };

  struct PeerState {
    std::uint64_t acked = 0;          // peer holds all our batches below this
    std::uint64_t next_expected = 0;  // next batch we need from the peer
    double srtt_ms = 0;
    SimTime last_heard = SimTime::zero();
    ReplayWindow window;
    std::map<std::uint64_t, std::vector<GameCommand>> out_of_order;
  };

  void transmit(SentBatch& b, std::uint8_t to, SimTime now) {
    PacketHeader h;
    h.sender = cfg_.self;
    h.seq = b.seq;
    h.ack = peers_[to].next_expected;
    h.tick = static_cast<std::uint32_t>(b.seq);
    h.nonce = make_nonce(cfg_.self, nonce_counter_++);
    outbox_.push_back({to, seal_packet(key_, cfg_.session_id, to, h, b.plaintext)});
    b.last_sent[to] = now;
    ++stats_.datagrams_sent;
  }

  void process_ack(std::uint8_t from, std::uint64_t ack, SimTime now) {
    auto& peer = peers_[from];
    if (ack <= peer.acked) return;
    for (std::uint64_t s = std::max(peer.acked, sent_base_); s < ack; ++s) {
      const auto& b = sent_[static_cast<std::size_t>(s - sent_base_)];
      // Karn: only batches sent exactly once give an unambiguous sample.
      if (!b.retransmitted[from]) peer.srtt_ms = 0.875 * peer.srtt_ms + 0.125 * to_ms(now - b.last_sent[from]);
    }
    peer.acked = ack;
    prune_sent();
  }

  void prune_sent() {
    std::uint64_t upto = next_seq_;
    for (std::uint8_t p = 0; p < cfg_.players; ++p)
      if (p != cfg_.self) upto = std::min(upto, peers_[p].acked);
    while (sent_base_ < upto && !sent_.empty()) {
      sent_.pop_front();
      ++sent_base_;
    }
  }

  void try_commit() {
    for (;;) {
      const std::uint32_t t = commit_next_;
      for (std::uint8_t p = 0; p < cfg_.players; ++p)
        if (delivered_[p] <= t) return;
      for (std::uint8_t p = 0; p < cfg_.players; ++p) {
        auto it = turns_[p].find(t);
        for (const auto& c : it->second) {
          ReplayRecord rec;
          rec.tick = t;
          rec.player = p;
          rec.opcode = c.opcode;
          rec.ids = c.selected;
          rec.x = static_cast<std::uint16_t>(c.target.x);
          rec.y = static_cast<std::uint16_t>(c.target.y);
          if (sink_) sink_(rec);
          ++stats_.records_committed;
        }
        turns_[p].erase(it);
      }
      ++commit_next_;
      if (commit_hook_) commit_hook_(t);
    }
  }

  EndpointConfig cfg_;
  SessionKey key_;
  std::vector<PeerState> peers_;
  std::vector<std::map<std::uint32_t, std::vector<GameCommand>>> turns_;
  std::vector<std::uint32_t> delivered_;
  std::uint32_t commit_next_ = 0;

  std::deque<GameCommand> pending_;
  std::deque<SentBatch> sent_;
  std::uint64_t sent_base_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<std::uint64_t> cumulative_commands_;
  std::uint64_t nonce_counter_ = 0;
  std::uint64_t submitted_ = 0;

  std::vector<Datagram> outbox_;
  RecordSink sink_;
  std::function<void(std::uint32_t)> commit_hook_;
  EndpointStats stats_;
  bool lost_ = false;
  bool closed_ = false;
  bool started_ = false;
};

}  // namespace castle::net
