#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "castle/errors.hpp"
#include "castle/net/session.hpp"
#include "castle/session/agent.hpp"
#include "castle/session/knock.hpp"
#include "castle/session/proxy.hpp"

namespace castle::session {

struct LinkConfig {
  MapSpec map;
  std::uint32_t k = 200;
  ChannelMode mode = ChannelMode::Combinatorial;
  unsigned m_bits = 8;
  TimingProfile client_profile;
  TimingProfile proxy_profile;
  net::SessionConfig session;    // password, admission, loss model, tick
  std::string client_password;   // what the client presents when joining
  bool knock = true;
  bool client_knocks = true;     // off: the client skips its opening moves
  std::uint64_t seed = 1;
  std::filesystem::path log_dir;
};

struct TransferReport {
  std::uint64_t bytes = 0;
  double seconds = 0;          // virtual time from queueing to reassembly
  double goodput_Bps = 0;
  std::uint64_t commands = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t datagrams = 0;
};

/// A host running the proxy (player 0) and one client (player 1) in a single
/// in-process game on a virtual clock.
class CovertLink {
 public:
  explicit CovertLink(LinkConfig cfg) : cfg_(std::move(cfg)) {
    net::SessionHost host(cfg_.session);
    const auto ticket = host.join("client", cfg_.client_password);
    verified_ = ticket.verified;
    session_ = std::make_unique<net::LockstepSession>(cfg_.session, ticket.key, cfg_.seed, cfg_.log_dir);
    const auto channel = cfg_.map.channel(cfg_.k, cfg_.mode, cfg_.m_bits);

    AgentConfig pc;
    pc.channel = channel;
    pc.profile = cfg_.proxy_profile;
    pc.seed = cfg_.seed * 2 + 1;
    pc.peer = 1;
    pc.peer_verified = ticket.verified;
    if (cfg_.knock && cfg_.session.password) pc.expect_knock = knock_bits(*cfg_.session.password);
    proxy_ = std::make_unique<CovertAgent>(cfg_.map, pc, session_->loop(), session_->endpoint(0), session_->log_path(0));

    AgentConfig cc;
    cc.channel = channel;
    cc.profile = cfg_.client_profile;
    cc.seed = cfg_.seed * 2 + 2;
    cc.peer = 0;
    if (cfg_.knock && cfg_.client_knocks && cfg_.session.password) cc.send_knock = knock_bits(cfg_.client_password);
    client_ = std::make_unique<CovertAgent>(cfg_.map, cc, session_->loop(), session_->endpoint(1), session_->log_path(1));
    session_->start();
  }

  const LinkConfig& config() const noexcept { return cfg_; }
  bool client_verified() const noexcept { return verified_; }
  net::LockstepSession& session() noexcept { return *session_; }
  CovertAgent& client() noexcept { return *client_; }
  CovertAgent& proxy() noexcept { return *proxy_; }

  /// Serves `resolver` on the proxy side.
  void serve(Resolver resolver) { service_ = std::make_unique<ProxyService>(*proxy_, std::move(resolver)); }
  std::uint64_t served() const noexcept { return service_ ? service_->served() : 0; }

  /// Sends `bytes` from the client and runs until the proxy has reassembled it.
  TransferReport transfer(std::span<const std::uint8_t> bytes, std::uint16_t stream_id = 1,
                          double limit_seconds = 1e6) {
    auto& loop = session_->loop();
    const SimTime start = loop.now();
    const auto cmds0 = client_->stats().commands_sent;
    client_->send_message(stream_id, bytes);
    std::optional<Received> got;
    const auto done = [&] {
      if (!got) got = proxy_->recv();
      return got.has_value() || session_->any_lost();
    };
    loop.run_while_not(done, start + from_ms(limit_seconds * 1000.0));
    if (!got) throw TransferError(proxy_->assembler().partial_bytes(stream_id),
                                  session_->any_lost() ? "session lost mid-transfer" : "transfer timed out");
    if (got->msg.stream_id != stream_id || got->msg.bytes.size() != bytes.size())
      throw TransferError(got->msg.bytes.size(), "transfer delivered an unexpected message");

    TransferReport r;
    r.bytes = bytes.size();
    r.seconds = to_seconds(got->at - start);
    r.goodput_Bps = r.seconds > 0 ? static_cast<double>(r.bytes) / r.seconds : 0.0;
    r.commands = client_->stats().commands_sent - cmds0;
    r.retransmissions = session_->endpoint(1).stats().retransmissions;
    r.datagrams = session_->endpoint(1).stats().datagrams_sent;
    received_ = std::move(got->msg.bytes);
    return r;
  }

  /// Payload of the last completed transfer as seen by the proxy.
  const std::vector<std::uint8_t>& last_received() const noexcept { return received_; }

  /// Sends a request and runs until the matching response reaches the client.
  Resolution fetch(std::span<const std::uint8_t> request, std::uint16_t stream_id = 1, double limit_seconds = 1e6) {
    auto& loop = session_->loop();
    const SimTime start = loop.now();
    client_->send_message(stream_id, request, FrameType::Request);
    std::optional<Received> got;
    const auto done = [&] {
      while (!got) {
        auto r = client_->recv();
        if (!r) break;
        if (r->msg.stream_id == stream_id && r->msg.type == FrameType::Response) got = std::move(r);
      }
      return got.has_value() || session_->any_lost();
    };
    loop.run_while_not(done, start + from_ms(limit_seconds * 1000.0));
    if (!got) throw TransferError(client_->assembler().partial_bytes(stream_id),
                                  session_->any_lost() ? "session lost before the response" : "fetch timed out");
    return decode_response(got->msg.bytes);
  }

  /// Advances the game by `seconds` of virtual time.
  void run_for(double seconds) { session_->loop().run_until(session_->loop().now() + from_ms(seconds * 1000.0)); }

 private:
  LinkConfig cfg_;
  bool verified_ = false;
  std::unique_ptr<net::LockstepSession> session_;
  std::unique_ptr<CovertAgent> proxy_;
  std::unique_ptr<CovertAgent> client_;
  std::unique_ptr<ProxyService> service_;
  std::vector<std::uint8_t> received_;
};

}  // namespace castle::session
