#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "castle/errors.hpp"
#include "castle/net/session.hpp"
#include "castle/replay.hpp"

namespace castle::net {

/// Non-blocking UDP socket bound to 127.0.0.1.
class UdpSocket {
 public:
  explicit UdpSocket(std::uint16_t port) : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
    if (!fd_) throw IoError(detail::errno_text("socket"));
    sockaddr_in a = addr(port);
    if (::bind(fd_.get(), reinterpret_cast<sockaddr*>(&a), sizeof a) != 0)
      throw IoError(detail::errno_text("bind 127.0.0.1:" + std::to_string(port)));
    ::fcntl(fd_.get(), F_SETFL, ::fcntl(fd_.get(), F_GETFL) | O_NONBLOCK);
  }

  void send_to(std::uint16_t port, std::span<const std::uint8_t> bytes) {
    sockaddr_in a = addr(port);
    // Loss on loopback is tolerated like any other datagram loss.
    (void)::sendto(fd_.get(), bytes.data(), bytes.size(), 0, reinterpret_cast<sockaddr*>(&a), sizeof a);
  }

  bool wait_readable(std::chrono::milliseconds timeout) {
    pollfd p{fd_.get(), POLLIN, 0};
    return ::poll(&p, 1, static_cast<int>(timeout.count())) > 0;
  }

  /// Reads one datagram if available.
  bool receive(std::vector<std::uint8_t>& out) {
    out.resize(0x10000);
    const auto n = ::recv(fd_.get(), out.data(), out.size(), 0);
    if (n < 0) return false;
    out.resize(static_cast<std::size_t>(n));
    return true;
  }

 private:
  static sockaddr_in addr(std::uint16_t port) {
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    return a;
  }

  detail::FileDescriptor fd_;
};

/// One player of a two-player game over loopback UDP, driven by the wall
/// clock. Player p listens on base_port + p.
class UdpPlayer {
 public:
  UdpPlayer(SessionConfig cfg, const SessionKey& key, std::uint8_t self, std::filesystem::path log_dir)
      : cfg_(std::move(cfg)), self_(self), socket_(static_cast<std::uint16_t>(cfg_.port + self)) {
    cfg_.validate();
    if (cfg_.players != 2) throw ArgumentError("loopback games hold exactly two players");
    std::filesystem::create_directories(log_dir);
    log_path_ = log_dir / ("player" + std::to_string(self) + ".creplay");
    endpoint_ = std::make_unique<LockstepEndpoint>(cfg_.endpoint(self), key);
    auto writer = std::make_shared<ReplayWriter>(log_path_);
    endpoint_->set_record_sink([writer](const ReplayRecord& r) { writer->append(r); });
    writer_ = std::move(writer);
    t0_ = std::chrono::steady_clock::now();
  }

  EventLoop& loop() noexcept { return loop_; }
  LockstepEndpoint& endpoint() noexcept { return *endpoint_; }
  const std::filesystem::path& log_path() const noexcept { return log_path_; }

  /// Blocks until the peer's first datagram arrives; false on timeout.
  bool wait_for_peer(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      if (socket_.wait_readable(std::chrono::milliseconds(50)) && drain()) return true;
    }
    return false;
  }

  /// Runs the game until `done()` holds, the session is lost, or the wall
  /// clock limit passes; returns done().
  template <class Pred>
  bool run(Pred done, std::chrono::milliseconds limit) {
    if (!started_) {
      started_ = true;
      schedule_tick(sync_clock());
    }
    const auto deadline = std::chrono::steady_clock::now() + limit;
    while (!done()) {
      if (endpoint_->lost() || std::chrono::steady_clock::now() >= deadline) return done();
      loop_.run_until(sync_clock());
      flush();
      auto wait = std::chrono::milliseconds(20);
      if (auto next = loop_.next_time()) {
        const auto gap = std::chrono::duration_cast<std::chrono::milliseconds>(*next - sync_clock());
        wait = std::clamp(gap, std::chrono::milliseconds(0), wait);
      }
      if (socket_.wait_readable(wait)) drain();
    }
    return true;
  }

 private:
  SimTime sync_clock() const {
    return std::chrono::duration_cast<SimTime>(std::chrono::steady_clock::now() - t0_);
  }

  void schedule_tick(SimTime at) {
    loop_.schedule(at, [this] {
      if (endpoint_->lost() || endpoint_->closed()) return;
      endpoint_->on_tick(loop_.now());
      flush();
      schedule_tick(loop_.now() + from_ms(cfg_.tick_ms));
    });
  }

  bool drain() {
    bool any = false;
    std::vector<std::uint8_t> buf;
    while (socket_.receive(buf)) {
      any = true;
      loop_.run_until(std::max(loop_.now(), sync_clock()));
      endpoint_->on_datagram(loop_.now(), buf);
    }
    flush();
    return any;
  }

  void flush() {
    for (auto& d : endpoint_->take_outbox()) socket_.send_to(static_cast<std::uint16_t>(cfg_.port + d.to), d.bytes);
  }

  SessionConfig cfg_;
  std::uint8_t self_;
  UdpSocket socket_;
  EventLoop loop_;
  std::filesystem::path log_path_;
  std::unique_ptr<LockstepEndpoint> endpoint_;
  std::shared_ptr<ReplayWriter> writer_;
  std::chrono::steady_clock::time_point t0_;
  bool started_ = false;
};

}  // namespace castle::net
