#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "castle/errors.hpp"
#include "castle/session/agent.hpp"

namespace castle::session {

enum class ResponseStatus : std::uint8_t { Ok = 0, NotFound = 1, Error = 2 };

struct Resolution {
  ResponseStatus status = ResponseStatus::Ok;
  std::vector<std::uint8_t> body;
};

/// Maps request bytes to a response. Throwing counts as an error response.
using Resolver = std::function<Resolution(std::span<const std::uint8_t>)>;

inline std::vector<std::uint8_t> encode_response(const Resolution& r) {
  std::vector<std::uint8_t> out;
  out.reserve(1 + r.body.size());
  out.push_back(static_cast<std::uint8_t>(r.status));
  out.insert(out.end(), r.body.begin(), r.body.end());
  return out;
}

inline Resolution decode_response(std::span<const std::uint8_t> bytes) {
  if (bytes.empty() || bytes[0] > 2) throw DecodeError("malformed response");
  return {static_cast<ResponseStatus>(bytes[0]), {bytes.begin() + 1, bytes.end()}};
}

inline std::vector<std::uint8_t> to_bytes(std::string_view s) { return {s.begin(), s.end()}; }

/// Local keyed document store; requests look like "doc:<key>".
class DocumentStore {
 public:
  void put(std::string key, std::vector<std::uint8_t> bytes) { docs_[std::move(key)] = std::move(bytes); }

  Resolution operator()(std::span<const std::uint8_t> request) const {
    const std::string req(request.begin(), request.end());
    constexpr std::string_view scheme = "doc:";
    if (req.rfind(scheme, 0) != 0) return {ResponseStatus::Error, to_bytes("unsupported request")};
    auto it = docs_.find(req.substr(scheme.size()));
    if (it == docs_.end()) return {ResponseStatus::NotFound, {}};
    return {ResponseStatus::Ok, it->second};
  }

 private:
  std::map<std::string, std::vector<std::uint8_t>, std::less<>> docs_;
};

/// Answers every REQUEST arriving at `agent` with a RESPONSE on the same stream.
/// Requests are resolved one at a time in arrival order.
class ProxyService {
 public:
  ProxyService(CovertAgent& agent, Resolver resolver) : agent_(&agent), resolver_(std::move(resolver)) {
    agent_->on_message([this](const Received& r) { handle(r.msg); });
  }

  ProxyService(const ProxyService&) = delete;
  ProxyService& operator=(const ProxyService&) = delete;

  std::uint64_t served() const noexcept { return served_; }
  std::uint64_t ignored() const noexcept { return ignored_; }

 private:
  void handle(const Message& m) {
    if (m.type != FrameType::Request) {
      ++ignored_;
      return;
    }
    Resolution res;
    try {
      res = resolver_(m.bytes);
    } catch (const std::exception& e) {
      res = {ResponseStatus::Error, to_bytes(e.what())};
    }
    agent_->send_message(m.stream_id, encode_response(res), FrameType::Response);
    ++served_;
  }

  CovertAgent* agent_;
  Resolver resolver_;
  std::uint64_t served_ = 0;
  std::uint64_t ignored_ = 0;
};

}  // namespace castle::session
