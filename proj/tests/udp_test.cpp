#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "castle/net/udp.hpp"
#include "castle/session/agent.hpp"
#include "castle/session/proxy.hpp"
#include "temp_dir.hpp"

using namespace castle;
using namespace castle::session;
using namespace std::chrono_literals;

namespace {

std::uint16_t pick_port() {
  std::random_device rd;
  return static_cast<std::uint16_t>(40000 + rd() % 20000) & ~1u;
}

net::SessionConfig loopback_config(std::uint16_t port) {
  net::SessionConfig cfg;
  cfg.transport = net::Transport::DatagramLoopback;
  cfg.port = port;
  cfg.tick_ms = 20;
  cfg.dead_interval_ms = 3000;
  cfg.kdf = net::KdfStrength::Minimal;
  cfg.password = "loopback-test-password";
  return cfg;
}

AgentConfig agent_config(const MapSpec& map, std::uint8_t peer) {
  AgentConfig a;
  a.channel = map.channel(50);
  a.profile = {0.3, 0, 0};
  a.peer = peer;
  a.seed = 10 + peer;
  return a;
}

}  // namespace

TEST(Udp, FetchOverLoopback) {
  TempDir dir;
  const auto port = pick_port();
  const auto cfg = loopback_config(port);
  const auto key = net::derive_session_key(*cfg.password, cfg.session_id, cfg.kdf);
  const auto map = generate_map(1600, 320, 256, 16);
  std::vector<std::uint8_t> doc(3000);
  std::mt19937 rng(1);
  for (auto& b : doc) b = static_cast<std::uint8_t>(rng());

  std::uint64_t served = 0;
  std::thread proxy([&] {
    net::UdpPlayer player(cfg, key, 0, dir.path() / "proxy");
    auto ac = agent_config(map, 1);
    ac.expect_knock = knock_bits(*cfg.password);
    CovertAgent agent(map, ac, player.loop(), player.endpoint(), player.log_path());
    DocumentStore store;
    store.put("a", doc);
    ProxyService svc(agent, std::cref(store));
    if (!player.wait_for_peer(10s)) return;
    player.run([&] { return false; }, 20s);  // until the client goes quiet
    served = svc.served();
  });

  std::optional<Resolution> got;
  {
    net::UdpPlayer player(cfg, key, 1, dir.path() / "client");
    auto ac = agent_config(map, 0);
    ac.send_knock = knock_bits(*cfg.password);
    CovertAgent agent(map, ac, player.loop(), player.endpoint(), player.log_path());
    agent.send_message(1, to_bytes("doc:a"), FrameType::Request);
    player.run([&] { return agent.has_message(); }, 15s);
    if (auto m = agent.recv_message()) got = decode_response(m->bytes);
  }
  proxy.join();
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, ResponseStatus::Ok);
  EXPECT_EQ(got->body, doc);
  EXPECT_EQ(served, 1u);
}

TEST(Udp, WrongKeyNeverConnects) {
  TempDir dir;
  const auto port = pick_port();
  auto cfg = loopback_config(port);
  cfg.dead_interval_ms = 1000;
  const auto good = net::derive_session_key(*cfg.password, cfg.session_id, cfg.kdf);
  const auto bad = net::derive_session_key("not-it", cfg.session_id, cfg.kdf);
  std::thread host([&] {
    net::UdpPlayer p(cfg, good, 0, dir.path() / "h");
    p.run([] { return false; }, 3s);
  });
  net::UdpPlayer intruder(cfg, bad, 1, dir.path() / "i");
  intruder.run([] { return false; }, 3s);
  host.join();
  EXPECT_TRUE(intruder.endpoint().lost());
  EXPECT_EQ(intruder.endpoint().stats().batches_delivered, 0u);
  EXPECT_GT(intruder.endpoint().stats().auth_failures, 0u);
}
