// castle: command-line front end for maps, transfers, proxying, sweeps and
// trace analysis.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "castle/experiments.hpp"
#include "castle/net/udp.hpp"
#include "castle/session/agent.hpp"
#include "castle/session/proxy.hpp"
#include "castle/trafficlab.hpp"

using json = nlohmann::ordered_json;
using namespace castle;

namespace {

struct RunConfig {
  std::string map_path;
  std::string mode = "comb";
  std::uint32_t n = 1600;
  std::uint32_t k = 200;
  unsigned m_bits = 8;
  double command_ms = 325;
  double per_event_ms = -1;
  double delay_ms = 0;
  double jitter_ms = 0;
  double drop = 0;
  double reorder = 0;
  double dup = 0;
  double latency_ms = 5;
  double tick_ms = 100;
  std::uint64_t seed = 1;
  std::string password = "castle-default-passphrase";
  std::uint16_t port = net::kDefaultPort;
  std::string trace_out;
  std::string report = "text";

  experiments::Setup setup() const {
    experiments::Setup s;
    if (!map_path.empty()) {
      std::ifstream in(map_path);
      if (!in) throw IoError("cannot open map " + map_path);
      std::stringstream text;
      text << in.rdbuf();
      s.map = parse_map(text.str());
    }
    s.n = n;
    s.k = k;
    s.mode = mode == "byte" ? ChannelMode::ByteClick : ChannelMode::Combinatorial;
    s.m_bits = m_bits;
    s.command_ms = command_ms;
    if (per_event_ms >= 0) s.per_event_ms = per_event_ms;
    s.delay_ms = delay_ms;
    s.jitter_ms = jitter_ms;
    s.loss = {drop, latency_ms, latency_ms, reorder, dup};
    s.tick_ms = tick_ms;
    s.password = password;
    s.seed = seed;
    s.loss.validate();
    s.resolved_map().channel(s.mode == ChannelMode::ByteClick ? 1 : k, s.mode, m_bits).validate();
    return s;
  }

  json to_json() const {
    return {{"map", map_path.empty() ? "generated" : map_path},
            {"mode", mode},
            {"n", n},
            {"k", k},
            {"m_bits", m_bits},
            {"command_ms", command_ms},
            {"per_event_ms", per_event_ms},
            {"delay_ms", delay_ms},
            {"jitter_ms", jitter_ms},
            {"drop", drop},
            {"reorder", reorder},
            {"dup", dup},
            {"latency_ms", latency_ms},
            {"tick_ms", tick_ms},
            {"seed", seed},
            {"port", port}};
  }
};

void add_run_flags(CLI::App& app, RunConfig& c) {
  app.add_option("--map", c.map_path, "Map file (default: generated)");
  app.add_option("--mode", c.mode, "Channel mode")->check(CLI::IsMember({"comb", "byte"}));
  app.add_option("--n", c.n, "Objects on a generated map")->check(CLI::Range(1u, 1u << 20));
  app.add_option("--k", c.k, "Maximum objects selected per command")->check(CLI::Range(1u, 1u << 20));
  app.add_option("--m-bits", c.m_bits, "Bits per byte-click command")->check(CLI::Range(1u, 24u));
  app.add_option("--command-ms", c.command_ms, "Mean time to issue one command")->check(CLI::NonNegativeNumber);
  app.add_option("--per-event-ms", c.per_event_ms, "Time per click (overrides --command-ms)")->check(CLI::NonNegativeNumber);
  app.add_option("--delay-ms", c.delay_ms, "Added delay between commands")->check(CLI::NonNegativeNumber);
  app.add_option("--jitter-ms", c.jitter_ms, "Uniform click jitter half-width")->check(CLI::NonNegativeNumber);
  app.add_option("--drop", c.drop, "Datagram drop probability")->check(CLI::Range(0.0, 1.0));
  app.add_option("--reorder", c.reorder, "Datagram reorder probability")->check(CLI::Range(0.0, 1.0));
  app.add_option("--dup", c.dup, "Datagram duplication probability")->check(CLI::Range(0.0, 1.0));
  app.add_option("--latency-ms", c.latency_ms, "One-way base latency")->check(CLI::NonNegativeNumber);
  app.add_option("--tick-ms", c.tick_ms, "Lockstep tick interval")->check(CLI::PositiveNumber);
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("--password", c.password, "Game password");
  app.add_option("--port", c.port, "Loopback UDP base port");
  app.add_option("--trace-out", c.trace_out, "Write the packet trace here");
  app.add_option("--report", c.report, "Report format")->check(CLI::IsMember({"text", "json"}));
}

void emit(const RunConfig& c, const json& j) {
  if (c.report == "json") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::function<void(const json&, const std::string&)> walk = [&](const json& v, const std::string& prefix) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (it->is_object())
        walk(*it, key);
      else
        std::cout << key << ": " << (it->is_string() ? it->get<std::string>() : it->dump()) << '\n';
    }
  };
  walk(j, "");
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_trace_file(const std::string& path, const PacketTrace& t) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_trace(out, t);
}

net::SessionConfig loopback_session(const RunConfig& c) {
  net::SessionConfig s;
  s.transport = net::Transport::DatagramLoopback;
  s.port = c.port;
  s.tick_ms = c.tick_ms;
  s.password = c.password;
  s.session_id = c.seed;
  return s;
}

session::AgentConfig loopback_agent(const experiments::Setup& s, const MapSpec& map, std::uint8_t peer) {
  session::AgentConfig a;
  a.channel = map.channel(s.mode == ChannelMode::ByteClick ? 1 : s.k, s.mode, s.m_bits);
  a.profile = s.profile(map);
  a.peer = peer;
  a.seed = s.seed * 2 + 2 - peer;
  return a;
}

int cmd_genmap(std::uint32_t n, std::uint32_t w, std::uint32_t h, unsigned bits, const std::string& out) {
  const auto text = serialize_map(generate_map(n, w, h, bits));
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw IoError("cannot write " + out);
    f << text;
  }
  return 0;
}

int cmd_transfer(const RunConfig& c, const std::string& file, const std::string& transport) {
  const auto s = c.setup();
  const auto data = read_file(file);
  json j;
  j["command"] = "transfer";
  j["config"] = c.to_json();
  j["config"]["file"] = file;
  j["config"]["transport"] = transport;

  if (transport == "inproc") {
    auto r = experiments::run_transfer(s, data);
    if (!r.exact) throw Error("received bytes differ from the source");
    if (!c.trace_out.empty()) write_trace_file(c.trace_out, r.trace);
    j["result"] = {{"bytes", r.report.bytes},
                   {"seconds", r.report.seconds},
                   {"goodput_Bps", r.report.goodput_Bps},
                   {"commands", r.report.commands},
                   {"retransmits", r.report.retransmissions},
                   {"datagrams", r.report.datagrams},
                   {"clock", "virtual"}};
    emit(c, j);
    return 0;
  }

  // Loopback: both players in this process, each on its own socket and thread.
  const auto map = s.resolved_map();
  const auto cfg = loopback_session(c);
  const auto key = net::derive_session_key(c.password, cfg.session_id, cfg.kdf);
  experiments::ScratchDir dir;
  std::vector<std::uint8_t> got;
  bool received = false;
  std::atomic<bool> finished{false};
  std::thread receiver([&] {
    net::UdpPlayer player(cfg, key, 0, dir.path() / "rx");
    auto ac = loopback_agent(s, map, 1);
    ac.expect_knock = session::knock_bits(c.password);
    session::CovertAgent agent(map, ac, player.loop(), player.endpoint(), player.log_path());
    player.run([&] { return agent.has_message(); }, std::chrono::hours(24));
    if (auto m = agent.recv_message()) {
      got = std::move(m->bytes);
      received = true;
    }
    finished = true;
  });
  const auto t0 = std::chrono::steady_clock::now();
  {
    net::UdpPlayer player(cfg, key, 1, dir.path() / "tx");
    auto ac = loopback_agent(s, map, 0);
    ac.send_knock = session::knock_bits(c.password);
    session::CovertAgent agent(map, ac, player.loop(), player.endpoint(), player.log_path());
    agent.send_message(1, data);
    player.run([&] { return finished.load(); }, std::chrono::hours(24));
  }
  receiver.join();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!received) throw TransferError(0, "loopback transfer did not complete");
  if (got != data) throw Error("received bytes differ from the source");
  j["result"] = {{"bytes", data.size()},
                 {"seconds", secs},
                 {"goodput_Bps", secs > 0 ? static_cast<double>(data.size()) / secs : 0.0},
                 {"clock", "wall"}};
  emit(c, j);
  return 0;
}

int cmd_proxy(const RunConfig& c, const std::string& docs, double wait_s, double max_s) {
  const auto s = c.setup();
  const auto map = s.resolved_map();
  session::DocumentStore store;
  std::size_t loaded = 0;
  if (!docs.empty()) {
    for (const auto& e : std::filesystem::directory_iterator(docs)) {
      if (!e.is_regular_file()) continue;
      store.put(e.path().filename().string(), read_file(e.path().string()));
      ++loaded;
    }
  }
  const auto cfg = loopback_session(c);
  const auto key = net::derive_session_key(c.password, cfg.session_id, cfg.kdf);
  experiments::ScratchDir dir;
  net::UdpPlayer player(cfg, key, 0, dir.path());
  auto ac = loopback_agent(s, map, 1);
  ac.expect_knock = session::knock_bits(c.password);
  session::CovertAgent agent(map, ac, player.loop(), player.endpoint(), player.log_path());
  session::ProxyService svc(agent, std::cref(store));
  std::cerr << "proxy: " << loaded << " documents, listening on 127.0.0.1:" << c.port << '\n';
  if (!player.wait_for_peer(std::chrono::milliseconds(static_cast<long long>(wait_s * 1000))))
    throw Error("no peer joined within the wait period");
  player.run([] { return false; }, std::chrono::milliseconds(static_cast<long long>(max_s * 1000)));
  json j;
  j["command"] = "proxy";
  j["config"] = c.to_json();
  j["result"] = {{"served", svc.served()},
                 {"peer_verified", agent.mode() == session::AgentMode::Covert},
                 {"session_lost", player.endpoint().lost()}};
  emit(c, j);
  return 0;
}

int cmd_fetch(const RunConfig& c, const std::string& request, const std::string& out, double timeout_s) {
  const auto s = c.setup();
  const auto map = s.resolved_map();
  const auto cfg = loopback_session(c);
  const auto key = net::derive_session_key(c.password, cfg.session_id, cfg.kdf);
  experiments::ScratchDir dir;
  net::UdpPlayer player(cfg, key, 1, dir.path());
  auto ac = loopback_agent(s, map, 0);
  ac.send_knock = session::knock_bits(c.password);
  session::CovertAgent agent(map, ac, player.loop(), player.endpoint(), player.log_path());
  agent.send_message(1, session::to_bytes(request), session::FrameType::Request);
  const auto t0 = std::chrono::steady_clock::now();
  player.run([&] { return agent.has_message(); }, std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000)));
  auto m = agent.recv_message();
  if (!m) throw TransferError(agent.assembler().partial_bytes(1), "no response before the timeout");
  const auto res = session::decode_response(m->bytes);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot write " + out);
    f.write(reinterpret_cast<const char*>(res.body.data()), static_cast<std::streamsize>(res.body.size()));
  }
  json j;
  j["command"] = "fetch";
  j["config"] = c.to_json();
  j["config"]["request"] = request;
  j["result"] = {{"status", static_cast<int>(res.status)}, {"bytes", res.body.size()}, {"seconds", secs}};
  if (out.empty() && c.report == "text") j["result"]["body"] = std::string(res.body.begin(), res.body.end());
  emit(c, j);
  return res.status == session::ResponseStatus::Ok ? 0 : 1;
}

int cmd_sweep(const RunConfig& c, const std::vector<std::uint32_t>& ks, const std::vector<double>& delays,
              std::size_t bytes, double baseline_s) {
  auto s = c.setup();
  const auto baseline = experiments::decoy_trace(s, baseline_s);
  if (!c.trace_out.empty()) write_trace_file(c.trace_out, baseline);
  const auto rows = experiments::sweep(s, ks, delays, bytes, baseline);
  json j;
  j["command"] = "sweep";
  j["config"] = c.to_json();
  j["config"]["bytes"] = bytes;
  j["config"]["baseline"] = "decoy AI, " + std::to_string(baseline_s) + " s";
  if (c.report == "json") {
    j["rows"] = json::array();
    for (const auto& r : rows)
      j["rows"].push_back({{"k", r.k},
                           {"delay_ms", r.delay_ms},
                           {"goodput_Bps", r.goodput_Bps},
                           {"seconds", r.seconds},
                           {"ks_sizes", r.ks_sizes},
                           {"ks_gaps", r.ks_gaps},
                           {"exact", r.exact}});
    emit(c, j);
    return 0;
  }
  emit(c, j);
  std::cout << '\n'
            << std::setw(6) << "k" << std::setw(10) << "delay_ms" << std::setw(14) << "goodput_Bps" << std::setw(12)
            << "seconds" << std::setw(10) << "ks_size" << std::setw(10) << "ks_gap" << '\n';
  for (const auto& r : rows)
    std::cout << std::fixed << std::setprecision(2) << std::setw(6) << r.k << std::setw(10) << r.delay_ms
              << std::setw(14) << r.goodput_Bps << std::setw(12) << r.seconds << std::setprecision(3)
              << std::setw(10) << r.ks_sizes << std::setw(10) << r.ks_gaps << '\n';
  return 0;
}

int cmd_analyze(const RunConfig& c, const std::vector<std::string>& files, double window_s) {
  std::vector<PacketTrace> traces;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw IoError("cannot open " + f);
    auto t = read_trace(in);
    if (t.label.empty()) t.label = f;
    traces.push_back(std::move(t));
  }
  json j;
  j["command"] = "analyze";
  j["config"] = {{"window_s", window_s}, {"size_bin_bytes", kSizeBinBytes}, {"time_bin_ms", kTimeBinMs}};
  json per = json::object();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    const auto f = feature_histograms(t);
    const auto sizes = packet_sizes(t);
    double mean = 0;
    for (double v : sizes) mean += v;
    if (!sizes.empty()) mean /= static_cast<double>(sizes.size());
    json e = {{"label", t.label},
              {"packets", t.records.size()},
              {"duration_s", t.duration_ms() / 1000.0},
              {"mean_size", mean},
              {"size_bins_used", f.sizes.nonempty_bins()},
              {"gap_bins_used", f.gaps.nonempty_bins()}};
    if (window_s > 0) {
      const auto chunks = chunk_trace(t, window_s);
      e["chunks"] = chunks.size();
      double worst = 0;
      for (std::size_t a = 1; a < chunks.size(); ++a)
        worst = std::max(worst, ks_statistic(packet_sizes(chunks[0]), packet_sizes(chunks[a])));
      e["max_chunk_ks_sizes"] = worst;
    }
    per["trace" + std::to_string(i)] = e;
  }
  j["traces"] = per;
  json pairs = json::object();
  for (std::size_t a = 0; a < traces.size(); ++a)
    for (std::size_t b = a + 1; b < traces.size(); ++b) {
      const auto ga = inter_packet_times(traces[a]), gb = inter_packet_times(traces[b]);
      json e = {{"ks_sizes", ks_statistic(packet_sizes(traces[a]), packet_sizes(traces[b]))}};
      if (!ga.empty() && !gb.empty()) e["ks_gaps"] = ks_statistic(ga, gb);
      pairs["trace" + std::to_string(a) + "_vs_trace" + std::to_string(b)] = e;
    }
  j["pairs"] = pairs;
  emit(c, j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"castle: covert channel over a lockstep strategy-game session"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* genmap = app.add_subcommand("genmap", "Generate a map with immobile objects and a rally region");
  std::uint32_t gm_n = 1600, gm_w = 320, gm_h = 256;
  unsigned gm_bits = 16;
  std::string gm_out;
  genmap->add_option("--n", gm_n, "Objects to place")->check(CLI::Range(1u, 1u << 20));
  genmap->add_option("--width", gm_w, "Map width in cells");
  genmap->add_option("--height", gm_h, "Map height in cells");
  genmap->add_option("--region-bits", gm_bits, "log2 of the rally region area")->check(CLI::Range(1u, 32u));
  genmap->add_option("--out", gm_out, "Output file (default stdout)");

  auto* transfer = app.add_subcommand("transfer", "Send a file from client to proxy and report goodput");
  std::string tr_file, tr_transport = "inproc";
  add_run_flags(*transfer, cfg);
  transfer->add_option("--file", tr_file, "File to send")->required();
  transfer->add_option("--transport", tr_transport, "inproc (virtual clock) or loopback (UDP, wall clock)")
      ->check(CLI::IsMember({"inproc", "loopback"}));

  auto* proxy = app.add_subcommand("proxy", "Serve documents to a peer over loopback UDP");
  std::string px_docs;
  double px_wait = 60, px_max = 600;
  add_run_flags(*proxy, cfg);
  proxy->add_option("--docs", px_docs, "Directory whose files are served as doc:<name>");
  proxy->add_option("--wait-seconds", px_wait, "How long to wait for a peer")->check(CLI::PositiveNumber);
  proxy->add_option("--max-seconds", px_max, "Stop serving after this long")->check(CLI::PositiveNumber);

  auto* fetch = app.add_subcommand("fetch", "Request a document from a proxy over loopback UDP");
  std::string ft_req, ft_out;
  double ft_timeout = 120;
  add_run_flags(*fetch, cfg);
  fetch->add_option("--request", ft_req, "Request, e.g. doc:index.html")->required();
  fetch->add_option("--out", ft_out, "Write the response body here");
  fetch->add_option("--timeout-seconds", ft_timeout, "Give up after this long")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Goodput and KS against decoy traffic over a k x delay grid");
  std::vector<std::uint32_t> sw_ks = {25, 50, 100, 200};
  std::vector<double> sw_delays = {100, 250, 500, 1000};
  std::size_t sw_bytes = 20000;
  double sw_baseline = 300;
  add_run_flags(*sweep, cfg);
  sweep->add_option("--ks", sw_ks, "Selection limits")->delimiter(',');
  sweep->add_option("--delays", sw_delays, "Inter-command delays in ms")->delimiter(',');
  sweep->add_option("--bytes", sw_bytes, "Bytes per transfer");
  sweep->add_option("--baseline-seconds", sw_baseline, "Length of the decoy baseline trace")
      ->check(CLI::PositiveNumber);

  auto* analyze = app.add_subcommand("analyze", "Histogram and KS report over trace files");
  std::vector<std::string> an_files;
  double an_window = 0;
  analyze->add_option("traces", an_files, "Trace files")->required();
  analyze->add_option("--window", an_window, "Chunk window in seconds (0: none)")->check(CLI::NonNegativeNumber);
  analyze->add_option("--report", cfg.report, "Report format")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*genmap) return cmd_genmap(gm_n, gm_w, gm_h, gm_bits, gm_out);
    if (*transfer) return cmd_transfer(cfg, tr_file, tr_transport);
    if (*proxy) return cmd_proxy(cfg, px_docs, px_wait, px_max);
    if (*fetch) return cmd_fetch(cfg, ft_req, ft_out, ft_timeout);
    if (*sweep) return cmd_sweep(cfg, sw_ks, sw_delays, sw_bytes, sw_baseline);
    if (*analyze) return cmd_analyze(cfg, an_files, an_window);
  } catch (const ArgumentError& e) {
    std::cerr << "castle: " << e.what() << '\n';
    return 2;
  } catch (const RangeError& e) {
    std::cerr << "castle: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "castle: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
