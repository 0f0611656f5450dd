// sedro-agent: built-in scripted agents speaking the lockstep protocol.
//
// Exit codes: 0 session completed, 2 usage, 3 connection or protocol failure.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "sedro/agent.hpp"

using namespace sedro;

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"Scripted lockstep agent"};
  std::string connect, policy = "zero";
  std::uint64_t seed = 0, max_ticks = 0;
  double timeout_s = 30.0;
  std::vector<std::uint16_t> versions{proto::kProtocolVersion};
  app.add_option("--connect", connect, "host:port of a listening server (default: stdin/stdout)");
  app.add_option("--policy", policy, "zero, random, familiarity, novelty, symmetric, stare, look:<s>");
  app.add_option("--seed", seed, "Seed for the random policy");
  auto* o_max = app.add_option("--max-ticks", max_ticks, "End the session with BYE after this many actions");
  app.add_option("--timeout-s", timeout_s, "Seconds to wait for the server");
  app.add_option("--versions", versions, "Protocol versions to offer");
  CLI11_PARSE(app, argc, argv);

  try {
    auto pol = agent::make_policy(policy, seed);
    const int timeout = static_cast<int>(timeout_s * 1000.0);
    net::Stream stream = connect.empty() ? net::stdio_stream() : net::connect_tcp(net::parse_address(connect), timeout);
    agent::ClientOptions opts;
    opts.timeout_ms = timeout;
    opts.versions = versions;
    if (o_max->count()) opts.max_ticks = max_ticks;
    const agent::ClientResult r = agent::run_client(stream, *pol, opts);
    for (const auto& e : r.errors) std::cerr << "sedro-agent: server error: " << e << '\n';
    std::cerr << "sedro-agent: " << r.ticks << " actions sent; " << r.message << '\n';
    return r.completed ? 0 : 3;
  } catch (const ValidationError& e) {
    std::cerr << "sedro-agent: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "sedro-agent: " << e.what() << '\n';
    return 3;
  }
}
