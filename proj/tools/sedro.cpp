// sedro: run, evaluate, replay and inspect simulator sessions.
//
// Exit codes: 0 success, 1 replay divergence, 2 configuration or usage
// error, 3 agent runtime failure (timeout, disconnect, protocol error).

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sedro/eval.hpp"
#include "sedro/session.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sedro;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiverged = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAgent = 3;

// Agent-side failure that maps to exit 3.
struct AgentFailure : Error {
  using Error::Error;
};

struct CommonFlags {
  std::string config;
  std::string scene, schedule, script;
  std::uint64_t seed = 0;
  double time_scale = 1.0;
  std::uint64_t max_ticks = 1000;
  std::string listen = "127.0.0.1:7878";
  std::string agent;
  bool stdio = false;
  std::string out;
  double timeout_s = 30.0;
  bool seed_set = false;

  CLI::Option* o_scene = nullptr;
  CLI::Option* o_schedule = nullptr;
  CLI::Option* o_script = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_time_scale = nullptr;
  CLI::Option* o_max_ticks = nullptr;
  CLI::Option* o_listen = nullptr;
  CLI::Option* o_agent = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_timeout = nullptr;
};

void add_endpoint_flags(CLI::App* cmd, CommonFlags& f) {
  f.o_scene = cmd->add_option("--scene", f.scene, "Scene JSON");
  f.o_schedule = cmd->add_option("--schedule", f.schedule, "Developmental schedule JSON");
  f.o_script = cmd->add_option("--script", f.script, "Caregiver script JSON (replaces the scene's)");
  f.o_seed = cmd->add_option("--seed", f.seed, "Override the scene seed");
  f.o_time_scale = cmd->add_option("--time-scale", f.time_scale, "Developmental days per simulated day");
  f.o_listen = cmd->add_option("--listen", f.listen, "host:port to accept one agent on (port 0 picks one)");
  f.o_agent = cmd->add_option("--agent", f.agent, "Spawn this command and talk to it over its stdin/stdout");
  cmd->add_flag("--stdio", f.stdio, "Talk to the agent over this process's stdin/stdout");
  f.o_timeout = cmd->add_option("--timeout-s", f.timeout_s, "Seconds to wait for the agent at any point");
}

// Values from a JSON config file fill in whatever was not given as a flag.
void merge_config(CommonFlags& f) {
  if (f.config.empty()) return;
  std::ifstream in(f.config);
  if (!in) throw ValidationError("config", "file not found: " + f.config);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config", e.what());
  }
  if (!doc.is_object()) throw ValidationError("config", "expected an object");
  const fs::path base = fs::path(f.config).parent_path();
  auto path_of = [&](const json& v) { return (base / v.get<std::string>()).lexically_normal().string(); };
  try {
    for (const auto& [k, v] : doc.items()) {
      if (k == "scene") {
        if (!f.o_scene->count()) f.scene = path_of(v);
      } else if (k == "schedule") {
        if (!f.o_schedule->count()) f.schedule = path_of(v);
      } else if (k == "script") {
        if (!f.o_script->count() && !v.is_null()) f.script = path_of(v);
      } else if (k == "seed") {
        if (!f.seed_set && !v.is_null()) {
          f.seed = v.get<std::uint64_t>();
          f.seed_set = true;
        }
      } else if (k == "time_scale") {
        if (!f.o_time_scale->count()) f.time_scale = v.get<double>();
      } else if (k == "max_ticks") {
        if (f.o_max_ticks && !f.o_max_ticks->count()) f.max_ticks = v.get<std::uint64_t>();
      } else if (k == "listen") {
        if (!f.o_listen->count()) f.listen = v.get<std::string>();
      } else if (k == "agent") {
        if (!f.o_agent->count()) f.agent = v.get<std::string>();
      } else if (k == "out") {
        if (!f.o_out->count()) f.out = path_of(v);
      } else if (k == "timeout_s") {
        if (!f.o_timeout->count()) f.timeout_s = v.get<double>();
      } else {
        throw ValidationError("config." + k, "unknown key");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("config", e.what());
  }
}

SessionSetup setup_from(const CommonFlags& f, const char* default_scene, bool seed_given) {
  SessionSetup s;
  s.scene = f.scene.empty() ? data_dir() / "scenes" / default_scene : fs::path(f.scene);
  s.schedule = f.schedule.empty() ? data_dir() / "schedule" / "default.json" : fs::path(f.schedule);
  if (!f.script.empty()) s.script = f.script;
  if (seed_given) s.seed = f.seed;
  if (!(f.time_scale > 0.0)) throw ValidationError("time_scale", "must be > 0");
  s.time_scale = f.time_scale;
  s.max_ticks = f.max_ticks;
  return s;
}

int timeout_ms(const CommonFlags& f) {
  if (!(f.timeout_s > 0.0)) throw ValidationError("timeout_s", "must be > 0");
  return static_cast<int>(f.timeout_s * 1000.0);
}

// Where the agent lives for this invocation.
class AgentEndpoint {
 public:
  AgentEndpoint(const CommonFlags& f, int timeout) {
    if (!f.agent.empty() && f.stdio) throw ValidationError("agent", "--agent and --stdio are exclusive");
    if (!f.agent.empty()) {
      proc_.emplace(net::Subprocess::spawn(net::split_command(f.agent)));
      stream_ = &proc_->stream();
    } else if (f.stdio) {
      own_ = net::stdio_stream();
      stream_ = &own_;
    } else {
      listener_.emplace(net::Listener::bind(net::parse_address(f.listen)));
      std::cerr << "listening on " << net::parse_address(f.listen).host << ':' << listener_->port() << std::endl;
      auto s = listener_->accept(timeout);
      if (!s) throw AgentFailure("no agent connected within " + std::to_string(timeout) + " ms");
      own_ = std::move(*s);
      stream_ = &own_;
    }
  }

  net::Stream& stream() { return *stream_; }

  void finish() {
    if (proc_) proc_->wait();
  }

 private:
  std::optional<net::Subprocess> proc_;
  std::optional<net::Listener> listener_;
  net::Stream own_;
  net::Stream* stream_ = nullptr;
};

int cmd_run(CommonFlags f) {
  merge_config(f);
  const SessionSetup setup = setup_from(f, "nursery.json", f.seed_set);
  const int timeout = timeout_ms(f);
  Simulation check(setup);  // fail on bad assets before anyone connects
  if (f.out.empty()) f.out = "session.sedrolog";

  AgentEndpoint ep(f, timeout);
  SessionOptions opts;
  opts.timeout_ms = timeout;
  opts.log_path = f.out;
  const SessionResult r = run_session(ep.stream(), setup, opts);
  ep.finish();
  std::cerr << "session " << to_string(r.status) << " after " << r.ticks << " ticks: " << r.message << '\n';
  std::cerr << "log written to " << f.out << '\n';
  return r.status == SessionStatus::Completed ? kExitOk : kExitAgent;
}

int cmd_eval(CommonFlags f, const std::string& scenario, const std::string& experiment) {
  const auto& reg = eval::scenario_registry();
  const auto it = reg.find(scenario);
  if (it == reg.end()) {
    std::string ids;
    for (const auto& [id, fn] : reg) ids += (ids.empty() ? "" : ", ") + id;
    throw ValidationError("scenario", "unknown scenario \"" + scenario + "\"; registered: " + ids);
  }
  merge_config(f);
  json exp = nullptr;
  if (!experiment.empty()) {
    std::ifstream in(experiment);
    if (!in) throw ValidationError("experiment", "file not found: " + experiment);
    try {
      exp = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("experiment", e.what());
    }
    if (exp.contains("scenario") && exp["scenario"] != scenario)
      throw ValidationError("experiment.scenario", "file is for \"" + exp["scenario"].dump() + "\"");
  }
  eval::EvalOptions opts;
  opts.setup = setup_from(f, "eval_room.json", f.seed_set);
  opts.timeout_ms = timeout_ms(f);
  Simulation check(opts.setup);
  if (f.out.empty()) f.out = scenario + "_report.json";

  // Validate the experiment before waiting for an agent.
  if (scenario == "rod_and_box") eval::RodAndBoxConfig::from_json(exp.is_null() ? json::object() : exp);

  AgentEndpoint ep(f, opts.timeout_ms);
  eval::HabituationReport rep;
  try {
    rep = it->second(ep.stream(), exp, opts);
  } catch (const net::TimeoutError& e) {
    send_error(ep.stream(), 0, proto::ErrorCode::Timeout, e.what());
    throw AgentFailure(std::string("agent timed out: ") + e.what());
  } catch (const net::ClosedError& e) {
    throw AgentFailure(std::string("agent disconnected: ") + e.what());
  } catch (const proto::ProtocolError& e) {
    send_error(ep.stream(), 0, e.code(), e.what());
    throw AgentFailure(std::string("protocol error: ") + e.what());
  }
  ep.finish();
  eval::write_report(rep, f.out);
  std::cerr << "report written to " << f.out << '\n';
  for (const auto& flag : rep.flags) std::cerr << "flag: " << flag << '\n';
  if (rep.novelty_preference) {
    std::printf("novelty_preference: %.6f\n", *rep.novelty_preference);
  } else {
    std::printf("novelty_preference: null\n");
  }
  return kExitOk;
}

int cmd_replay(const std::string& path) {
  const SessionLog log = read_session_log(path);
  const ReplayResult r = replay(log);
  std::cout << r.summary() << '\n';
  if (r.truncated) std::cerr << "warning: log is truncated\n";
  if (r.first_divergence) {
    std::cerr << "first divergence at tick " << *r.first_divergence << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_inspect(const std::string& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("path", "file not found: " + path);
  char head[5] = {};
  in.read(head, 5);
  if (in.gcount() == 5 && static_cast<std::uint8_t>(head[4]) == kLogHeader) {
    const SessionLog log = read_session_log(path);
    json j;
    j["kind"] = "session_log";
    j["header"] = log.header;
    j["records"] = log.records.size();
    j["truncated"] = log.truncated;
    j["end"] = log.end ? json{{"status", to_string(log.end->status)}, {"ticks", log.end->ticks}, {"reason", log.end->reason}}
                       : json(nullptr);
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  }
  in.clear();
  in.seekg(0);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("path", "neither a session log nor JSON: " + std::string(e.what()));
  }
  json j;
  if (doc.contains("habituation_trials")) {
    const auto rep = eval::read_report(path);
    j["kind"] = "report";
    j["scenario"] = rep.scenario;
    j["habituation_trials"] = rep.habituation_trials.size();
    j["habituated_at"] = rep.habituated_at ? json(*rep.habituated_at) : json(nullptr);
    j["test_trials"] = rep.test_trials.size();
    j["novelty_preference"] = rep.novelty_preference ? json(*rep.novelty_preference) : json(nullptr);
    j["flags"] = rep.flags;
  } else if (doc.contains("scene_id")) {
    SceneSpec spec = SceneSpec::load(path);
    if (seed) spec.seed = *seed;
    const WorldState s = load_scene(spec);
    j["kind"] = "scene";
    j["scene_id"] = s.scene_id;
    j["seed"] = spec.seed;
    j["age_days"] = spec.age_days;
    j["objects"] = json::array();
    for (const auto& o : s.objects) j["objects"].push_back({{"id", o.id}, {"tags", o.tags}});
    char hash[19];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(state_hash(s)));
    j["state_hash"] = hash;
  } else {
    throw ValidationError("path", "unrecognised document " + path);
  }
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"Deterministic developmental-robotics simulator"};
  app.require_subcommand(1);

  CommonFlags run_f;
  auto* run = app.add_subcommand("run", "Serve one lockstep session to an agent and record it");
  run->add_option("--config", run_f.config, "JSON file with any of the flag values");
  add_endpoint_flags(run, run_f);
  run_f.o_max_ticks = run->add_option("--max-ticks", run_f.max_ticks, "Session length in ticks");
  run_f.o_out = run->add_option("--out", run_f.out, "Session log path");

  CommonFlags eval_f;
  std::string scenario, experiment;
  auto* ev = app.add_subcommand("eval", "Run an evaluation scenario against an agent");
  ev->add_option("scenario", scenario, "Scenario id")->required();
  ev->add_option("--experiment", experiment, "Scenario parameters JSON");
  ev->add_option("--config", eval_f.config, "JSON file with any of the flag values");
  add_endpoint_flags(ev, eval_f);
  eval_f.o_out = ev->add_option("--out", eval_f.out, "Report path");

  std::string log_path;
  auto* rp = app.add_subcommand("replay", "Re-simulate a session log and verify every observation");
  rp->add_option("log", log_path, "Session log")->required();

  std::string inspect_path;
  std::uint64_t inspect_seed = 0;
  auto* in = app.add_subcommand("inspect", "Summarise a scene, session log or report");
  in->add_option("path", inspect_path, "File to inspect")->required();
  auto* in_seed = in->add_option("--seed", inspect_seed, "Override the scene seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    run_f.seed_set = run_f.o_seed->count() > 0;
    eval_f.seed_set = eval_f.o_seed->count() > 0;
    if (*run) return cmd_run(run_f);
    if (*ev) return cmd_eval(eval_f, scenario, experiment);
    if (*rp) return cmd_replay(log_path);
    if (*in) return cmd_inspect(inspect_path, in_seed->count() ? std::optional(inspect_seed) : std::nullopt);
  } catch (const AgentFailure& e) {
    std::cerr << "sedro: " << e.what() << '\n';
    return kExitAgent;
  } catch (const net::ClosedError& e) {
    std::cerr << "sedro: agent disconnected: " << e.what() << '\n';
    return kExitAgent;
  } catch (const LogFormatError& e) {
    std::cerr << "sedro: corrupt log: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "sedro: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "sedro: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "sedro: " << e.what() << '\n';
    return kExitAgent;
  }
  return kExitUsage;
}
