// One PASS/FAIL line per acceptance criterion. Exit status 0 only when all pass.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <string>

#include "sedro/eval.hpp"
#include "sedro/interoception.hpp"
#include "support.hpp"

using namespace sedro;
using namespace sedro::test;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int shell(const std::string& cmd, std::string* out = nullptr) {
  FILE* p = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!p) return -1;
  char buf[4096];
  std::size_t n = 0;
  std::string text;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) text.append(buf, n);
  const int status = ::pclose(p);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Bytes file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

// --- criteria ------------------------------------------------------------

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "sedro_acceptance";
  fs::create_directories(dir);
  const fs::path a = dir / "a.sedrolog", b = dir / "b.sedrolog";
  const std::string agent = std::string("--agent \"") + SEDRO_AGENT + " --policy random --seed 11\"";
  const std::string base = std::string("'") + SEDRO_CLI + "' run --max-ticks 10000 --seed 5 " + agent + " --out ";
  const auto t0 = Clock::now();
  std::string out;
  if (shell(base + "'" + a.string() + "'", &out) != 0) return {false, "first run failed: " + out};
  if (shell(base + "'" + b.string() + "'", &out) != 0) return {false, "second run failed: " + out};
  const Bytes ba = file_bytes(a), bb = file_bytes(b);
  const std::size_t records = read_session_log(a).records.size();
  const int rc = shell(std::string("'") + SEDRO_CLI + "' replay '" + a.string() + "'", &out);
  const double wall = seconds_since(t0);
  const bool ok = ba == bb && !ba.empty() && records >= 10000 && rc == 0 &&
                  out.find("0 divergences") != std::string::npos && wall < 60.0;
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return {ok, fmt("%zu ticks, logs %s (%zu bytes), replay exit %d \"%s\", %.1f s wall < 60 s", records,
                  ba == bb ? "identical" : "DIFFER", ba.size(), rc, out.c_str(), wall)};
}

Outcome integrator() {
  const json sphere = {{"id", 1},
                       {"shape", {{"type", "sphere"}, {"radius", 0.1}}},
                       {"position", {3.0, 0.0, 1000.0}},
                       {"mass", 1.0}};
  WorldState s = world_from(scene_doc({sphere}));
  const double z0 = s.find(1)->pose.position.z();
  const double g = 9.81;
  double worst = 0.0;
  for (int n = 1; n <= 500; ++n) {
    s = step_world(std::move(s), MotorCommand{}, CaregiverCommand{});
    const double drop = z0 - s.find(1)->pose.position.z();
    const double expect = g * kDt * kDt * n * (n + 1) / 2.0;
    worst = std::max(worst, std::abs(drop - expect) / expect);
  }
  return {worst <= 1e-9, fmt("max relative error %.3e over 1..500 steps (tol 1e-9)", worst)};
}

Outcome sensor_contracts() {
  Simulation sim(setup_for("nursery"));
  std::size_t bad_finite = 0, bad_touch = 0, bad_energy = 0, bad_size = 0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const Observation o = sim.observe();
    auto finite = [](const auto& arr) {
      for (float f : arr)
        if (!std::isfinite(f)) return false;
      return true;
    };
    if (!finite(o.proprio) || !finite(o.eye_pose) || !finite(o.vestibular) || !finite(o.interoception)) ++bad_finite;
    for (auto b : o.touch)
      if (b > 1) ++bad_touch;
    if (!(o.interoception[0] >= 0.0f && o.interoception[0] <= 1.0f)) ++bad_energy;
    if (proto::encode_observation(o).size() != 4332) ++bad_size;
    sim.step(random_action(2024, t));
  }
  const bool ok = !bad_finite && !bad_touch && !bad_energy && !bad_size;
  return {ok, fmt("1000 random ticks: non-finite %zu, non-binary touch %zu, energy out of range %zu, "
                  "payload size mismatches %zu",
                  bad_finite, bad_touch, bad_energy, bad_size)};
}

std::size_t distinct_pixels(const std::vector<std::uint8_t>& img) {
  std::set<std::array<std::uint8_t, 3>> seen;
  for (std::size_t i = 0; i + 2 < img.size(); i += 3) seen.insert({img[i], img[i + 1], img[i + 2]});
  return seen.size();
}

Outcome developmental_gating() {
  const json doc = load_json(asset("schedule/default.json"));
  // Strength at the two ages straight from the file's ramps.
  double s0 = 0, s365 = 0;
  for (const auto& st : doc["stages"]) {
    if (st["window"][0].get<double>() == 0.0) s0 = st["strength"][0].get<double>();
    if (st["window"][1].get<double>() == 365.0) s365 = st["strength"][1].get<double>();
  }
  const Schedule sched = Schedule::load(asset("schedule/default.json"));
  const WorldState w = world_for("nursery");
  Action a;
  for (std::size_t j = 0; j < kNumMuscles; ++j) a.muscle[j] = (j % 2 ? 0.7 : -0.4);
  const MotorCommand young = apply_action(a, sched.stage_at(0.0), *w.model);
  const MotorCommand old = apply_action(a, sched.stage_at(365.0), *w.model);
  double nt = 0, dt = 0, worst = 0;
  for (std::size_t j = 0; j < kNumMuscles; ++j) {
    nt += std::abs(young.torque[j]);
    dt += std::abs(old.torque[j]);
    if (old.torque[j] != 0.0) worst = std::max(worst, std::abs(young.torque[j] / old.torque[j] - s0 / s365));
  }
  const double ratio = nt / dt;
  const bool torque_ok = std::abs(ratio - s0 / s365) <= 1e-12 && worst <= 1e-12;

  // Fovea detail across ages, facing a striped display in the evaluation room.
  const WorldState probe = world_for("eval_room");
  const Gaze g = eye_gaze(probe);
  json stripes = load_json(asset("scenes/eval_room.json"));
  for (int k = 0; k < 24; ++k) {
    const Vec3 c = g.origin + 0.8 * g.direction + (k - 11.5) * 0.03 * g.right;
    stripes["objects"].push_back({{"id", 500 + k},
                                  {"shape", {{"type", "box"}, {"half_extents", {0.012, 0.012, 0.2}}}},
                                  {"position", {c.x(), c.y(), c.z()}},
                                  {"color", {20 + 9 * k, 230 - 8 * k, (40 * k) % 256}}});
  }
  const WorldState wall = load_scene(SceneSpec::from_json(stripes, asset("scenes")));
  bool mono = true;
  std::string counts;
  std::size_t prev = 0;
  for (double age : {0.0, 90.0, 180.0, 270.0, 365.0}) {
    const std::size_t n = distinct_pixels(sense_retina(wall, sched.stage_at(age).acuity_factor).fovea);
    mono = mono && n >= prev;
    if (age > 0.0) counts += " ";
    counts += std::to_string(n);
    prev = n;
  }
  return {torque_ok && mono,
          fmt("torque ratio %.6f vs strength ratio %.6f (%.2f/%.2f); distinct fovea values at 0/90/180/270/365 d: %s",
              ratio, s0 / s365, s0, s365, counts.c_str())};
}

Outcome homeostasis() {
  // With the caregiver: a full simulated day at rest.
  Simulation with(setup_for("nursery"));
  double lowest = with.world().intero.energy;
  int feeds = 0;
  Behavior prev = Behavior::Idle;
  for (std::uint64_t t = 0; t < 24ull * 3600 * kTicksPerSecond; ++t) {
    with.step(Action{});
    lowest = std::min(lowest, with.world().intero.energy);
    const Behavior b = with.world().caregiver.behavior;
    feeds += b == Behavior::Feed && prev != Behavior::Feed;
    prev = b;
  }

  // Without: the tank runs dry.
  Simulation alone(setup_for("nursery"));
  alone.world_mut().caregiver.script = nullptr;
  std::uint64_t empty_at = 0;
  for (std::uint64_t t = 0; t < 16000ull * kTicksPerSecond; ++t) {
    alone.step(Action{});
    if (alone.world().intero.energy <= 0.0) {
      empty_at = alone.tick();
      break;
    }
  }
  const double empty_s = ticks_to_seconds(empty_at);
  const bool ok = lowest > 0.0 && empty_at > 0 && std::abs(empty_s - 14400.0) <= 1.0;
  return {ok, fmt("with caregiver: lowest energy %.4f over 24 h (%d feeds); without: empty at %.2f s "
                  "(target 14400 +/- 1)",
                  lowest, feeds, empty_s)};
}

Outcome habituation_criterion() {
  const eval::HabituationCriterion c;
  std::vector<double> v;
  for (int k = 1; k <= c.max_trials; ++k) v.push_back(60.0 * std::pow(0.7, k - 1));
  // Brute force: every prefix, every window sum written out.
  auto brute = [&](const std::vector<double>& xs) -> int {
    for (int n = c.min_trials; n <= static_cast<int>(xs.size()); ++n) {
      double first = 0, last = 0;
      for (int i = 0; i < c.window; ++i) first += xs[static_cast<std::size_t>(i)], last += xs[static_cast<std::size_t>(n - c.window + i)];
      if (last / c.window < c.ratio * (first / c.window)) return n;
    }
    return 0;
  };
  auto lib = [&](const std::vector<double>& xs) -> int {
    for (std::size_t n = 1; n <= xs.size(); ++n)
      if (eval::habituation_reached(std::span(xs).first(n), c)) return static_cast<int>(n);
    return 0;
  };
  const int at = lib(v);
  int constant_hits = 0;
  for (double level : {0.5, 5.0, 12.0, 60.0}) {
    const std::vector<double> flat(static_cast<std::size_t>(c.max_trials), level);
    constant_hits += lib(flat) != 0;
  }
  const bool ok = at == 6 && brute(v) == 6 && constant_hits == 0;
  return {ok, fmt("geometric decay habituates at trial %d (brute force %d, expected 6); constant sequences "
                  "triggering: %d of 4",
                  at, brute(v), constant_hits)};
}

struct EvalRun {
  eval::HabituationReport report;
  double wall = 0.0;
};

EvalRun run_eval(const std::string& policy, std::uint64_t seed) {
  eval::EvalOptions opts;
  opts.setup = setup_for("eval_room");
  opts.setup.seed = seed;
  opts.timeout_ms = 30000;
  const auto t0 = Clock::now();
  EvalRun r;
  r.report = with_client([&](net::Stream& s) { return eval::run_rod_and_box(s, eval::RodAndBoxConfig{}, opts); },
                         [&](net::Stream& c) {
                           auto p = agent::make_policy(policy, seed);
                           agent::run_client(c, *p, {});
                         });
  r.wall = seconds_since(t0);
  return r;
}

Outcome rod_and_box() {
  const EvalRun fam = run_eval("familiarity", 1);
  const EvalRun nov = run_eval("novelty", 1);
  const EvalRun sym = run_eval("symmetric", 1);
  auto pref = [](const EvalRun& r) { return r.report.novelty_preference.value_or(std::nan("")); };
  double broken = 0, complete = 0;
  for (const auto& t : sym.report.test_trials) (t.stimulus_id == "broken_rod" ? broken : complete) += t.looking_time;
  const double gap = std::abs(broken - complete);
  const double slowest = std::max({fam.wall, nov.wall, sym.wall});
  const bool ok = pref(fam) < 0.45 && pref(nov) > 0.55 && gap <= kDt + 1e-9 && slowest < 120.0;
  return {ok, fmt("familiarity %.4f < 0.45 (habituated at %d), novelty %.4f > 0.55 (habituated at %d), "
                  "symmetric %.4f with |broken - complete| = %.3f s <= one tick, slowest run %.1f s < 120 s",
                  pref(fam), fam.report.habituated_at.value_or(0), pref(nov), nov.report.habituated_at.value_or(0),
                  pref(sym), gap, slowest)};
}

Outcome protocol_vectors() {
  using namespace proto;
  int mismatched = 0;
  auto golden = [&](const char* name, const Frame& f) { mismatched += encode_frame(f) != file_bytes(fixture(name)); };
  const std::uint16_t client[] = {1, 2};
  const std::uint16_t server[] = {1};
  golden("hello_client.bin", {FrameType::Hello, 0, encode_hello(client)});
  golden("hello_server.bin", {FrameType::Hello, 0, encode_hello(server)});

  Observation o;
  o.tick = 42;
  for (std::size_t i = 0; i < o.fovea.size(); ++i) o.fovea[i] = static_cast<std::uint8_t>((i * 7) % 256);
  for (std::size_t i = 0; i < o.periphery.size(); ++i) o.periphery[i] = static_cast<std::uint8_t>((i * 13 + 5) % 256);
  for (std::size_t i = 0; i < o.touch.size(); ++i) o.touch[i] = i % 3 == 0;
  for (std::size_t i = 0; i < o.proprio.size(); ++i) o.proprio[i] = static_cast<float>((static_cast<int>(i) - 53) * 0.01);
  o.eye_pose = {0.1f, -0.2f, 0.05f};
  o.vestibular = {0.5f, -0.25f, 0.125f, 0.0f, 0.0f, -1.0f};
  o.interoception = {0.75f, 0.0f, 0.0f, 0.0f};
  golden("obs.bin", {FrameType::Obs, 42, encode_observation(o)});

  std::array<float, kNumActionChannels> act{};
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = static_cast<float>((static_cast<int>(i) - 28) / 28.0);
  golden("act.bin", {FrameType::Act, 42, encode_action(act)});
  golden("event_utterance.bin",
         {FrameType::Event, 7, encode_event({EventKind::Utterance, {{"tick", 7}, {"tokens", {101, 7, 7, 102}}}})});

  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const ProtocolError& e) {
      return static_cast<int>(e.code());
    } catch (const std::exception&) {
      return -1;
    }
    return 0;
  };
  int wrong = 0;
  std::string why;
  auto expect = [&](const char* what, int got, ErrorCode want) {
    if (got != static_cast<int>(want)) ++wrong, why += std::string(" ") + what;
  };
  expect("short ACT", code_of([] { decode_action(Bytes(223, 0)); }), ErrorCode::BadPayload);
  std::string short_msg;
  try {
    decode_action(Bytes(223, 0));
  } catch (const ProtocolError& e) {
    short_msg = e.what();
  }
  if (short_msg.find("expected 224") == std::string::npos) ++wrong, why += " short-ACT-message";
  Bytes bad_magic = encode_hello(server);
  std::copy_n("XXXX", 4, bad_magic.begin());
  expect("bad magic", code_of([&] { negotiate(decode_hello(bad_magic), server); }), ErrorCode::BadMagic);
  const std::uint16_t v2[] = {2};
  expect("no mutual version", code_of([&] { negotiate(decode_hello(encode_hello(v2)), server); }),
         ErrorCode::NoMutualVersion);
  Bytes unknown = encode_frame({FrameType::Bye, 0, encode_bye(ByeStatus::Completed)});
  unknown[4] = 0x42;
  expect("unknown type", code_of([&] { decode_frame(unknown); }), ErrorCode::BadFrame);
  Bytes tiny = encode_frame({FrameType::Bye, 0, encode_bye(ByeStatus::Completed)});
  tiny[0] = 12;
  expect("length < 13", code_of([&] { payload_size_from_header(std::span(tiny).first(kHeaderSize)); }),
         ErrorCode::BadFrame);
  std::array<float, kNumActionChannels> nan_act{};
  nan_act[9] = std::nanf("");
  bool nan_rejected = false;
  try {
    decode_action(encode_action(nan_act));
  } catch (const NonFiniteActionError&) {
    nan_rejected = true;
  }
  if (!nan_rejected) ++wrong, why += " non-finite";

  return {mismatched == 0 && wrong == 0,
          fmt("%d of 5 golden frames differ; %d of 7 malformed cases wrong%s", mismatched, wrong, why.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"determinism", determinism},
      {"integrator", integrator},
      {"sensor_contracts", sensor_contracts},
      {"developmental_gating", developmental_gating},
      {"habituation_criterion", habituation_criterion},
      {"rod_and_box", rod_and_box},
      {"protocol_golden_vectors", protocol_vectors},
      {"homeostasis", homeostasis},
  };
  // Optional arguments pick criteria by name.
  const std::set<std::string> only(argv + 1, argv + argc);
  for (const auto& name : only) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == name; })) {
      std::fprintf(stderr, "unknown criterion \"%s\"\n", name.c_str());
      return 2;
    }
  }
  const auto t0 = Clock::now();
  for (const auto& [name, fn] : criteria)
    if (only.empty() || only.count(name)) report(name, fn);
  std::printf("%s: %d failing criteria, %.1f s total\n", failures ? "FAIL" : "PASS", failures, seconds_since(t0));
  return failures ? 1 : 0;
}
