#include "sedro/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace sedro::eval {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(EndedBy e) { return e == EndedBy::Cap ? "Cap" : "LookAway"; }

namespace {

constexpr double kPi = 3.14159265358979323846;

EndedBy ended_by_from(const std::string& s) {
  if (s == "Cap") return EndedBy::Cap;
  if (s == "LookAway") return EndedBy::LookAway;
  throw ValidationError("ended_by", "unknown value \"" + s + "\"");
}

// Reads `key` into `out` when present; rejects a wrong JSON type.
template <typename T>
void read_opt(const json& doc, const char* key, T& out, const std::string& prefix) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(prefix + key, "wrong type");
  }
}

void reject_unknown(const json& doc, std::initializer_list<const char*> known, const std::string& prefix) {
  if (!doc.is_object()) throw ValidationError(prefix.empty() ? "config" : prefix, "expected an object");
  for (const auto& [k, v] : doc.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
      throw ValidationError(prefix + k, "unknown key");
  }
}

std::uint64_t seconds_to_ticks(double s) { return static_cast<std::uint64_t>(std::llround(s * kTicksPerSecond)); }

}  // namespace

// ---- criterion ----

void HabituationCriterion::validate() const {
  if (window < 1) throw ValidationError("criterion.window", "must be >= 1");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("criterion.ratio", "must be in (0, 1)");
  if (min_trials < window) throw ValidationError("criterion.min_trials", "must be >= window");
  if (max_trials < min_trials) throw ValidationError("criterion.max_trials", "must be >= min_trials");
  if (!(lookaway_end > 0.0)) throw ValidationError("criterion.lookaway_end", "must be > 0");
  if (!(trial_cap >= lookaway_end)) throw ValidationError("criterion.trial_cap", "must be >= lookaway_end");
  if (!(blank >= 0.0)) throw ValidationError("criterion.blank", "must be >= 0");
  if (!(cone_half_angle_deg > 0.0 && cone_half_angle_deg < 90.0))
    throw ValidationError("criterion.cone_half_angle_deg", "must be in (0, 90)");
}

json HabituationCriterion::to_json() const {
  return {{"window", window},
          {"ratio", ratio},
          {"min_trials", min_trials},
          {"max_trials", max_trials},
          {"lookaway_end", lookaway_end},
          {"trial_cap", trial_cap},
          {"blank", blank},
          {"cone", cone},
          {"cone_half_angle_deg", cone_half_angle_deg}};
}

HabituationCriterion HabituationCriterion::from_json(const json& doc) {
  const std::string p = "criterion.";
  reject_unknown(doc, {"window", "ratio", "min_trials", "max_trials", "lookaway_end", "trial_cap", "blank", "cone",
                       "cone_half_angle_deg"},
                 p);
  HabituationCriterion c;
  read_opt(doc, "window", c.window, p);
  read_opt(doc, "ratio", c.ratio, p);
  read_opt(doc, "min_trials", c.min_trials, p);
  read_opt(doc, "max_trials", c.max_trials, p);
  read_opt(doc, "lookaway_end", c.lookaway_end, p);
  read_opt(doc, "trial_cap", c.trial_cap, p);
  read_opt(doc, "blank", c.blank, p);
  read_opt(doc, "cone", c.cone, p);
  read_opt(doc, "cone_half_angle_deg", c.cone_half_angle_deg, p);
  c.validate();
  return c;
}

// ---- measures ----

bool gaze_on_stimulus(const WorldState& state, std::span<const std::string> tags, const HabituationCriterion& crit) {
  const Gaze g = eye_gaze(state);
  auto tagged = [&](const Vec3& dir) {
    const auto hit = raycast(state, g.origin, dir);
    if (!hit || hit->kind != HitKind::Object) return false;
    const SceneObject* o = state.find(hit->id);
    return o && std::any_of(tags.begin(), tags.end(), [&](const std::string& t) { return o->has_tag(t); });
  };
  if (tagged(g.direction)) return true;
  if (!crit.cone) return false;
  // Two rings of eight rays at half and full aperture.
  const double full = crit.cone_half_angle_deg * kPi / 180.0;
  for (double a : {0.5 * full, full}) {
    for (int k = 0; k < 8; ++k) {
      const double phi = 2.0 * kPi * k / 8.0;
      const Vec3 off = std::cos(phi) * g.right + std::sin(phi) * g.up;
      const Vec3 dir = (std::cos(a) * g.direction + std::sin(a) * off).normalized();
      if (tagged(dir)) return true;
    }
  }
  return false;
}

bool habituation_reached(std::span<const double> t, const HabituationCriterion& crit) {
  const auto n = static_cast<int>(t.size());
  if (n < crit.min_trials || n < crit.window) return false;
  const auto w = static_cast<std::size_t>(crit.window);
  const double first = std::accumulate(t.begin(), t.begin() + crit.window, 0.0) / static_cast<double>(w);
  const double last = std::accumulate(t.end() - crit.window, t.end(), 0.0) / static_cast<double>(w);
  return last < crit.ratio * first;
}

bool habituation_reached(std::span<const Trial> trials, const HabituationCriterion& crit) {
  std::vector<double> t;
  t.reserve(trials.size());
  for (const auto& tr : trials) t.push_back(tr.looking_time);
  return habituation_reached(std::span<const double>(t), crit);
}

std::optional<double> novelty_preference(std::span<const Trial> test_trials) {
  double broken = 0.0, complete = 0.0;
  for (const auto& t : test_trials) {
    if (t.stimulus_id == "broken_rod") broken += t.looking_time;
    else if (t.stimulus_id == "complete_rod") complete += t.looking_time;
  }
  if (broken + complete <= 0.0) return std::nullopt;
  return broken / (broken + complete);
}

// ---- config ----

void RodAndBoxConfig::validate() const {
  auto positive = [](double v, const char* f) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(f, "must be > 0");
  };
  positive(rod_length, "rod_length");
  positive(rod_width, "rod_width");
  positive(box_width, "box_width");
  positive(box_lateral, "box_lateral");
  positive(box_depth, "box_depth");
  positive(distance, "distance");
  if (box_width >= rod_length) throw ValidationError("box_width", "must be shorter than rod_length");
  if (!(box_gap >= 0.0) || box_gap + box_depth >= distance) throw ValidationError("box_gap", "box must sit between the eyes and the rod");
  if (!(amplitude >= 0.0)) throw ValidationError("amplitude", "must be >= 0");
  if (!(frequency >= 0.0)) throw ValidationError("frequency", "must be >= 0");
  criterion.validate();
}

json RodAndBoxConfig::to_json() const {
  return {{"rod_length", rod_length},   {"rod_width", rod_width}, {"box_width", box_width},
          {"box_lateral", box_lateral}, {"box_depth", box_depth}, {"box_gap", box_gap},
          {"amplitude", amplitude},     {"frequency", frequency}, {"distance", distance},
          {"moving_in_test", moving_in_test}, {"criterion", criterion.to_json()}};
}

RodAndBoxConfig RodAndBoxConfig::from_json(const json& doc) {
  reject_unknown(doc, {"scenario", "rod_length", "rod_width", "box_width", "box_lateral", "box_depth", "box_gap",
                       "amplitude", "frequency", "distance", "moving_in_test", "criterion"},
                 "");
  RodAndBoxConfig c;
  read_opt(doc, "rod_length", c.rod_length, "");
  read_opt(doc, "rod_width", c.rod_width, "");
  read_opt(doc, "box_width", c.box_width, "");
  read_opt(doc, "box_lateral", c.box_lateral, "");
  read_opt(doc, "box_depth", c.box_depth, "");
  read_opt(doc, "box_gap", c.box_gap, "");
  read_opt(doc, "amplitude", c.amplitude, "");
  read_opt(doc, "frequency", c.frequency, "");
  read_opt(doc, "distance", c.distance, "");
  read_opt(doc, "moving_in_test", c.moving_in_test, "");
  if (doc.contains("criterion")) c.criterion = HabituationCriterion::from_json(doc["criterion"]);
  c.validate();
  return c;
}

// ---- scenario ----

namespace {

constexpr std::uint32_t kFirstDisplayId = 900;

struct Stimulus {
  std::string id;
  std::vector<std::string> features;
  std::vector<std::string> tags;  ///< gaze on any of these counts as looking
  bool occluded = false;
  bool broken = false;
  bool moving = true;
};

Stimulus habituation_display() { return {"habituation", {"connected", "moving", "occluder", "rod"}, {"box", "rod"}, true, false, true}; }
Stimulus complete_rod(bool moving) {
  std::vector<std::string> f{"connected", "rod"};
  if (moving) f.push_back("moving");
  std::sort(f.begin(), f.end());
  return {"complete_rod", f, {"rod"}, false, false, moving};
}
Stimulus broken_rod(bool moving) {
  std::vector<std::string> f{"rod", "segmented"};
  if (moving) f.push_back("moving");
  std::sort(f.begin(), f.end());
  return {"broken_rod", f, {"rod"}, false, true, moving};
}

// Display frame: x right, y away from the eyes, z up; fixed at the start of the run.
struct Frame {
  Vec3 center;
  Vec3 right, forward, up;
  Quat orientation;

  Vec3 at(double x, double y, double z) const { return center + x * right + y * forward + z * up; }
};

// Anchored to the head with the eyes centred, whatever the agent did with them.
Frame display_frame(WorldState s, double distance) {
  s.body.eye_angles = {};
  const Gaze g = eye_gaze(s);
  Frame f;
  f.forward = g.direction;
  f.up = g.up;
  f.right = g.right;
  f.center = g.origin + distance * g.direction;
  Mat3 r;
  r.col(0) = f.right;
  r.col(1) = f.forward;
  r.col(2) = f.up;
  f.orientation = Quat(r).normalized();
  return f;
}

SceneObject make_box(std::uint32_t id, const Frame& f, const Vec3& pos, const Vec3& half, Color color,
                     std::vector<std::string> tags) {
  SceneObject o;
  o.id = id;
  o.shape = Shape::box(half);
  o.pose = Pose{pos, f.orientation};
  o.color = color;
  std::sort(tags.begin(), tags.end());
  o.tags = std::move(tags);
  return o;
}

std::vector<SceneObject> build_display(const Stimulus& st, const RodAndBoxConfig& cfg, const Frame& f,
                                       std::uint64_t tick) {
  std::vector<SceneObject> out;
  std::uint32_t id = kFirstDisplayId;
  auto rod = [&](double z, double half_len) {
    SceneObject o = make_box(id++, f, f.at(0.0, 0.0, z), Vec3(cfg.rod_width / 2, cfg.rod_width / 2, half_len),
                             Color{220, 40, 40}, {"rod", "stimulus"});
    o.mass = 0.1;
    o.kinematic = true;
    if (st.moving && cfg.amplitude > 0.0 && cfg.frequency > 0.0)
      o.motion = Oscillation{o.pose.position, f.right, cfg.amplitude, cfg.frequency, tick};
    out.push_back(std::move(o));
  };
  if (st.broken) {
    const double seg = (cfg.rod_length - cfg.box_width) / 4.0;
    rod(-(cfg.box_width / 2 + seg), seg);
    rod(cfg.box_width / 2 + seg, seg);
  } else {
    rod(0.0, cfg.rod_length / 2);
  }
  if (st.occluded) {
    const Vec3 pos = f.at(0.0, -(cfg.box_gap + cfg.box_depth / 2), 0.0);
    out.push_back(make_box(id++, f, pos, Vec3(cfg.box_lateral / 2, cfg.box_depth / 2, cfg.box_width / 2),
                           Color{40, 90, 200}, {"box", "stimulus"}));
  }
  return out;
}

void insert_display(WorldState& s, std::vector<SceneObject> display) {
  for (auto& o : display) s.objects.push_back(std::move(o));
  std::sort(s.objects.begin(), s.objects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

void remove_display(WorldState& s) {
  std::erase_if(s.objects, [](const SceneObject& o) { return o.id >= kFirstDisplayId; });
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Stimulus advertisement for scripted agents: where to look, in the head frame
// relative to the eye, at oscillation phase zero.
json stimulus_event(const Stimulus& st, const std::string& phase, int trial, const RodAndBoxConfig& cfg,
                    const Frame& f, const WorldState& s, std::uint64_t tick) {
  const auto& eyes = s.model->eyes();
  const Pose& head = s.body.link_poses[static_cast<std::size_t>(eyes.head_link)];
  const Vec3 eye = head.apply(eyes.offset);
  const double fix_z = (cfg.rod_length + cfg.box_width) / 4.0;  // centre of the upper visible part
  const double away_z = cfg.rod_length / 2 + 0.04;
  json j;
  j["phase"] = phase;
  j["trial"] = trial;
  j["stimulus"] = st.id;
  j["features"] = st.features;
  j["tags"] = st.tags;
  j["eye_max_speed"] = eyes.max_speed;
  j["fixation"] = vec_json(head.inverse_rotate(f.at(0.0, 0.0, fix_z) - eye));
  j["lookaway"] = vec_json(head.inverse_rotate(f.at(0.0, 0.0, away_z) - eye));
  j["motion"] = {{"axis", vec_json(head.inverse_rotate(f.right))},
                 {"amplitude", st.moving ? cfg.amplitude : 0.0},
                 {"frequency", st.moving ? cfg.frequency : 0.0},
                 {"start_tick", tick}};
  return j;
}

class Runner {
 public:
  Runner(net::Stream& s, const RodAndBoxConfig& cfg, const EvalOptions& opts)
      : stream_(s), cfg_(cfg), opts_(opts), crit_(cfg.criterion), sim_(opts.setup) {
    // Perception only: no caregiver, no hunger.
    sim_.world_mut().intero.decay_rate = 0.0;
  }

  HabituationReport run() {
    HabituationReport rep;
    rep.criterion = crit_;
    rep.seed = sim_.world().rng.seed;
    server_handshake(stream_, opts_.versions, opts_.timeout_ms);
    // Opening blank lets the body settle; the display is then placed
    // straight ahead of the resting head.
    blank();
    frame_ = display_frame(sim_.world(), cfg_.distance);

    const Stimulus hab = habituation_display();
    for (int k = 1; k <= crit_.max_trials; ++k) {
      rep.habituation_trials.push_back(run_trial(hab, "habituation", k));
      blank();
      if (habituation_reached(std::span<const Trial>(rep.habituation_trials), crit_)) {
        rep.habituated_at = k;
        break;
      }
    }
    if (!rep.habituated_at) {
      rep.flags.push_back("NotHabituated");
    } else {
      // Even seeds open with the complete rod.
      const bool complete_first = rep.seed % 2 == 0;
      for (int k = 1; k <= 6; ++k) {
        const bool complete = (k % 2 == 1) == complete_first;
        const Stimulus st = complete ? complete_rod(cfg_.moving_in_test) : broken_rod(cfg_.moving_in_test);
        rep.test_trials.push_back(run_trial(st, "test", k));
        if (k < 6) blank();
      }
      rep.novelty_preference = novelty_preference(std::span<const Trial>(rep.test_trials));
      if (!rep.novelty_preference) rep.flags.push_back("NoLooking");
    }

    const std::uint64_t t = sim_.tick();
    json summary = {{"ticks", t}, {"scenario", rep.scenario}};
    write_frame(stream_, {proto::FrameType::Event, t,
                          proto::encode_event({proto::EventKind::SessionEnd, summary})});
    write_frame(stream_, {proto::FrameType::Bye, t, proto::encode_bye(proto::ByeStatus::Completed)});
    return rep;
  }

 private:
  void tick_once() {
    const TickExchange x = serve_tick(stream_, sim_, opts_.timeout_ms, false);
    if (x.outcome == TickOutcome::Bye) throw net::ClosedError("agent ended the session during evaluation");
  }

  Trial run_trial(const Stimulus& st, const std::string& phase, int index) {
    WorldState& w = sim_.world_mut();
    const std::uint64_t t0 = w.tick;
    insert_display(w, build_display(st, cfg_, frame_, t0));
    sim_.push_event({proto::EventKind::TrialStart, {{"phase", phase}, {"trial", index}, {"stimulus", st.id}}});
    sim_.push_event({proto::EventKind::Stimulus, stimulus_event(st, phase, index, cfg_, frame_, w, t0)});

    Trial tr;
    tr.index = index;
    tr.stimulus_id = st.id;
    tr.start_tick = t0;
    const std::uint64_t cap = seconds_to_ticks(crit_.trial_cap);
    const std::uint64_t away_end = seconds_to_ticks(crit_.lookaway_end);
    std::uint64_t on = 0, away = 0;
    tr.ended_by = EndedBy::Cap;
    for (std::uint64_t k = 0; k < cap; ++k) {
      const bool g = gaze_on_stimulus(sim_.world(), st.tags, crit_);
      tr.gaze.push_back(g ? 1 : 0);
      on += g ? 1 : 0;
      away = g ? 0 : away + 1;
      tick_once();
      if (away >= away_end) {
        tr.ended_by = EndedBy::LookAway;
        break;
      }
    }
    tr.looking_time = ticks_to_seconds(on);
    remove_display(sim_.world_mut());
    sim_.push_event({proto::EventKind::TrialEnd,
                     {{"phase", phase},
                      {"trial", index},
                      {"stimulus", st.id},
                      {"looking_time", tr.looking_time},
                      {"ended_by", to_string(tr.ended_by)}}});
    return tr;
  }

  void blank() {
    const std::uint64_t n = seconds_to_ticks(crit_.blank);
    for (std::uint64_t k = 0; k < n; ++k) tick_once();
  }

  net::Stream& stream_;
  RodAndBoxConfig cfg_;
  EvalOptions opts_;
  HabituationCriterion crit_;
  Simulation sim_;
  Frame frame_;
};

}  // namespace

HabituationReport run_rod_and_box(net::Stream& agent, const RodAndBoxConfig& config, const EvalOptions& opts) {
  config.validate();
  EvalOptions o = opts;
  o.setup.script.reset();
  Runner r(agent, config, o);
  return r.run();
}

// ---- report I/O ----

fs::path gaze_csv_path(const fs::path& report_path) {
  fs::path p = report_path;
  p.replace_extension();
  p += "_gaze.csv";
  return p;
}

namespace {

json trial_json(const Trial& t) {
  return {{"index", t.index},
          {"stimulus", t.stimulus_id},
          {"looking_time", t.looking_time},
          {"ended_by", to_string(t.ended_by)},
          {"start_tick", t.start_tick},
          {"ticks", t.gaze.size()}};
}

Trial trial_from(const json& j, std::vector<std::size_t>& ticks) {
  Trial t;
  t.index = j.at("index").get<int>();
  t.stimulus_id = j.at("stimulus").get<std::string>();
  t.looking_time = j.at("looking_time").get<double>();
  t.ended_by = ended_by_from(j.at("ended_by").get<std::string>());
  t.start_tick = j.at("start_tick").get<std::uint64_t>();
  ticks.push_back(j.at("ticks").get<std::size_t>());
  return t;
}

}  // namespace

void write_report(const HabituationReport& r, const fs::path& path) {
  const fs::path csv = gaze_csv_path(path);
  json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["criterion"] = r.criterion.to_json();
  j["habituation_trials"] = json::array();
  for (const auto& t : r.habituation_trials) j["habituation_trials"].push_back(trial_json(t));
  j["habituated_at"] = r.habituated_at ? json(*r.habituated_at) : json(nullptr);
  j["test_trials"] = json::array();
  for (const auto& t : r.test_trials) j["test_trials"].push_back(trial_json(t));
  j["novelty_preference"] = r.novelty_preference ? json(*r.novelty_preference) : json(nullptr);
  j["flags"] = r.flags;
  j["gaze_trace"] = csv.filename().string();

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed on report " + path.string());

  std::ofstream c(csv, std::ios::trunc);
  if (!c) throw IoError("cannot write gaze trace " + csv.string());
  c << "phase,trial,stimulus,tick,gaze\n";
  auto rows = [&](const std::vector<Trial>& trials, const char* phase) {
    for (const auto& t : trials)
      for (std::size_t k = 0; k < t.gaze.size(); ++k)
        c << phase << ',' << t.index << ',' << t.stimulus_id << ',' << t.start_tick + k << ','
          << static_cast<int>(t.gaze[k]) << '\n';
  };
  rows(r.habituation_trials, "habituation");
  rows(r.test_trials, "test");
  if (!c) throw IoError("write failed on gaze trace " + csv.string());
}

HabituationReport read_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  HabituationReport r;
  std::vector<std::size_t> hab_ticks, test_ticks;
  try {
    const json j = json::parse(in);
    r.scenario = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.criterion = HabituationCriterion::from_json(j.at("criterion"));
    for (const auto& t : j.at("habituation_trials")) r.habituation_trials.push_back(trial_from(t, hab_ticks));
    if (!j.at("habituated_at").is_null()) r.habituated_at = j["habituated_at"].get<int>();
    for (const auto& t : j.at("test_trials")) r.test_trials.push_back(trial_from(t, test_ticks));
    if (!j.at("novelty_preference").is_null()) r.novelty_preference = j["novelty_preference"].get<double>();
    r.flags = j.at("flags").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError("report", e.what());
  }

  const fs::path csv = gaze_csv_path(path);
  std::ifstream c(csv);
  if (!c) throw IoError("cannot open gaze trace " + csv.string());
  std::string line;
  std::getline(c, line);
  std::size_t hi = 0, ti = 0;
  while (std::getline(c, line)) {
    if (line.empty()) continue;
    const bool test = line.rfind("test,", 0) == 0;
    auto& trials = test ? r.test_trials : r.habituation_trials;
    const auto& want = test ? test_ticks : hab_ticks;
    std::size_t& i = test ? ti : hi;
    while (i < trials.size() && trials[i].gaze.size() == want[i]) ++i;
    if (i >= trials.size()) throw ValidationError("gaze_trace", "more rows than trial ticks");
    trials[i].gaze.push_back(line.back() == '1' ? 1 : 0);
  }
  for (std::size_t i = 0; i < r.habituation_trials.size(); ++i)
    if (r.habituation_trials[i].gaze.size() != hab_ticks[i]) throw ValidationError("gaze_trace", "fewer rows than trial ticks");
  for (std::size_t i = 0; i < r.test_trials.size(); ++i)
    if (r.test_trials[i].gaze.size() != test_ticks[i]) throw ValidationError("gaze_trace", "fewer rows than trial ticks");
  return r;
}

const std::map<std::string, ScenarioFn>& scenario_registry() {
  static const std::map<std::string, ScenarioFn> reg{
      {"rod_and_box", [](net::Stream& s, const json& cfg, const EvalOptions& o) {
         return run_rod_and_box(s, RodAndBoxConfig::from_json(cfg.is_null() ? json::object() : cfg), o);
       }}};
  return reg;
}

}  // namespace sedro::eval
