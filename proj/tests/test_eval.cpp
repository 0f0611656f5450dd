#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "sedro/eval.hpp"
#include "support.hpp"

using namespace sedro;
using namespace sedro::test;
using nlohmann::json;

namespace {

// Eyes turned hard to one side from the first tick.
class AvertedPolicy : public agent::Policy {
 public:
  Action act(const Observation&, const std::vector<proto::Event>&) override {
    Action a;
    a.eye[0] = 1.0;
    return a;
  }
};

eval::HabituationReport run_eval(const std::function<std::unique_ptr<agent::Policy>()>& make, std::uint64_t seed,
                                 eval::RodAndBoxConfig cfg = {}) {
  eval::EvalOptions opts;
  opts.setup = setup_for("eval_room");
  opts.setup.seed = seed;
  opts.timeout_ms = 10000;
  return with_client(
      [&](net::Stream& s) { return eval::run_rod_and_box(s, cfg, opts); },
      [&](net::Stream& c) {
        auto p = make();
        agent::run_client(c, *p, {});
      });
}

eval::HabituationReport run_eval(const std::string& policy, std::uint64_t seed, eval::RodAndBoxConfig cfg = {}) {
  return run_eval([&] { return agent::make_policy(policy, seed); }, seed, cfg);
}

// Independent reading of the criterion: windows of the raw list.
std::optional<int> first_habituated(const std::vector<double>& v, int window, double ratio, int min_trials) {
  for (int n = 1; n <= static_cast<int>(v.size()); ++n) {
    if (n < min_trials || n < window) continue;
    double first = 0, last = 0;
    for (int i = 0; i < window; ++i) {
      first += v[static_cast<std::size_t>(i)];
      last += v[static_cast<std::size_t>(n - window + i)];
    }
    if (last < ratio * first) return n;
  }
  return std::nullopt;
}

std::optional<int> first_by_library(const std::vector<double>& v, const eval::HabituationCriterion& c) {
  for (std::size_t n = 1; n <= v.size(); ++n)
    if (eval::habituation_reached(std::span(v).first(n), c)) return static_cast<int>(n);
  return std::nullopt;
}

double total(const std::vector<eval::Trial>& trials, const std::string& stimulus) {
  double s = 0;
  for (const auto& t : trials)
    if (t.stimulus_id == stimulus) s += t.looking_time;
  return s;
}

json display_obj(std::uint32_t id, const Vec3& c, const std::string& tag, const Vec3& half) {
  return {{"id", id},
          {"shape", {{"type", "box"}, {"half_extents", {half.x(), half.y(), half.z()}}}},
          {"position", {c.x(), c.y(), c.z()}},
          {"tags", {tag}}};
}

}  // namespace

// --- criterion -----------------------------------------------------------

TEST(Criterion, GeometricDeclineHabituatesAtTrialSix) {
  std::vector<double> v;
  for (int k = 1; k <= 14; ++k) v.push_back(60.0 * std::pow(0.7, k - 1));
  const eval::HabituationCriterion c;
  EXPECT_EQ(first_by_library(v, c), 6);
  EXPECT_EQ(first_habituated(v, 3, 0.5, 6), 6);
}

TEST(Criterion, ConstantLookingNeverHabituates) {
  const std::vector<double> v(14, 12.0);
  EXPECT_FALSE(first_by_library(v, {}));
}

TEST(Criterion, StepDownHabituatesAtSix) {
  const std::vector<double> v{60, 60, 60, 10, 10, 10};
  EXPECT_TRUE(eval::habituation_reached(v, {}));
  EXPECT_FALSE(eval::habituation_reached(std::span(v).first(5), {}));
}

TEST(Criterion, BoundaryIsStrict) {
  const std::vector<double> v{10, 10, 10, 5, 5, 5};
  EXPECT_FALSE(eval::habituation_reached(v, {}));
}

TEST(CriterionProperty, AgreesWithIndependentReadingAndIsScaleInvariant) {
  CounterRng rng{99};
  for (std::uint64_t trial = 0; trial < 500; ++trial) {
    std::vector<double> v;
    double level = rng.uniform(5, 60, trial, RngStream::Eval, 0);
    for (std::uint64_t k = 0; k < 14; ++k) {
      level *= rng.uniform(0.5, 1.1, trial, RngStream::Eval, k + 1);
      v.push_back(level);
    }
    eval::HabituationCriterion c;
    c.window = 2 + static_cast<int>(trial % 3);
    c.min_trials = std::max(c.window, 3 + static_cast<int>(trial % 5));
    const auto lib = first_by_library(v, c);
    ASSERT_EQ(lib, first_habituated(v, c.window, c.ratio, c.min_trials)) << trial;
    for (double scale : {0.01, 3.0, 1000.0}) {
      std::vector<double> w = v;
      for (double& x : w) x *= scale;
      ASSERT_EQ(first_by_library(w, c), lib) << trial << " x" << scale;
    }
  }
}

TEST(Criterion, ValidationNamesTheField) {
  eval::HabituationCriterion c;
  c.window = 7;
  try {
    c.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "criterion.min_trials");
  }
  c = {};
  c.ratio = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(eval::HabituationCriterion::from_json({{"windw", 3}}), ValidationError);
  EXPECT_THROW(eval::HabituationCriterion::from_json({{"window", "3"}}), ValidationError);
  EXPECT_EQ(eval::HabituationCriterion::from_json(eval::HabituationCriterion{}.to_json()), eval::HabituationCriterion{});
}

TEST(NoveltyPreference, RatioOfBrokenLooking) {
  std::vector<eval::Trial> t(4);
  t[0].stimulus_id = "complete_rod", t[0].looking_time = 3;
  t[1].stimulus_id = "broken_rod", t[1].looking_time = 9;
  t[2].stimulus_id = "complete_rod", t[2].looking_time = 1;
  t[3].stimulus_id = "broken_rod", t[3].looking_time = 3;
  EXPECT_DOUBLE_EQ(*eval::novelty_preference(t), 12.0 / 16.0);
  for (auto& x : t) x.looking_time = 0;
  EXPECT_FALSE(eval::novelty_preference(t));
}

// --- gaze test -----------------------------------------------------------

TEST(GazeOnStimulus, RodOnTheAxisIsSeenAndNinetyDegreesAwayIsNot) {
  const WorldState probe = world_for("eval_room");
  const Gaze g = eye_gaze(probe);
  const std::vector<std::string> tags{"rod"};

  json doc = load_json(asset("scenes/eval_room.json"));
  doc["objects"].push_back(display_obj(900, g.origin + 0.6 * g.direction, "rod", {0.01, 0.01, 0.15}));
  const WorldState ahead = load_scene(SceneSpec::from_json(doc, asset("scenes")));
  EXPECT_TRUE(eval::gaze_on_stimulus(ahead, tags));

  doc = load_json(asset("scenes/eval_room.json"));
  doc["objects"].push_back(display_obj(900, g.origin + 0.6 * g.right, "rod", {0.01, 0.01, 0.15}));
  const WorldState side = load_scene(SceneSpec::from_json(doc, asset("scenes")));
  EXPECT_FALSE(eval::gaze_on_stimulus(side, tags));
}

TEST(GazeOnStimulus, OccluderCountsDuringHabituation) {
  const WorldState probe = world_for("eval_room");
  const Gaze g = eye_gaze(probe);
  json doc = load_json(asset("scenes/eval_room.json"));
  doc["objects"].push_back(display_obj(901, g.origin + 0.55 * g.direction, "box", {0.1, 0.01, 0.06}));
  const WorldState s = load_scene(SceneSpec::from_json(doc, asset("scenes")));
  const std::vector<std::string> hab{"box", "rod"};
  const std::vector<std::string> rod_only{"rod"};
  EXPECT_TRUE(eval::gaze_on_stimulus(s, hab));
  EXPECT_FALSE(eval::gaze_on_stimulus(s, rod_only));
}

TEST(GazeOnStimulus, ConeCatchesANearMiss) {
  const WorldState probe = world_for("eval_room");
  const Gaze g = eye_gaze(probe);
  json doc = load_json(asset("scenes/eval_room.json"));
  // 6 degrees off axis at 0.6 m.
  const Vec3 c = g.origin + 0.6 * g.direction + 0.6 * std::tan(6.0 * std::numbers::pi / 180) * g.right;
  doc["objects"].push_back(display_obj(900, c, "rod", {0.01, 0.01, 0.15}));
  const WorldState s = load_scene(SceneSpec::from_json(doc, asset("scenes")));
  const std::vector<std::string> tags{"rod"};
  eval::HabituationCriterion crit;
  EXPECT_FALSE(eval::gaze_on_stimulus(s, tags, crit));
  crit.cone = true;
  EXPECT_TRUE(eval::gaze_on_stimulus(s, tags, crit));
}

// --- whole scenario ------------------------------------------------------

TEST(RodAndBox, FamiliarityOracleLooksLongerAtTheCompleteRod) {
  const auto r = run_eval("familiarity", 2);
  ASSERT_TRUE(r.habituated_at);
  ASSERT_EQ(r.test_trials.size(), 6u);
  ASSERT_TRUE(r.novelty_preference);
  EXPECT_LT(*r.novelty_preference, 0.45);
}

TEST(RodAndBox, NoveltyOracleLooksLongerAtTheBrokenRod) {
  const auto r = run_eval("novelty", 3);
  ASSERT_TRUE(r.habituated_at);
  ASSERT_TRUE(r.novelty_preference);
  EXPECT_GT(*r.novelty_preference, 0.55);
}

TEST(RodAndBox, SymmetricOracleIsIndifferentWithinATick) {
  const auto r = run_eval("symmetric", 4);
  ASSERT_TRUE(r.novelty_preference);
  EXPECT_LE(std::abs(total(r.test_trials, "broken_rod") - total(r.test_trials, "complete_rod")), kDt + 1e-9);
}

TEST(RodAndBox, FixedLookTimeIsMeasuredToATick) {
  eval::RodAndBoxConfig cfg;
  cfg.criterion.min_trials = 3;
  cfg.criterion.max_trials = 3;
  const auto r = run_eval("look:10", 1, cfg);
  ASSERT_EQ(r.habituation_trials.size(), 3u);
  for (const auto& t : r.habituation_trials) {
    EXPECT_NEAR(t.looking_time, 10.0, kDt + 1e-9);
    EXPECT_EQ(t.ended_by, eval::EndedBy::LookAway);
  }
  EXPECT_FALSE(r.habituated_at);
  EXPECT_EQ(r.flags, std::vector<std::string>{"NotHabituated"});
  EXPECT_TRUE(r.test_trials.empty());
  EXPECT_FALSE(r.novelty_preference);
}

TEST(RodAndBox, AgentThatNeverLooksEndsEachTrialAfterTheLookAwayWindow) {
  eval::RodAndBoxConfig cfg;
  cfg.criterion.min_trials = 3;
  cfg.criterion.max_trials = 3;
  const auto r = run_eval([] { return std::make_unique<AvertedPolicy>(); }, 1, cfg);
  ASSERT_EQ(r.habituation_trials.size(), 3u);
  for (const auto& t : r.habituation_trials) {
    EXPECT_EQ(t.looking_time, 0.0);
    EXPECT_EQ(t.ended_by, eval::EndedBy::LookAway);
    EXPECT_EQ(t.gaze.size(), 100u);
  }
}

TEST(RodAndBox, StaringAgentHitsTheCap) {
  eval::RodAndBoxConfig cfg;
  cfg.criterion.min_trials = 3;
  cfg.criterion.max_trials = 3;
  const auto r = run_eval("stare", 1, cfg);
  ASSERT_EQ(r.habituation_trials.size(), 3u);
  for (const auto& t : r.habituation_trials) {
    EXPECT_EQ(t.ended_by, eval::EndedBy::Cap);
    EXPECT_EQ(t.gaze.size(), 3000u);
    EXPECT_NEAR(t.looking_time, 60.0, 1e-9);
  }
  EXPECT_EQ(r.flags, std::vector<std::string>{"NotHabituated"});
}

TEST(RodAndBox, TestOrderIsCounterbalancedBySeedParity) {
  const auto even = run_eval("symmetric", 6);
  const auto odd = run_eval("symmetric", 7);
  ASSERT_EQ(even.test_trials.size(), 6u);
  ASSERT_EQ(odd.test_trials.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    const bool complete_first = i % 2 == 0;
    EXPECT_EQ(even.test_trials[i].stimulus_id, complete_first ? "complete_rod" : "broken_rod");
    EXPECT_EQ(odd.test_trials[i].stimulus_id, complete_first ? "broken_rod" : "complete_rod");
  }
}

TEST(RodAndBoxProperty, LookingTimeIsTheSumOfGazeTicks) {
  const auto r = run_eval("novelty", 5);
  for (const auto* phase : {&r.habituation_trials, &r.test_trials}) {
    for (const auto& t : *phase) {
      const auto on = std::accumulate(t.gaze.begin(), t.gaze.end(), 0);
      EXPECT_DOUBLE_EQ(t.looking_time, ticks_to_seconds(static_cast<std::uint64_t>(on)));
      EXPECT_LE(t.gaze.size(), 3000u);
    }
  }
}

TEST(RodAndBoxProperty, SameSeedSameReport) {
  EXPECT_EQ(run_eval("familiarity", 8), run_eval("familiarity", 8));
}

TEST(Report, RoundTripsThroughJsonAndCsv) {
  const auto r = run_eval("familiarity", 10);
  const fs::path dir = fs::temp_directory_path() / "sedro_test_eval";
  fs::create_directories(dir);
  const fs::path p = dir / "report.json";
  eval::write_report(r, p);
  EXPECT_EQ(eval::gaze_csv_path(p), dir / "report_gaze.csv");
  EXPECT_EQ(eval::read_report(p), r);

  std::ifstream csv(eval::gaze_csv_path(p));
  std::size_t lines = 0, ticks = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  for (const auto* phase : {&r.habituation_trials, &r.test_trials})
    for (const auto& t : *phase) ticks += t.gaze.size();
  EXPECT_EQ(lines, ticks + 1);
}

TEST(Report, MissingValuesAreNull) {
  eval::HabituationReport r;
  r.flags = {"NotHabituated"};
  const fs::path dir = fs::temp_directory_path() / "sedro_test_eval";
  fs::create_directories(dir);
  const fs::path p = dir / "nulls.json";
  eval::write_report(r, p);
  const json j = load_json(p);
  EXPECT_TRUE(j.at("habituated_at").is_null());
  EXPECT_TRUE(j.at("novelty_preference").is_null());
  EXPECT_EQ(eval::read_report(p), r);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(eval::RodAndBoxConfig::from_json({{"rod_lenght", 0.3}}), ValidationError);
  eval::RodAndBoxConfig c;
  c.box_width = c.rod_length;
  EXPECT_THROW(c.validate(), ValidationError);
  const json j = load_json(asset("experiments/rod_and_box.json"));
  EXPECT_NO_THROW(eval::RodAndBoxConfig::from_json(j).validate());
}

TEST(Registry, KnowsRodAndBox) { EXPECT_EQ(eval::scenario_registry().count("rod_and_box"), 1u); }
