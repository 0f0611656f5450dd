#include <gtest/gtest.h>

#include <cmath>

#include "sedro/caregiver.hpp"
#include "support.hpp"

using namespace sedro;
using namespace sedro::test;
using nlohmann::json;

namespace {

std::size_t face_bits(const WorldState& s) {
  const auto bits = sense_touch(s);
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.model->touch_sensors().size(); ++i)
    n += bits[i] && s.model->touch_sensors()[i].region == "face";
  return n;
}

Action vocalize(double level) {
  Action a;
  a.muscle[52] = level;
  return a;
}

// Steps until `pred` holds or `limit` ticks pass; returns ticks taken.
template <typename Pred>
int run_until(Simulation& sim, Pred pred, int limit, const Action& a = {}) {
  for (int i = 0; i < limit; ++i) {
    if (pred(sim)) return i;
    sim.step(a);
  }
  return pred(sim) ? limit : -1;
}

CaregiverScript tiny_script(std::vector<std::vector<std::uint32_t>> utterances) {
  CaregiverScript s;
  s.utterances = std::move(utterances);
  return s;
}

}  // namespace

TEST(CaregiverPolicy, HungryInfantIsApproached) {
  Simulation sim(setup_for("nursery"));
  sim.world_mut().intero.energy = 0.2;
  auto [next, cmd] = caregiver_policy(sim.world(), sim.world().caregiver, sim.stage(), kDt);
  EXPECT_EQ(next.behavior, Behavior::Approach);
  ASSERT_TRUE(cmd.interact.has_value());
  EXPECT_TRUE(std::holds_alternative<MoveToy>(*cmd.interact));
}

TEST(CaregiverPolicy, SatedQuietInfantLeavesHerIdle) {
  Simulation sim(setup_for("nursery"));
  auto [next, cmd] = caregiver_policy(sim.world(), sim.world().caregiver, sim.stage(), kDt);
  EXPECT_EQ(next.behavior, Behavior::Idle);
  EXPECT_FALSE(cmd.interact.has_value());
}

TEST(CaregiverPolicy, SustainedVocalizationTriggersRespondWithAnUtterance) {
  Simulation sim(setup_for("nursery"));
  std::vector<proto::Event> events;
  int entered = -1;
  for (int i = 0; i < 80 && entered < 0; ++i) {
    sim.step(vocalize(0.8));
    for (auto& e : sim.take_events()) events.push_back(e);
    if (sim.world().caregiver.behavior == Behavior::Respond) entered = i + 1;
  }
  // One second at 50 Hz.
  ASSERT_GE(entered, 49);
  EXPECT_LE(entered, 51);
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.back().kind, proto::EventKind::Utterance);
  EXPECT_EQ(events.back().body["tokens"], json({12, 7, 7, 31}));
}

TEST(CaregiverPolicy, BriefVocalizationIsIgnored) {
  Simulation sim(setup_for("nursery"));
  for (int i = 0; i < 40; ++i) sim.step(vocalize(0.8));
  for (int i = 0; i < 40; ++i) sim.step(Action{});
  EXPECT_EQ(sim.world().caregiver.behavior, Behavior::Idle);
  EXPECT_TRUE(sim.take_events().empty());
}

TEST(CaregiverPolicy, FeedingRaisesEnergyAtTheScriptedRate) {
  Simulation sim(setup_for("nursery"));
  sim.world_mut().intero.energy = 0.2;
  const int reached =
      run_until(sim, [](const Simulation& s) { return s.world().caregiver.behavior == Behavior::Feed; }, 3000);
  ASSERT_GE(reached, 0) << "never fed";
  sim.step(Action{});
  ASSERT_EQ(sim.world().caregiver.behavior, Behavior::Feed);
  EXPECT_GT(face_bits(sim.world()), 0u) << "bottle at the mouth is felt on the face";

  const double e0 = sim.world().intero.energy;
  for (int i = 0; i < 50; ++i) sim.step(Action{});
  ASSERT_EQ(sim.world().caregiver.behavior, Behavior::Feed);
  const double gained = sim.world().intero.energy - e0;
  EXPECT_NEAR(gained, 0.05 - 1.0 / 14400.0, 1e-9);
}

TEST(CaregiverPolicy, FeedingStopsWhenSated) {
  Simulation sim(setup_for("nursery"));
  sim.world_mut().intero.energy = 0.25;
  const int fed =
      run_until(sim, [](const Simulation& s) { return s.world().caregiver.behavior == Behavior::Feed; }, 3000);
  ASSERT_GE(fed, 0);
  const int done = run_until(
      sim, [](const Simulation& s) { return s.world().caregiver.behavior != Behavior::Feed; }, 20 * 50 * 50);
  ASSERT_GE(done, 0);
  EXPECT_GE(sim.world().intero.energy, 0.95 - 1e-9);
  EXPECT_LT(sim.world().intero.energy, 0.95 + 0.002);
  EXPECT_EQ(sim.world().caregiver.behavior, Behavior::Idle);
}

TEST(CaregiverPolicy, SceneWithoutCaregiverCommandsNothing) {
  Simulation sim(setup_for("womb"));
  sim.world_mut().intero.energy = 0.1;
  auto [next, cmd] = caregiver_policy(sim.world(), sim.world().caregiver, sim.stage(), kDt);
  EXPECT_EQ(next.behavior, Behavior::Idle);
  EXPECT_FALSE(cmd.interact.has_value());
  EXPECT_EQ(cmd.move, Vec3::Zero());
}

TEST(CaregiverPolicy, RoutinesOutsideTheStageAreIgnored) {
  Simulation sim(setup_for("nursery"));
  sim.world_mut().intero.energy = 0.1;
  StageParams st = sim.stage();
  st.caregiver_routines = {"talk"};
  auto [next, cmd] = caregiver_policy(sim.world(), sim.world().caregiver, st, kDt);
  EXPECT_EQ(next.behavior, Behavior::Idle);
}

TEST(EmitUtterance, CursorWrapsAround) {
  const auto script = CaregiverScript::load(asset("caregiver/motherese.json"));
  const auto n = static_cast<std::uint32_t>(script.utterances.size());
  auto [tokens, next] = emit_utterance(script, n - 1);
  EXPECT_EQ(tokens, script.utterances.back());
  EXPECT_EQ(next, 0u);
  auto [first, second] = emit_utterance(script, 0);
  EXPECT_EQ(first, (std::vector<std::uint32_t>{12, 7, 7, 31}));
  EXPECT_EQ(second, 1u);
}

TEST(EmitUtterance, SingleUtteranceRepeats) {
  const auto script = tiny_script({{4, 2}});
  std::uint32_t cur = 0;
  for (int i = 0; i < 3; ++i) {
    auto [t, next] = emit_utterance(script, cur);
    EXPECT_EQ(t, (std::vector<std::uint32_t>{4, 2}));
    EXPECT_EQ(next, 0u);
    cur = next;
  }
}

TEST(EmitUtterance, EmptyScriptIsAnError) { EXPECT_THROW(emit_utterance(tiny_script({}), 0), Error); }

TEST(CaregiverProperty, TransitionsFollowTheBehaviorGraph) {
  SessionSetup setup = setup_for("nursery");
  setup.seed = 91;
  Simulation sim(setup);
  sim.world_mut().intero.energy = 0.32;
  Behavior prev = sim.world().caregiver.behavior;
  int changes = 0;
  for (std::uint64_t t = 0; t < 9000; ++t) {
    Action a = random_action(91, t, 0.3);
    // Bursts of crying every twenty seconds.
    a.muscle[52] = (t / 50) % 20 < 3 ? 0.9 : 0.0;
    sim.step(a);
    const Behavior b = sim.world().caregiver.behavior;
    ASSERT_TRUE(transition_allowed(prev, b)) << to_string(prev) << " -> " << to_string(b) << " at " << t;
    changes += b != prev;
    prev = b;
  }
  EXPECT_GT(changes, 3);
}

TEST(CaregiverProperty, GraphEdges) {
  EXPECT_TRUE(transition_allowed(Behavior::Idle, Behavior::Approach));
  EXPECT_TRUE(transition_allowed(Behavior::Approach, Behavior::Feed));
  EXPECT_FALSE(transition_allowed(Behavior::Idle, Behavior::Feed));
  EXPECT_FALSE(transition_allowed(Behavior::Talk, Behavior::Feed));
  for (auto b : {Behavior::Idle, Behavior::Approach, Behavior::Feed, Behavior::Talk, Behavior::ShowToy,
                 Behavior::Respond})
    EXPECT_TRUE(transition_allowed(b, b));
}

TEST(CaregiverProperty, SameSeedSameUtteranceTimes) {
  auto times = [](std::uint64_t seed) {
    SessionSetup setup = setup_for("nursery");
    setup.seed = seed;
    Simulation sim(setup);
    std::vector<std::uint64_t> at;
    for (int i = 0; i < 50 * 120; ++i) {
      sim.step(Action{});
      for (const auto& e : sim.take_events())
        if (e.kind == proto::EventKind::Utterance) at.push_back(sim.tick());
    }
    return at;
  };
  const auto a = times(3);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, times(3));
}
