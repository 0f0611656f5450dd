#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace sedro;
using namespace sedro::test;
using nlohmann::json;

namespace {

const std::vector<std::string> kHab{"connected", "moving", "occluder", "rod"};
const std::vector<std::string> kComplete{"connected", "moving", "rod"};
const std::vector<std::string> kBroken{"moving", "rod", "segmented"};

proto::Event stimulus(const std::string& id, const std::vector<std::string>& features,
                      std::array<double, 3> fixation = {0.6, 0.0, 0.0}) {
  return {proto::EventKind::Stimulus,
          {{"stimulus", id},
           {"features", features},
           {"fixation", fixation},
           {"lookaway", {0.6, 0.0, 0.3}},
           {"motion", {{"axis", {0, 1, 0}}, {"amplitude", 0.0}, {"frequency", 0.0}, {"start_tick", 0}}},
           {"eye_max_speed", 5.24}}};
}

Observation at_tick(std::uint64_t t) {
  Observation o;
  o.tick = t;
  return o;
}

agent::GazeOracle habituated(agent::GazeMode mode, int trials = 6) {
  agent::GazeOracle o({mode});
  for (int k = 0; k < trials; ++k) o.act(at_tick(k * 100), {stimulus("habituation", kHab)});
  return o;
}

}  // namespace

TEST(GazeOracle, WithoutAStimulusTheEyesStayStill) {
  for (const char* name : {"familiarity", "novelty", "symmetric", "stare", "look:5"}) {
    auto p = agent::make_policy(name);
    const Action a = p->act(at_tick(3), {});
    for (double e : a.eye) EXPECT_EQ(e, 0.0) << name;
    for (double m : a.muscle) EXPECT_EQ(m, 0.0) << name;
  }
}

TEST(GazeOracle, SteersTowardTheFixationPoint) {
  agent::GazeOracle o({agent::GazeMode::Novelty});
  // Target up and to the left of straight ahead.
  const Action a = o.act(at_tick(0), {stimulus("broken_rod", kBroken, {0.6, 0.2, 0.1})});
  EXPECT_GT(a.eye[0], 0.0);
  EXPECT_GT(a.eye[1], 0.0);
  EXPECT_EQ(a.eye[2], 0.0);
}

TEST(GazeOracle, LooksAwayWhenThePlannedLookIsOver) {
  agent::GazeOracle o({agent::GazeMode::LookFor, 24.0, 30.0, 1.0});
  o.act(at_tick(0), {stimulus("complete_rod", kComplete)});
  Observation obs = at_tick(49);
  EXPECT_EQ(o.act(obs, {}).eye[1], 0.0);  // still on the fixation, level with the eyes
  obs = at_tick(50);
  EXPECT_GT(o.act(obs, {}).eye[1], 0.0);  // heading up to the look-away point
}

TEST(GazeOracle, NoveltySeekerLooksLongerAtTheBrokenRod) {
  const auto o = habituated(agent::GazeMode::Novelty);
  EXPECT_GT(o.planned_look("broken_rod", kBroken), o.planned_look("complete_rod", kComplete));
}

TEST(GazeOracle, FamiliarityLooksLongerAtTheCompleteRod) {
  const auto o = habituated(agent::GazeMode::Familiarity);
  EXPECT_GT(o.planned_look("complete_rod", kComplete), o.planned_look("broken_rod", kBroken));
}

TEST(GazeOracle, SymmetricLooksEquallyAtFreshDisplays) {
  const auto o = habituated(agent::GazeMode::Symmetric);
  EXPECT_EQ(o.planned_look("complete_rod", kComplete), o.planned_look("broken_rod", kBroken));
}

TEST(GazeOracle, RepeatedDisplayIsLookedAtLessAndLess) {
  for (auto mode : {agent::GazeMode::Familiarity, agent::GazeMode::Novelty, agent::GazeMode::Symmetric}) {
    agent::GazeOracle o({mode});
    double prev = 1e9;
    for (int k = 0; k < 8; ++k) {
      const double look = o.planned_look("habituation", kHab);
      EXPECT_LT(look, prev);
      prev = look;
      o.act(at_tick(k * 100), {stimulus("habituation", kHab)});
    }
    EXPECT_EQ(o.presentations().at("habituation"), 8);
  }
}

TEST(GazeOracle, ExposureCountsWholeTicks) {
  agent::GazeOracle o({agent::GazeMode::LookFor, 24.0, 30.0, 1.011});
  o.act(at_tick(0), {stimulus("x", kHab)});
  EXPECT_DOUBLE_EQ(o.exposure().at("x"), 1.02);
}

TEST(MakePolicy, RejectsUnknownNames) {
  EXPECT_THROW(agent::make_policy("telepathy"), ValidationError);
  EXPECT_THROW(agent::make_policy("look:abc"), ValidationError);
  EXPECT_THROW(agent::make_policy("look:-1"), ValidationError);
  EXPECT_NO_THROW(agent::make_policy("look:2.5"));
}

TEST(RandomPolicy, IsAPureFunctionOfSeedAndTick) {
  agent::RandomPolicy a(4), b(4), c(5);
  const Action x = a.act(at_tick(10), {});
  EXPECT_EQ(x.values(), b.act(at_tick(10), {}).values());
  EXPECT_NE(x.values(), c.act(at_tick(10), {}).values());
  EXPECT_NE(x.values(), a.act(at_tick(11), {}).values());
  for (double v : x.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Client, RefusedHandshakeNamesTheVersions) {
  const std::uint16_t sv[] = {1};
  agent::ZeroPolicy zero;
  agent::ClientOptions co;
  co.versions = {7};
  std::string msg;
  with_client(
      [&](net::Stream& s) {
        EXPECT_THROW(server_handshake(s, sv, 2000), proto::ProtocolError);
        return 0;
      },
      [&](net::Stream& c) {
        try {
          agent::run_client(c, zero, co);
        } catch (const proto::ProtocolError& e) {
          msg = e.what();
        }
      });
  EXPECT_NE(msg.find('7'), std::string::npos) << msg;
}

TEST(Client, ReportsAServerThatVanishes) {
  agent::ZeroPolicy zero;
  agent::ClientResult cr;
  const std::uint16_t sv[] = {1};
  with_client(
      [&](net::Stream& s) {
        server_handshake(s, sv, 2000);
        s.close();
        return 0;
      },
      [&](net::Stream& c) { cr = agent::run_client(c, zero, {}); });
  EXPECT_FALSE(cr.completed);
  EXPECT_NE(cr.message.find("closed"), std::string::npos) << cr.message;
}
