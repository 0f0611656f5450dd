#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace sedro;
using namespace sedro::test;
using nlohmann::json;

namespace {

json sphere(std::uint32_t id, std::array<double, 3> pos, double r, double mass = 0.0) {
  return {{"id", id}, {"shape", {{"type", "sphere"}, {"radius", r}}}, {"position", {pos[0], pos[1], pos[2]}},
          {"mass", mass}, {"tags", {"ball"}}};
}

WorldState step_zero(WorldState s) { return step_world(std::move(s), MotorCommand{}, CaregiverCommand{}); }

WorldState step_random(WorldState s, std::uint64_t seed, double strength = 1.0) {
  const Action a = random_action(seed, s.tick);
  StageParams st;
  st.strength_factor = strength;
  return step_world(std::move(s), apply_action(a, st, *s.model), CaregiverCommand{});
}

}  // namespace

TEST(LoadScene, NurseryPlacesObjectsAtSpecPoses) {
  const json doc = load_json(asset("scenes/nursery.json"));
  const WorldState s = world_for("nursery");
  EXPECT_EQ(s.tick, 0u);
  EXPECT_EQ(s.scene_id, "nursery");
  ASSERT_EQ(s.objects.size(), doc["objects"].size());
  for (const auto& o : doc["objects"]) {
    const SceneObject* got = s.find(o["id"].get<std::uint32_t>());
    ASSERT_NE(got, nullptr);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(got->pose.position[k], o["position"][k].get<double>());
  }
  bool rod = false, box = false, crib = false;
  for (const auto& o : s.objects) crib |= o.has_tag("crib");
  // The nursery carries no evaluation display; those are placed by the harness.
  for (const auto& o : s.objects) rod |= o.has_tag("rod"), box |= o.has_tag("box");
  EXPECT_TRUE(crib);
  EXPECT_FALSE(rod || box);
}

TEST(LoadScene, WombHasOnlyItsEnclosure) {
  const WorldState s = world_for("womb");
  EXPECT_EQ(s.scene_id, "womb");
  ASSERT_EQ(s.objects.size(), 1u);
  EXPECT_TRUE(s.objects[0].has_tag("enclosure"));
  EXPECT_TRUE(s.objects[0].shape.hollow);
}

TEST(LoadScene, DuplicateIdIsRejectedByName) {
  const json doc = scene_doc({sphere(4, {1, 0, 0}, 0.1), sphere(4, {2, 0, 0}, 0.1)});
  try {
    world_from(doc);
    FAIL() << "duplicate id accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find('4'), std::string::npos) << e.what();
    EXPECT_NE(e.field().find("objects"), std::string::npos) << e.field();
  }
}

TEST(LoadScene, MalformedFieldsNameThePath) {
  json doc = scene_doc({sphere(1, {1, 0, 0}, 0.1)});
  doc["objects"][0]["shape"]["radius"] = -1.0;
  try {
    world_from(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(e.field().find("radius"), std::string::npos) << e.field();
  }
}

TEST(StepWorld, FreeSphereFallsByClosedFormAfterFiftyTicks) {
  WorldState s = world_from(scene_doc({sphere(1, {3, 0, 100}, 0.1, 1.0)}));
  const double z0 = s.find(1)->pose.position.z();
  for (int i = 0; i < 50; ++i) s = step_zero(std::move(s));
  const double fall = z0 - s.find(1)->pose.position.z();
  EXPECT_NEAR(fall, 5.0031, 1e-9 * 5.0031);
}

TEST(StepWorld, BallisticDropMatchesSemiImplicitEuler) {
  WorldState s = world_from(scene_doc({sphere(1, {3, 0, 1000}, 0.1, 1.0)}));
  const double z0 = s.find(1)->pose.position.z();
  const double g = 9.81;
  for (int n = 1; n <= 500; ++n) {
    s = step_zero(std::move(s));
    const double expected = g * kDt * kDt * n * (n + 1) / 2.0;
    const double fall = z0 - s.find(1)->pose.position.z();
    ASSERT_LE(std::abs(fall - expected), 1e-9 * expected) << "step " << n;
  }
}

TEST(StepWorld, SimTimeIsTickTimesDt) {
  WorldState s = world_for("womb");
  for (int i = 0; i < 60; ++i) s = step_zero(std::move(s));
  EXPECT_EQ(s.sim_time(), 60.0 / 50.0);
  EXPECT_EQ(ticks_to_seconds(3000), 60.0);
}

TEST(StepWorld, AgentAtRestStaysPut) {
  WorldState s = world_for("eval_room");
  for (int i = 0; i < 500; ++i) s = step_zero(std::move(s));
  const WorldState next = step_zero(s);
  EXPECT_EQ(next.tick, s.tick + 1);
  EXPECT_LT((next.body.root_pose.position - s.body.root_pose.position).norm(), 1e-9);
  for (std::size_t j = 0; j < kNumMuscles; ++j)
    EXPECT_NEAR(next.body.joint_angles[j], s.body.joint_angles[j], 1e-9) << j;
}

TEST(StepWorld, NonFiniteCommandIsRejectedWithChannel) {
  const WorldState s = world_for("womb");
  MotorCommand m;
  m.torque[5] = std::nan("");
  try {
    step_world(s, m, {});
    FAIL();
  } catch (const NonFiniteActionError& e) {
    EXPECT_EQ(e.channel(), 5u);
  }
  std::array<double, kNumActionChannels> v{};
  v[54] = INFINITY;
  try {
    Action::from_values(v);
    FAIL();
  } catch (const NonFiniteActionError& e) {
    EXPECT_EQ(e.channel(), 54u);
  }
}

TEST(Raycast, HitsUnitSphereFiveMetresAhead) {
  const WorldState s = world_from(scene_doc({sphere(1, {5, 0, 0}, 1.0)}, -9.81, {0, 0, -20}));
  const auto hit = raycast(s, Vec3::Zero(), Vec3::UnitX());
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->id, 1u);
  EXPECT_NEAR(hit->distance, 4.0, 1e-12);
  EXPECT_NEAR(hit->normal.x(), -1.0, 1e-12);
}

TEST(Raycast, MissesWhenPointingAway) {
  const WorldState s = world_from(scene_doc({sphere(1, {5, 0, 0}, 1.0)}, -9.81, {0, 0, -20}));
  EXPECT_FALSE(raycast(s, Vec3::Zero(), -Vec3::UnitX()));
}

TEST(Raycast, TangentRayHitsAtTangentPoint) {
  const WorldState s = world_from(scene_doc({sphere(1, {5, 1, 0}, 1.0)}, -9.81, {0, 0, -20}));
  const auto hit = raycast(s, Vec3::Zero(), Vec3::UnitX());
  ASSERT_TRUE(hit);
  const double d = std::sqrt(26.0);
  EXPECT_NEAR(hit->distance, std::sqrt(d * d - 1.0), 1e-9);
}

TEST(Raycast, RejectsBadDirections) {
  const WorldState s = world_for("womb");
  EXPECT_THROW(raycast(s, Vec3::Zero(), Vec3::Zero()), Error);
  EXPECT_THROW(raycast(s, Vec3::Zero(), Vec3(1.0, 1.0, 0.0)), Error);
}

TEST(Raycast, TiesGoToLowestId) {
  const WorldState s =
      world_from(scene_doc({sphere(7, {5, 0, 0}, 1.0), sphere(3, {5, 0, 0}, 1.0)}, -9.81, {0, 0, -20}));
  const auto hit = raycast(s, Vec3::Zero(), Vec3::UnitX());
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->id, 3u);
}

TEST(StateHash, SurvivesSerializationRoundTrip) {
  WorldState s = world_for("nursery");
  for (int i = 0; i < 20; ++i) s = step_random(std::move(s), 3);
  const Bytes bytes = serialize_state(s);
  const WorldState back = deserialize_state(bytes, s.model, s.caregiver.script);
  EXPECT_EQ(state_hash(back), state_hash(s));
  EXPECT_EQ(serialize_state(back), bytes);
}

TEST(StateHash, ChangesAfterNonZeroTorque) {
  const WorldState s = world_for("nursery");
  MotorCommand m;
  m.torque[0] = 1.0;
  EXPECT_NE(state_hash(step_world(s, m, {})), state_hash(s));
}

TEST(StateHash, PinnedNurseryGolden) {
  EXPECT_EQ(state_hash(world_for("nursery")), 0xbbfa05f2266fba05ULL);
}

// ---- properties ----

TEST(Property, IdenticalTracesGiveIdenticalHashes) {
  for (std::uint64_t seed : {1u, 2u}) {
    WorldState a = world_for("nursery"), b = world_for("nursery");
    for (int i = 0; i < 1000; ++i) {
      a = step_random(std::move(a), seed);
      b = step_random(std::move(b), seed);
      ASSERT_EQ(state_hash(a), state_hash(b)) << "tick " << a.tick;
    }
  }
}

TEST(Property, JointsStayWithinLimitsUnderRandomTorques) {
  for (const char* scene : {"nursery", "womb"}) {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      WorldState s = world_for(scene);
      const auto& joints = s.model->joints();
      for (int i = 0; i < 1500; ++i) {
        s = step_random(std::move(s), seed);
        for (std::size_t j = 0; j < kNumMuscles; ++j) {
          ASSERT_GE(s.body.joint_angles[j], joints[j].lower) << scene << " joint " << j << " tick " << s.tick;
          ASSERT_LE(s.body.joint_angles[j], joints[j].upper) << scene << " joint " << j << " tick " << s.tick;
        }
      }
    }
  }
}

TEST(Property, PenetrationStaysWithinFiveMillimetres) {
  for (const char* scene : {"nursery", "womb", "eval_room"}) {
    for (std::uint64_t seed : {21u, 36u, 47u}) {
      WorldState s = world_for(scene);
      double worst = 0.0;
      for (int i = 0; i < 1500; ++i) {
        s = step_random(std::move(s), seed);
        worst = std::max(worst, max_static_penetration(s));
      }
      EXPECT_LE(worst, 0.005) << scene << " seed " << seed;
    }
  }
}

TEST(Property, KineticEnergyNeverRisesWithoutDrive) {
  WorldState s = world_from(scene_doc(json::array(), 0.0));
  for (std::size_t j = 0; j < kNumMuscles; ++j) s.body.joint_velocities[j] = (j % 2 ? 1.0 : -1.0) * (0.5 + 0.01 * j);
  double prev = joint_kinetic_energy(s);
  for (int i = 0; i < 500; ++i) {
    s = step_zero(std::move(s));
    const double e = joint_kinetic_energy(s);
    ASSERT_LE(e, prev) << "tick " << s.tick;
    prev = e;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Property, QuaternionsStayUnitAndStaticObjectsStayPut) {
  WorldState s = world_for("nursery");
  const std::vector<SceneObject> start = s.objects;
  for (int i = 0; i < 1000; ++i) {
    s = step_random(std::move(s), 5);
    ASSERT_NEAR(s.body.root_pose.orientation.norm(), 1.0, 1e-9);
    for (std::size_t k = 0; k < s.objects.size(); ++k) {
      ASSERT_NEAR(s.objects[k].pose.orientation.norm(), 1.0, 1e-9);
      if (start[k].is_static()) {
        ASSERT_EQ(s.objects[k].pose.position, start[k].pose.position);
        ASSERT_EQ(s.objects[k].pose.orientation.coeffs(), start[k].pose.orientation.coeffs());
      }
    }
  }
}

TEST(Property, LinkPosesFollowJointAngles) {
  WorldState s = world_for("nursery");
  for (int i = 0; i < 200; ++i) {
    s = step_random(std::move(s), 9);
    const Kinematics k = forward_kinematics(*s.model, s.body.root_pose, s.body.joint_angles);
    for (std::size_t l = 0; l < k.link_poses.size(); ++l)
      ASSERT_EQ(k.link_poses[l].position, s.body.link_poses[l].position);
  }
}
