#pragma once

#include <sys/socket.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <utility>

#include <json.hpp>

#include "sedro/agent.hpp"
#include "sedro/session.hpp"
#include "sedro/world.hpp"

namespace sedro::test {

namespace fs = std::filesystem;

inline fs::path asset(const std::string& rel) { return data_dir() / rel; }
inline fs::path fixture(const std::string& name) { return fs::path(SEDRO_TEST_FIXTURES) / name; }

inline SessionSetup setup_for(const std::string& scene, std::uint64_t max_ticks = 100) {
  SessionSetup s;
  s.scene = asset("scenes/" + scene + ".json");
  s.schedule = asset("schedule/default.json");
  s.max_ticks = max_ticks;
  return s;
}

inline nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

/// Scene document with the infant body placed at `root` and the given objects.
inline nlohmann::json scene_doc(nlohmann::json objects, double gravity_z = -9.81,
                                std::array<double, 3> root = {0.0, 0.0, 5.0}) {
  return {{"seed", 1},
          {"scene_id", "test"},
          {"age_days", 120.0},
          {"gravity", {0.0, 0.0, gravity_z}},
          {"light", 1.0},
          {"body_spec_ref", "../body/infant_3mo.json"},
          {"caregiver_script_ref", nullptr},
          {"objects", std::move(objects)},
          {"agent", {{"root_position", {root[0], root[1], root[2]}}}}};
}

inline WorldState world_from(const nlohmann::json& doc) {
  return load_scene(SceneSpec::from_json(doc, asset("scenes")));
}

inline WorldState world_for(const std::string& scene) { return load_scene(SceneSpec::load(asset("scenes/" + scene + ".json"))); }

/// Connected in-process stream pair.
inline std::pair<net::Stream, net::Stream> stream_pair() {
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) throw IoError("socketpair");
  return {net::Stream(sv[0], sv[0], true), net::Stream(sv[1], sv[1], true)};
}

/// Runs `client(stream)` on its own thread against `server(stream)` here.
template <typename Server, typename Client>
auto with_client(Server&& server, Client&& client) {
  auto [s, c] = stream_pair();
  std::thread th([&, cs = std::move(c)]() mutable { client(cs); });
  struct Join {
    std::thread& t;
    net::Stream& s;
    ~Join() {
      s.close();  // unblocks a client still waiting on a failed server
      t.join();
    }
  } join{th, s};
  return server(s);
}

/// Joint kinetic energy with the diagonal joint-space inertia.
inline double joint_kinetic_energy(const WorldState& s) {
  double e = 0.0;
  const auto& joints = s.model->joints();
  for (std::size_t j = 0; j < kNumMuscles; ++j)
    e += 0.5 * joints[j].inertia * s.body.joint_velocities[j] * s.body.joint_velocities[j];
  return e;
}

/// Uniform random action for a given tick, deterministic in (seed, tick).
inline Action random_action(std::uint64_t seed, std::uint64_t tick, double scale = 1.0) {
  agent::RandomPolicy p(seed, scale);
  Observation o;
  o.tick = tick;
  return p.act(o, {});
}

}  // namespace sedro::test
