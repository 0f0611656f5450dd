#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sedro/math.hpp"

namespace sedro {

enum class Behavior : std::uint8_t { Idle = 0, Approach = 1, Feed = 2, Talk = 3, ShowToy = 4, Respond = 5 };

const char* to_string(Behavior b);

enum class Trigger : std::uint8_t { Hunger, Vocalization, Periodic };

struct Routine {
  std::string id;
  Behavior behavior = Behavior::Idle;
  Trigger trigger = Trigger::Periodic;
  double offset_s = 0.0;
  double period_s = 0.0;
  double jitter_s = 0.0;
  double duration_s = 0.0;
  double threshold = 0.0;  ///< Feed: hunger energy; Respond: vocalization level
  double rate = 0.0;       ///< Feed: energy per second of head contact
  double stop = 0.0;       ///< Feed: satiation energy
  double sustain_s = 0.0;  ///< Respond: how long vocalization must hold
  double distance = 0.0;   ///< ShowToy: presentation distance from the face
  std::uint32_t object = 0;  ///< ShowToy: kinematic toy id
};

/// Routine set plus the utterance list. Loaded from JSON; immutable afterwards.
struct CaregiverScript {
  std::uint32_t body_object = 0;    ///< kinematic capsule standing for the caregiver
  std::uint32_t bottle_object = 0;  ///< kinematic bottle used in Feed
  double speed = 0.4;               ///< m/s for body and held objects
  double reach = 0.01;              ///< m: bottle surface to head surface counted as contact
  Vec3 bedside_offset = Vec3(0.0, 0.35, 0.25);  ///< caregiver position relative to the head
  std::vector<Routine> routines;
  std::vector<std::vector<std::uint32_t>> utterances;

  static CaregiverScript from_json(const nlohmann::json& doc);
  static CaregiverScript load(const std::filesystem::path& path);
  const Routine* find(Behavior b) const;
  int index_of(const std::string& id) const;
};

struct Feed {
  double amount = 0.0;
};
struct Utterance {
  std::vector<std::uint32_t> tokens;
};
struct MoveToy {
  std::uint32_t object = 0;
  Vec3 target = Vec3::Zero();
  double speed = 0.0;
};
using Interaction = std::variant<Feed, Utterance, MoveToy>;

struct CaregiverCommand {
  Vec3 move = Vec3::Zero();  ///< caregiver body velocity, m/s
  std::optional<Interaction> interact;
};

struct CaregiverState {
  Behavior behavior = Behavior::Idle;
  double behavior_timer = 0.0;  ///< seconds spent in the current behavior
  Vec3 pose = Vec3::Zero();     ///< caregiver body position
  Vec3 home = Vec3::Zero();
  Vec3 bottle_home = Vec3::Zero();
  Vec3 toy_home = Vec3::Zero();
  std::uint32_t active_toy = 0;
  std::uint32_t utterance_cursor = 0;
  double vocal_sustain = 0.0;   ///< seconds the vocalization channel has stayed above threshold
  std::vector<double> next_due; ///< per routine; sim seconds, NaN when not periodic
  std::shared_ptr<const CaregiverScript> script;  ///< null: no caregiver in this scene
};

}  // namespace sedro
