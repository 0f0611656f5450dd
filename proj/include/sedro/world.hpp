#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sedro/body_model.hpp"
#include "sedro/bytes.hpp"
#include "sedro/caregiver_types.hpp"
#include "sedro/geometry.hpp"
#include "sedro/rng.hpp"

namespace sedro {

struct Material {
  double friction = 0.6;
  double restitution = 0.0;
};

/// Closed-form lateral oscillation: origin + axis * A sin(2 pi f (t - t0)).
struct Oscillation {
  Vec3 origin = Vec3::Zero();
  Vec3 axis = Vec3::UnitY();
  double amplitude = 0.0;
  double frequency = 0.0;
  std::uint64_t start_tick = 0;

  Vec3 position_at(std::uint64_t tick) const;
};

/// Straight-line motion toward a target at constant speed.
struct MoveTo {
  Vec3 target = Vec3::Zero();
  double speed = 0.0;
};

using KinematicMotion = std::variant<std::monostate, Oscillation, MoveTo>;

using Color = std::array<std::uint8_t, 3>;

struct SceneObject {
  std::uint32_t id = 0;
  Shape shape;
  Pose pose;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double mass = 0.0;  ///< 0 = static
  bool kinematic = false;  ///< moved by scripts, immune to forces (mass > 0)
  Material material;
  Color color{128, 128, 128};
  std::vector<std::string> tags;  ///< sorted, unique
  KinematicMotion motion;

  bool is_static() const { return mass == 0.0 && !kinematic; }
  bool is_dynamic() const { return mass > 0.0 && !kinematic; }
  bool has_tag(std::string_view tag) const;
};

struct PhysicsParams {
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double buoyancy = 0.0;  ///< fraction of gravity cancelled for the body (womb fluid)
  double joint_damping = 0.5;       ///< N m s / rad
  double contact_stiffness = 5000;  ///< N / m at shallow depth
  double contact_hardening_depth = 0.003;  ///< m; force k d (1 + (d/d0)^2), 0 = linear
  double contact_damping = 50;      ///< N s / m
  Material body_material{0.8, 0.0};
};

struct BodyState {
  JointVector joint_angles{};
  JointVector joint_velocities{};
  std::array<double, kNumEyeDof> eye_angles{};  ///< yaw, pitch, torsion
  Pose root_pose;
  Vec3 root_velocity = Vec3::Zero();
  double vocalization = 0.0;  ///< last commanded level in [0, 1]
  Vec3 head_velocity = Vec3::Zero();
  Vec3 head_velocity_prev = Vec3::Zero();
  std::vector<Pose> link_poses;  ///< forward kinematics of joint_angles; never stale
};

struct InteroState {
  double energy = 1.0;
  double decay_rate = 1.0 / 14400.0;  ///< per sim-second
  double pending_feed = 0.0;
};

struct WorldState {
  std::uint64_t tick = 0;
  std::string scene_id;
  CounterRng rng;
  PhysicsParams physics;
  double light = 1.0;
  double start_age_days = 0.0;
  std::vector<SceneObject> objects;  ///< sorted by id
  BodyState body;
  InteroState intero;
  CaregiverState caregiver;
  std::shared_ptr<const BodyModel> model;

  double sim_time() const { return ticks_to_seconds(tick); }
  const SceneObject* find(std::uint32_t id) const;
  SceneObject* find(std::uint32_t id);
};

/// Initial agent configuration inside a scene.
struct AgentPlacement {
  Pose root;
  JointVector joint_angles{};
  std::array<double, kNumEyeDof> eye_angles{};
};

/// Parsed and validated scene document.
struct SceneSpec {
  std::uint64_t seed = 0;
  std::string scene_id;
  double light = 1.0;
  double age_days = 0.0;
  PhysicsParams physics;
  InteroState intero;
  std::vector<SceneObject> objects;
  AgentPlacement agent;
  std::shared_ptr<const BodyModel> body;
  std::shared_ptr<const CaregiverScript> caregiver;
  std::filesystem::path source;  ///< file the spec came from, if any

  /// Validates and resolves `body_spec_ref` / `caregiver_script_ref`
  /// relative to `base_dir`. Throws ValidationError naming the field.
  static SceneSpec from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  static SceneSpec load(const std::filesystem::path& path);
};

/// Motor command after stage gating: joint torques (N m) and eye rates (rad/s).
struct MotorCommand {
  JointVector torque{};
  std::array<double, kNumEyeDof> eye_velocity{};
  double vocalization = 0.0;
};

WorldState load_scene(const SceneSpec& spec);

/// Advances one tick of kDt. Deterministic: identical inputs give
/// bit-identical outputs. Throws NonFiniteActionError on NaN/Inf input.
WorldState step_world(WorldState state, const MotorCommand& motor, const CaregiverCommand& care);

enum class HitKind : std::uint8_t { Object, BodyLink };

struct Hit {
  HitKind kind = HitKind::Object;
  std::uint32_t id = 0;  ///< object id or link index
  double distance = 0.0;
  Vec3 normal = Vec3::Zero();
  Color color{};
};

struct RaycastOptions {
  bool include_body = false;
  int exclude_link = -1;
};

/// Nearest hit along a unit ray; ties go to the lowest object id.
/// Throws Error for a zero-length direction or one not normalized within 1e-6.
std::optional<Hit> raycast(const WorldState& state, const Vec3& origin, const Vec3& direction,
                           const RaycastOptions& opts = {});

/// Deepest penetration of any body collision sphere into a static object.
double max_static_penetration(const WorldState& state);

/// Eye position and gaze direction in world coordinates.
struct Gaze {
  Vec3 origin;
  Vec3 direction;
  Vec3 up;
  Vec3 right;
};
Gaze eye_gaze(const WorldState& state);

/// Head link pose and the head-frame point velocity used by the vestibular sense.
Vec3 head_point_velocity(const WorldState& state);

inline constexpr std::uint32_t kStateSchemaVersion = 1;

Bytes serialize_state(const WorldState& state);
/// Inverse of serialize_state. Needs the body model and caregiver script that
/// were in use (they are referenced, not embedded).
WorldState deserialize_state(std::span<const std::uint8_t> bytes,
                             std::shared_ptr<const BodyModel> model,
                             std::shared_ptr<const CaregiverScript> script);
std::uint64_t state_hash(const WorldState& state);

/// Keeps body and caregiver state but swaps scene objects and parameters.
WorldState transition_scene(const WorldState& state, const SceneSpec& next);

}  // namespace sedro
