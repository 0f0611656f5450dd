#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sedro/development.hpp"
#include "sedro/world.hpp"

namespace sedro {

struct Action {
  std::array<double, kNumMuscles> muscle{};
  std::array<double, kNumEyeDof> eye{};

  /// Builds an action from 56 values (muscles then eyes). Throws
  /// ValidationError on the wrong count and NonFiniteActionError naming the
  /// first non-finite channel; values outside [-1, 1] are clamped.
  static Action from_values(std::span<const double> values);
  static Action from_floats(std::span<const float> values);
  std::array<double, kNumActionChannels> values() const;
};

/// Stage-gated motor command: torque = muscle * max_torque * strength,
/// eye rate = eye * max_speed, vocalization = muscle[52] clamped to [0, 1].
MotorCommand apply_action(const Action& action, const StageParams& stage, const BodyModel& model);

struct RetinaConfig {
  int fovea_px = 32;
  double fovea_fov_deg = 20.0;
  int periphery_px = 16;
  double periphery_fov_deg = 120.0;
};

inline constexpr std::size_t kFoveaBytes = 32 * 32 * 3;
inline constexpr std::size_t kPeripheryBytes = 16 * 16 * 3;
inline constexpr std::size_t kProprioSize = 2 * kNumMuscles;

struct Observation {
  std::uint64_t tick = 0;
  std::array<std::uint8_t, kFoveaBytes> fovea{};
  std::array<std::uint8_t, kPeripheryBytes> periphery{};
  std::array<std::uint8_t, kNumTouchSensors> touch{};  ///< 0 or 1
  std::array<float, kProprioSize> proprio{};
  std::array<float, 3> eye_pose{};
  std::array<float, 6> vestibular{};
  std::array<float, 4> interoception{};

  bool operator==(const Observation&) const = default;
};

/// Row-major RGB image of `px` x `px` rendered along `gaze`. Acuity a keeps
/// ceil(px * a) sample rows and columns and fills the rest from the nearest
/// sample.
std::vector<std::uint8_t> render_view(const WorldState& state, const Gaze& gaze, int px, double fov_deg,
                                      double acuity);

/// Sample indices used at a given acuity; nested as acuity grows.
std::vector<int> acuity_samples(int px, double acuity);

struct RetinaImages {
  std::vector<std::uint8_t> fovea;
  std::vector<std::uint8_t> periphery;
};
RetinaImages sense_retina(const WorldState& state, double acuity, const RetinaConfig& cfg = {});

std::array<std::uint8_t, kNumTouchSensors> sense_touch(const WorldState& state);

/// Head-frame linear acceleration (x3) then head-frame gravity direction (x3).
std::array<double, 6> sense_vestibular(const WorldState& state);

Observation observe(const WorldState& state, const StageParams& stage, const RetinaConfig& cfg = {});

}  // namespace sedro
