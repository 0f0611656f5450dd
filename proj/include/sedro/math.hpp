#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace sedro {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Fixed simulation step: 1/50 s.
inline constexpr int kTicksPerSecond = 50;
inline constexpr double kDt = 1.0 / kTicksPerSecond;

/// Exact tick -> seconds conversion (tick / 50, not tick * 0.02).
inline double ticks_to_seconds(std::uint64_t tick) {
  return static_cast<double>(tick) / kTicksPerSecond;
}

/// Rigid transform: rotation then translation.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Vec3 apply(const Vec3& local) const { return position + orientation * local; }
  Vec3 rotate(const Vec3& v) const { return orientation * v; }
  Vec3 inverse_rotate(const Vec3& v) const { return orientation.conjugate() * v; }
  Vec3 to_local(const Vec3& world) const { return inverse_rotate(world - position); }

  Pose operator*(const Pose& rhs) const {
    return Pose{apply(rhs.position), orientation * rhs.orientation};
  }
};

inline Quat axis_rotation(int axis, double angle) {
  return Quat(Eigen::AngleAxisd(angle, Vec3::Unit(axis)));
}

inline bool all_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace sedro
