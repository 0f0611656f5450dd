#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedro/geometry.hpp"

namespace sedro {

inline constexpr std::size_t kNumMuscles = 53;
inline constexpr std::size_t kNumEyeDof = 3;
inline constexpr std::size_t kNumActionChannels = kNumMuscles + kNumEyeDof;
inline constexpr std::size_t kNumTouchSensors = 128;
/// Channel of the vocalization actuator (last muscle channel).
inline constexpr std::size_t kVocalChannel = 52;

using JointVector = std::array<double, kNumMuscles>;

struct LinkSpec {
  std::string name;
  int parent = -1;  ///< -1 for the root (pelvis)
  Vec3 joint_offset = Vec3::Zero();
  double mass = 0.0;
  Vec3 seg_a = Vec3::Zero();  ///< capsule segment in link frame (a == b: sphere)
  Vec3 seg_b = Vec3::Zero();
  double radius = 0.0;
  Shape shape;
  Pose shape_pose;  ///< shape frame relative to link frame
  std::vector<Vec3> sphere_centers;  ///< collision proxies (link frame), radius = `radius`
  std::vector<int> joints;           ///< non-internal DOFs of this link, rotation order
};

struct JointSpec {
  std::string name;
  int link = -1;
  int axis = 0;  ///< 0 = x, 1 = y, 2 = z (link frame)
  bool internal = false;  ///< no geometric effect (fingers, jaw, vocalization)
  double lower = 0.0;
  double upper = 0.0;
  double max_torque = 0.0;
  double inertia = 0.0;  ///< effective joint-space inertia, kg m^2
};

struct TouchSensor {
  int link = -1;
  Vec3 local = Vec3::Zero();  ///< link frame
  double radius = 0.0;
  std::string region;
};

struct TouchRegion {
  std::string name;
  std::size_t count = 0;
  double area = 0.0;  ///< m^2 of skin covered
  double density() const { return area > 0.0 ? static_cast<double>(count) / area : 0.0; }
};

struct EyeSpec {
  int head_link = -1;
  Vec3 offset = Vec3::Zero();  ///< cyclopean eye position in head frame
  std::array<double, 3> lower{};
  std::array<double, 3> upper{};
  double max_speed = 5.24;  ///< rad/s
};

/// Immutable morphology: link tree, joints (in action-channel order), eyes,
/// touch layout. Loaded once and shared by every state that uses it.
class BodyModel {
 public:
  static BodyModel from_json(const nlohmann::json& doc);
  static BodyModel load(const std::filesystem::path& path);

  const std::vector<LinkSpec>& links() const { return links_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<TouchSensor>& touch_sensors() const { return sensors_; }
  const std::vector<TouchRegion>& touch_regions() const { return regions_; }
  const EyeSpec& eyes() const { return eyes_; }
  std::array<std::uint8_t, 3> skin_color() const { return skin_color_; }

  double total_mass() const { return total_mass_; }
  int head_link() const { return eyes_.head_link; }
  int link_index(std::string_view name) const;
  int joint_index(std::string_view name) const;
  /// Non-internal DOFs whose motion moves `link` (root to link).
  const std::vector<int>& chain(int link) const { return chains_[static_cast<std::size_t>(link)]; }
  /// Tree distance between two links (number of edges).
  int tree_distance(int a, int b) const;
  const std::string& name() const { return name_; }

 private:
  void finalize();

  std::string name_;
  std::vector<LinkSpec> links_;
  std::vector<JointSpec> joints_;
  std::vector<TouchSensor> sensors_;
  std::vector<TouchRegion> regions_;
  std::vector<std::vector<int>> chains_;
  EyeSpec eyes_;
  std::array<std::uint8_t, 3> skin_color_{230, 190, 160};
  double total_mass_ = 0.0;
};

/// Forward-kinematics result for one posture.
struct Kinematics {
  std::vector<Pose> link_poses;
  std::array<Vec3, kNumMuscles> joint_axis{};    ///< world axis (zero for internal DOFs)
  std::array<Vec3, kNumMuscles> joint_origin{};  ///< world pivot
};

Kinematics forward_kinematics(const BodyModel& model, const Pose& root, const JointVector& q);

}  // namespace sedro
