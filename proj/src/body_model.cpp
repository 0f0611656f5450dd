#include "sedro/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "sedro/error.hpp"

namespace sedro {

using nlohmann::json;

namespace {

Vec3 vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(field, "expected [x, y, z]");
  Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!all_finite(v)) throw ValidationError(field, "non-finite component");
  return v;
}

int axis_from(const std::string& s, const std::string& field) {
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  throw ValidationError(field, "axis must be x, y or z");
}

/// Orthonormal pair perpendicular to `u`, with e1 as close to `toward` as possible.
std::pair<Vec3, Vec3> basis_around(const Vec3& u, const Vec3& toward, const std::string& field) {
  Vec3 e1 = toward - toward.dot(u) * u;
  if (e1.norm() < 1e-9) throw ValidationError(field, "reference direction parallel to link axis");
  e1.normalize();
  return {e1, u.cross(e1)};
}

}  // namespace

int BodyModel::link_index(std::string_view name) const {
  for (std::size_t i = 0; i < links_.size(); ++i)
    if (links_[i].name == name) return static_cast<int>(i);
  return -1;
}

int BodyModel::joint_index(std::string_view name) const {
  for (std::size_t i = 0; i < joints_.size(); ++i)
    if (joints_[i].name == name) return static_cast<int>(i);
  return -1;
}

int BodyModel::tree_distance(int a, int b) const {
  auto depth = [&](int l) {
    int d = 0;
    while (links_[static_cast<std::size_t>(l)].parent >= 0) {
      l = links_[static_cast<std::size_t>(l)].parent;
      ++d;
    }
    return d;
  };
  int da = depth(a);
  int db = depth(b);
  int dist = 0;
  while (da > db) { a = links_[static_cast<std::size_t>(a)].parent; --da; ++dist; }
  while (db > da) { b = links_[static_cast<std::size_t>(b)].parent; --db; ++dist; }
  while (a != b) {
    a = links_[static_cast<std::size_t>(a)].parent;
    b = links_[static_cast<std::size_t>(b)].parent;
    dist += 2;
  }
  return dist;
}

BodyModel BodyModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open body spec " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
  return from_json(doc);
}

BodyModel BodyModel::from_json(const json& doc) {
  BodyModel m;
  try {
    m.name_ = doc.value("name", "body");
    const auto& links = doc.at("links");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto& lj = links[i];
      const std::string f = "links[" + std::to_string(i) + "]";
      LinkSpec l;
      l.name = lj.at("name").get<std::string>();
      if (m.link_index(l.name) >= 0) throw ValidationError(f + ".name", "duplicate link " + l.name);
      if (!lj.at("parent").is_null()) {
        l.parent = m.link_index(lj.at("parent").get<std::string>());
        if (l.parent < 0) throw ValidationError(f + ".parent", "parent must be declared earlier");
      } else if (!m.links_.empty()) {
        throw ValidationError(f + ".parent", "only the first link may be the root");
      }
      l.joint_offset = vec3(lj.value("offset", json::array({0, 0, 0})), f + ".offset");
      l.mass = lj.at("mass").get<double>();
      if (!(l.mass > 0.0)) throw ValidationError(f + ".mass", "must be positive");
      const auto& g = lj.at("geometry");
      l.seg_a = vec3(g.at("a"), f + ".geometry.a");
      l.seg_b = vec3(g.at("b"), f + ".geometry.b");
      l.radius = g.at("radius").get<double>();
      if (!(l.radius > 0.0)) throw ValidationError(f + ".geometry.radius", "must be positive");
      const Vec3 axis = l.seg_b - l.seg_a;
      const Vec3 center = 0.5 * (l.seg_a + l.seg_b);
      if (axis.norm() < 1e-12) {
        l.shape = Shape::sphere(l.radius);
        l.shape_pose = Pose{center, Quat::Identity()};
      } else {
        l.shape = Shape::capsule(l.radius, 0.5 * axis.norm());
        l.shape_pose = Pose{center, Quat::FromTwoVectors(Vec3::UnitZ(), axis)};
      }
      const int n = lj.value("collision_spheres", 1);
      if (n < 1) throw ValidationError(f + ".collision_spheres", "must be >= 1");
      for (int k = 0; k < n; ++k) {
        const double t = n == 1 ? 0.5 : static_cast<double>(k) / (n - 1);
        l.sphere_centers.push_back(l.seg_a + t * axis);
      }
      m.links_.push_back(std::move(l));
    }
    if (m.links_.empty()) throw ValidationError("links", "empty");

    const auto& joints = doc.at("joints");
    if (joints.size() != kNumMuscles)
      throw ValidationError("joints", "expected " + std::to_string(kNumMuscles) + " joints, got " +
                                          std::to_string(joints.size()));
    for (std::size_t i = 0; i < joints.size(); ++i) {
      const auto& jj = joints[i];
      const std::string f = "joints[" + std::to_string(i) + "]";
      JointSpec j;
      j.name = jj.at("name").get<std::string>();
      if (m.joint_index(j.name) >= 0) throw ValidationError(f + ".name", "duplicate joint " + j.name);
      j.link = m.link_index(jj.at("link").get<std::string>());
      if (j.link < 0) throw ValidationError(f + ".link", "unknown link");
      j.internal = jj.value("internal", false);
      if (!j.internal) {
        if (j.link == 0) throw ValidationError(f + ".link", "root link has no joints");
        j.axis = axis_from(jj.at("axis").get<std::string>(), f + ".axis");
      }
      j.lower = jj.at("lower").get<double>();
      j.upper = jj.at("upper").get<double>();
      if (!(j.lower <= j.upper)) throw ValidationError(f, "lower > upper");
      if (j.lower > 0.0 || j.upper < 0.0) throw ValidationError(f, "limits must contain 0");
      j.max_torque = jj.at("max_torque").get<double>();
      if (!(j.max_torque >= 0.0)) throw ValidationError(f + ".max_torque", "must be >= 0");
      j.inertia = jj.value("inertia", 0.0);
      if (j.internal && !(j.inertia > 0.0))
        throw ValidationError(f + ".inertia", "internal joints need a positive inertia");
      m.joints_.push_back(std::move(j));
    }

    const auto& eyes = doc.at("eyes");
    m.eyes_.head_link = m.link_index(eyes.at("link").get<std::string>());
    if (m.eyes_.head_link < 0) throw ValidationError("eyes.link", "unknown link");
    m.eyes_.offset = vec3(eyes.at("offset"), "eyes.offset");
    const char* names[3] = {"yaw", "pitch", "torsion"};
    for (int k = 0; k < 3; ++k) {
      const auto& lim = eyes.at("limits").at(names[k]);
      m.eyes_.lower[static_cast<std::size_t>(k)] = lim.at(0).get<double>();
      m.eyes_.upper[static_cast<std::size_t>(k)] = lim.at(1).get<double>();
    }
    m.eyes_.max_speed = eyes.value("max_speed", 5.24);

    if (doc.contains("skin_color")) {
      for (int k = 0; k < 3; ++k)
        m.skin_color_[static_cast<std::size_t>(k)] = doc["skin_color"][static_cast<std::size_t>(k)].get<std::uint8_t>();
    }

    const auto& touch = doc.at("touch");
    const double radius = touch.at("radius").get<double>();
    const auto& regions = touch.at("regions");
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const auto& rj = regions[i];
      const std::string f = "touch.regions[" + std::to_string(i) + "]";
      const std::string region = rj.at("region").get<std::string>();
      const int link = m.link_index(rj.at("link").get<std::string>());
      if (link < 0) throw ValidationError(f + ".link", "unknown link");
      const auto& L = m.links_[static_cast<std::size_t>(link)];
      const std::string pattern = rj.at("pattern").get<std::string>();
      const Vec3 toward = vec3(rj.at("toward"), f + ".toward").normalized();
      double area = 0.0;
      std::size_t before = m.sensors_.size();
      if (pattern == "ring") {
        const Vec3 axis = L.seg_b - L.seg_a;
        if (axis.norm() < 1e-12) throw ValidationError(f + ".pattern", "ring needs a capsule link");
        const Vec3 u = axis.normalized();
        auto [e1, e2] = basis_around(u, toward, f + ".toward");
        const int rings = rj.at("rings").get<int>();
        const int per = rj.at("per_ring").get<int>();
        const double span = rj.value("arc_span_deg", 360.0) * std::numbers::pi / 180.0;
        for (int r = 0; r < rings; ++r) {
          for (int s = 0; s < per; ++s) {
            const double theta = -0.5 * span + (s + 0.5) * span / per;
            const Vec3 dir = std::cos(theta) * e1 + std::sin(theta) * e2;
            const Vec3 p = L.seg_a + axis * ((r + 0.5) / rings) + L.radius * dir;
            m.sensors_.push_back({link, p, radius, region});
          }
        }
        area = span * L.radius * axis.norm();
      } else if (pattern == "cap") {
        const Vec3 c = 0.5 * (L.seg_a + L.seg_b);
        const Vec3 ref = std::abs(toward.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
        auto [e1, e2] = basis_around(toward, ref, f + ".toward");
        const int rows = rj.at("rows").get<int>();
        const int per = rj.at("per_row").get<int>();
        const double half = rj.at("half_angle_deg").get<double>() * std::numbers::pi / 180.0;
        for (int r = 0; r < rows; ++r) {
          const double phi = half * (r + 0.5) / rows;
          for (int s = 0; s < per; ++s) {
            const double alpha = (s + 0.5) * 2.0 * std::numbers::pi / per;
            const Vec3 dir = std::cos(phi) * toward +
                             std::sin(phi) * (std::cos(alpha) * e1 + std::sin(alpha) * e2);
            m.sensors_.push_back({link, c + L.radius * dir, radius, region});
          }
        }
        area = 2.0 * std::numbers::pi * L.radius * L.radius * (1.0 - std::cos(half));
      } else {
        throw ValidationError(f + ".pattern", "unknown pattern " + pattern);
      }
      auto it = std::find_if(m.regions_.begin(), m.regions_.end(),
                             [&](const TouchRegion& tr) { return tr.name == region; });
      if (it == m.regions_.end()) {
        m.regions_.push_back({region, 0, 0.0});
        it = std::prev(m.regions_.end());
      }
      it->count += m.sensors_.size() - before;
      it->area += area;
    }
    if (m.sensors_.size() != kNumTouchSensors)
      throw ValidationError("touch.regions", "expected " + std::to_string(kNumTouchSensors) +
                                                 " sensors, got " + std::to_string(m.sensors_.size()));
  } catch (const json::exception& e) {
    throw ValidationError("body", e.what());
  }
  m.finalize();
  return m;
}

void BodyModel::finalize() {
  total_mass_ = 0.0;
  for (const auto& l : links_) total_mass_ += l.mass;

  for (auto& l : links_) l.joints.clear();
  for (std::size_t j = 0; j < joints_.size(); ++j)
    if (!joints_[j].internal) links_[static_cast<std::size_t>(joints_[j].link)].joints.push_back(static_cast<int>(j));

  chains_.assign(links_.size(), {});
  for (std::size_t l = 0; l < links_.size(); ++l) {
    std::vector<int> chain;
    for (int cur = static_cast<int>(l); cur >= 0; cur = links_[static_cast<std::size_t>(cur)].parent) {
      const auto& js = links_[static_cast<std::size_t>(cur)].joints;
      chain.insert(chain.begin(), js.begin(), js.end());
    }
    chains_[l] = std::move(chain);
  }

  // Effective joint inertia about each axis from the rest posture: point
  // masses at link centers plus a small per-link rotational term.
  JointVector zero{};
  const Kinematics k = forward_kinematics(*this, Pose{}, zero);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    auto& js = joints_[j];
    if (js.internal) continue;
    double inertia = 0.0;
    for (std::size_t l = 0; l < links_.size(); ++l) {
      const auto& ch = chains_[l];
      if (std::find(ch.begin(), ch.end(), static_cast<int>(j)) == ch.end()) continue;
      const auto& L = links_[l];
      const Vec3 com = k.link_poses[l].apply(0.5 * (L.seg_a + L.seg_b));
      const Vec3 r = com - k.joint_origin[j];
      const Vec3 perp = r - r.dot(k.joint_axis[j]) * k.joint_axis[j];
      inertia += L.mass * (perp.squaredNorm() + 0.25 * L.radius * L.radius);
    }
    if (js.inertia <= 0.0) js.inertia = std::max(inertia, 1e-4);
  }
}

Kinematics forward_kinematics(const BodyModel& model, const Pose& root, const JointVector& q) {
  const auto& links = model.links();
  const auto& joints = model.joints();
  Kinematics k;
  k.joint_axis.fill(Vec3::Zero());
  k.joint_origin.fill(Vec3::Zero());
  k.link_poses.resize(links.size());
  for (std::size_t l = 0; l < links.size(); ++l) {
    const auto& L = links[l];
    if (L.parent < 0) {
      k.link_poses[l] = root;
      continue;
    }
    const Pose& parent = k.link_poses[static_cast<std::size_t>(L.parent)];
    const Vec3 origin = parent.apply(L.joint_offset);
    Quat R = parent.orientation;
    for (int j : L.joints) {
      const auto ju = static_cast<std::size_t>(j);
      k.joint_axis[ju] = R * Vec3::Unit(joints[ju].axis);
      k.joint_origin[ju] = origin;
      R = R * axis_rotation(joints[ju].axis, q[ju]);
    }
    R.normalize();
    k.link_poses[l] = Pose{origin, R};
  }
  return k;
}

}  // namespace sedro
