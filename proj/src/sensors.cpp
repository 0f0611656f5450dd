#include "sedro/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sedro/error.hpp"

namespace sedro {

Action Action::from_values(std::span<const double> v) {
  if (v.size() != kNumActionChannels)
    throw ValidationError("action", "expected " + std::to_string(kNumActionChannels) + " channels, got " +
                                        std::to_string(v.size()));
  Action a;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw NonFiniteActionError(i);
    const double c = std::clamp(v[i], -1.0, 1.0);
    if (i < kNumMuscles)
      a.muscle[i] = c;
    else
      a.eye[i - kNumMuscles] = c;
  }
  return a;
}

Action Action::from_floats(std::span<const float> v) {
  std::vector<double> d(v.begin(), v.end());
  return from_values(d);
}

std::array<double, kNumActionChannels> Action::values() const {
  std::array<double, kNumActionChannels> out{};
  std::copy(muscle.begin(), muscle.end(), out.begin());
  std::copy(eye.begin(), eye.end(), out.begin() + kNumMuscles);
  return out;
}

MotorCommand apply_action(const Action& a, const StageParams& stage, const BodyModel& model) {
  MotorCommand m;
  const auto& joints = model.joints();
  for (std::size_t i = 0; i < kNumMuscles; ++i)
    m.torque[i] = std::clamp(a.muscle[i], -1.0, 1.0) * joints[i].max_torque * stage.strength_factor;
  for (std::size_t k = 0; k < kNumEyeDof; ++k)
    m.eye_velocity[k] = std::clamp(a.eye[k], -1.0, 1.0) * model.eyes().max_speed;
  m.vocalization = std::clamp(a.muscle[kVocalChannel], 0.0, 1.0);
  return m;
}

// Retina -----------------------------------------------------------------

namespace {

double radical_inverse(std::uint32_t k) {
  double inv = 0.5, x = 0.0;
  while (k) {
    if (k & 1u) x += inv;
    inv *= 0.5;
    k >>= 1;
  }
  return x;
}

/// All indices 0..n-1 in van der Corput order.
std::vector<int> vdc_order(int n) {
  std::vector<int> order;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (std::uint32_t k = 0; static_cast<int>(order.size()) < n; ++k) {
    const int idx = std::min(n - 1, static_cast<int>(radical_inverse(k) * n));
    if (!seen[static_cast<std::size_t>(idx)]) {
      seen[static_cast<std::size_t>(idx)] = true;
      order.push_back(idx);
    }
  }
  return order;
}

std::uint8_t shade(std::uint8_t c, double light, double lambert) {
  const double v = std::round(static_cast<double>(c) * light * (0.35 + 0.65 * lambert));
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

}  // namespace

std::vector<int> acuity_samples(int px, double acuity) {
  const double a = std::clamp(acuity, 0.0, 1.0);
  int m = static_cast<int>(std::ceil(px * a - 1e-12));
  m = std::clamp(m, 1, px);
  auto order = vdc_order(px);
  order.resize(static_cast<std::size_t>(m));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::uint8_t> render_view(const WorldState& state, const Gaze& gaze, int px, double fov_deg,
                                      double acuity) {
  const auto samples = acuity_samples(px, acuity);
  // Nearest sample for every pixel index; ties go to the lower sample.
  std::vector<int> nearest(static_cast<std::size_t>(px));
  for (int i = 0; i < px; ++i) {
    int best = samples.front();
    for (int s : samples)
      if (std::abs(s - i) < std::abs(best - i)) best = s;
    nearest[static_cast<std::size_t>(i)] = best;
  }

  const double half = std::tan(fov_deg * std::numbers::pi / 360.0);
  const RaycastOptions opts{true, state.model->head_link()};
  const auto upx = static_cast<std::size_t>(px);
  std::vector<std::uint8_t> img(upx * upx * 3, 0);
  std::vector<bool> done(upx * upx, false);

  for (int r : samples) {
    for (int c : samples) {
      const double u = ((c + 0.5) / px * 2.0 - 1.0) * half;
      const double v = (1.0 - (r + 0.5) / px * 2.0) * half;
      const Vec3 d = (gaze.direction + u * gaze.right + v * gaze.up).normalized();
      const auto hit = raycast(state, gaze.origin, d, opts);
      const std::size_t at = (static_cast<std::size_t>(r) * upx + static_cast<std::size_t>(c)) * 3;
      if (hit) {
        const double lambert = std::abs(hit->normal.dot(d));
        for (int k = 0; k < 3; ++k) img[at + static_cast<std::size_t>(k)] = shade(hit->color[static_cast<std::size_t>(k)], state.light, lambert);
      }
      done[static_cast<std::size_t>(r) * upx + static_cast<std::size_t>(c)] = true;
    }
  }
  for (std::size_t r = 0; r < upx; ++r) {
    for (std::size_t c = 0; c < upx; ++c) {
      if (done[r * upx + c]) continue;
      const auto src = (static_cast<std::size_t>(nearest[r]) * upx + static_cast<std::size_t>(nearest[c])) * 3;
      std::copy_n(img.begin() + static_cast<std::ptrdiff_t>(src), 3, img.begin() + static_cast<std::ptrdiff_t>((r * upx + c) * 3));
    }
  }
  return img;
}

RetinaImages sense_retina(const WorldState& state, double acuity, const RetinaConfig& cfg) {
  if (!(acuity > 0.0 && acuity <= 1.0)) throw ValidationError("acuity", "must lie in (0, 1]");
  const Gaze g = eye_gaze(state);
  return {render_view(state, g, cfg.fovea_px, cfg.fovea_fov_deg, acuity),
          render_view(state, g, cfg.periphery_px, cfg.periphery_fov_deg, acuity)};
}

// Touch ------------------------------------------------------------------

std::array<std::uint8_t, kNumTouchSensors> sense_touch(const WorldState& state) {
  std::array<std::uint8_t, kNumTouchSensors> bits{};
  const BodyModel& model = *state.model;
  const auto& links = model.links();
  const auto& sensors = model.touch_sensors();
  std::vector<Pose> shape_poses;
  shape_poses.reserve(links.size());
  for (std::size_t l = 0; l < links.size(); ++l) shape_poses.push_back(state.body.link_poses[l] * links[l].shape_pose);

  for (std::size_t i = 0; i < sensors.size() && i < kNumTouchSensors; ++i) {
    const auto& ts = sensors[i];
    const auto sl = static_cast<std::size_t>(ts.link);
    const Vec3 p = state.body.link_poses[sl].apply(ts.local);
    bool hit = false;
    for (const auto& o : state.objects) {
      if (!o.shape.hollow && (p - o.pose.position).norm() > ts.radius + o.shape.bounding_radius()) continue;
      if (signed_distance(o.shape, o.pose, p).value <= ts.radius) {
        hit = true;
        break;
      }
    }
    for (std::size_t l = 0; !hit && l < links.size(); ++l) {
      if (model.tree_distance(ts.link, static_cast<int>(l)) <= 2) continue;
      if ((p - shape_poses[l].position).norm() > ts.radius + links[l].shape.bounding_radius()) continue;
      if (signed_distance(links[l].shape, shape_poses[l], p).value <= ts.radius) hit = true;
    }
    bits[i] = hit ? 1 : 0;
  }
  return bits;
}

// Vestibular -------------------------------------------------------------

std::array<double, 6> sense_vestibular(const WorldState& state) {
  const auto head = static_cast<std::size_t>(state.model->head_link());
  const Pose& pose = state.body.link_poses[head];
  Vec3 acc = Vec3::Zero();
  if (state.tick > 0) acc = pose.inverse_rotate((state.body.head_velocity - state.body.head_velocity_prev) / kDt);
  Vec3 grav = Vec3::Zero();
  const double g = state.physics.gravity.norm();
  if (g > 0.0) grav = pose.inverse_rotate(state.physics.gravity / g);
  return {acc.x(), acc.y(), acc.z(), grav.x(), grav.y(), grav.z()};
}

Observation observe(const WorldState& state, const StageParams& stage, const RetinaConfig& cfg) {
  Observation o;
  o.tick = state.tick;
  const auto retina = sense_retina(state, stage.acuity_factor, cfg);
  if (retina.fovea.size() != o.fovea.size() || retina.periphery.size() != o.periphery.size())
    throw Error("retina configuration does not match the observation layout");
  std::copy(retina.fovea.begin(), retina.fovea.end(), o.fovea.begin());
  std::copy(retina.periphery.begin(), retina.periphery.end(), o.periphery.begin());
  o.touch = sense_touch(state);
  for (std::size_t i = 0; i < kNumMuscles; ++i) {
    o.proprio[i] = static_cast<float>(state.body.joint_angles[i]);
    o.proprio[kNumMuscles + i] = static_cast<float>(state.body.joint_velocities[i]);
  }
  for (std::size_t k = 0; k < 3; ++k) o.eye_pose[k] = static_cast<float>(state.body.eye_angles[k]);
  const auto vest = sense_vestibular(state);
  for (std::size_t k = 0; k < 6; ++k) o.vestibular[k] = static_cast<float>(vest[k]);
  o.interoception = {static_cast<float>(state.intero.energy), 0.0f, 0.0f, 0.0f};
  return o;
}

}  // namespace sedro
