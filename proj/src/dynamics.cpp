#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "sedro/error.hpp"
#include "sedro/interoception.hpp"
#include "sedro/world.hpp"

namespace sedro {

namespace {

constexpr double kObjectAngularDamping = 0.05;  // 1/s, rolling resistance stand-in
// Body spheres closer than this to a surface are contact candidates; the
// spring acts on the end-of-step depth so fast limbs cannot skip past it.
constexpr double kSpeculativeMargin = 0.01;
constexpr double kReachSafety = 1.5;
constexpr int kNewtonIterations = 60;
constexpr double kNewtonTolerance = 1e-12;  // m/s, largest velocity update

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

struct ContactLaw {
  double stiffness;
  double hardening_depth;
  double damping;
  double friction;

  // k d (1 + (d/d0)^2): linear for shallow contacts, stiffer when pressed deep.
  double force(double d) const {
    const double r = hardening_depth > 0.0 ? d / hardening_depth : 0.0;
    return stiffness * d * (1.0 + r * r);
  }
  double slope(double d) const {
    const double r = hardening_depth > 0.0 ? d / hardening_depth : 0.0;
    return stiffness * (1.0 + 3.0 * r * r);
  }
  // Stored energy, zero when separated.
  double energy(double d) const {
    if (d <= 0.0) return 0.0;
    const double r = hardening_depth > 0.0 ? d / hardening_depth : 0.0;
    return stiffness * d * d * (0.5 + 0.25 * r * r);
  }
};

ContactLaw contact_law(const PhysicsParams& p, const Material& a, const Material& b) {
  const double restitution = std::max(a.restitution, b.restitution);
  return {p.contact_stiffness, p.contact_hardening_depth, p.contact_damping * (1.0 - restitution),
          std::sqrt(a.friction * b.friction)};
}

/// One penalty contact on a mover: `point` on the mover, `normal` pushing the mover out.
struct Contact {
  int link = -1;  // body contacts only
  Vec3 point;
  Vec3 normal;
  double depth;
  Vec3 obstacle_velocity;
  ContactLaw law;
};

Vec3 object_point_velocity(const SceneObject& o, const Vec3& p) {
  return o.linear_velocity + o.angular_velocity.cross(p - o.pose.position);
}

/// Tangential damping for the Coulomb-clamped viscous friction law,
/// linearized at the current sliding speed.
double tangential_damping(const Contact& c, const Vec3& v_rel) {
  const Vec3 vt = v_rel - v_rel.dot(c.normal) * c.normal;
  const double speed = vt.norm();
  const double cap = c.law.friction * c.law.force(c.depth);
  const double viscous = c.law.damping;
  if (speed * viscous <= cap) return viscous;
  return cap / speed;
}

/// min 1/2 u'Au - r'u subject to lo <= u <= hi, A symmetric positive definite.
/// Primal active-set method started from the clamped unconstrained optimum.
Eigen::VectorXd solve_box_qp(const Eigen::MatrixXd& A, const Eigen::VectorXd& r, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(r.size());
  Eigen::VectorXd u = A.ldlt().solve(r);
  // 0 free, +1 held at hi, -1 held at lo
  std::vector<int> held(static_cast<std::size_t>(n), 0);
  bool any = false;
  for (int k = 0; k < n; ++k) {
    if (u[k] > hi[k]) {
      u[k] = hi[k];
      held[static_cast<std::size_t>(k)] = 1;
      any = true;
    } else if (u[k] < lo[k]) {
      u[k] = lo[k];
      held[static_cast<std::size_t>(k)] = -1;
      any = true;
    }
  }
  if (!any) return u;

  for (int iter = 0; iter < 4 * n + 8; ++iter) {
    std::vector<int> free_idx;
    for (int k = 0; k < n; ++k)
      if (!held[static_cast<std::size_t>(k)]) free_idx.push_back(k);
    const int m = static_cast<int>(free_idx.size());
    Eigen::VectorXd cand = u;
    if (m > 0) {
      Eigen::MatrixXd Aff(m, m);
      Eigen::VectorXd rf(m);
      for (int a = 0; a < m; ++a) {
        const int ia = free_idx[static_cast<std::size_t>(a)];
        rf[a] = r[ia];
        for (int k = 0; k < n; ++k)
          if (held[static_cast<std::size_t>(k)]) rf[a] -= A(ia, k) * u[k];
        for (int c = 0; c < m; ++c) Aff(a, c) = A(ia, free_idx[static_cast<std::size_t>(c)]);
      }
      const Eigen::VectorXd x = Aff.ldlt().solve(rf);
      for (int a = 0; a < m; ++a) cand[free_idx[static_cast<std::size_t>(a)]] = x[a];
    }

    // Step toward the candidate until the first bound blocks.
    double alpha = 1.0;
    int blocking = -1;
    for (int k : free_idx) {
      const double d = cand[k] - u[k];
      if (d > 0.0 && cand[k] > hi[k]) {
        const double t = (hi[k] - u[k]) / d;
        if (t < alpha) {
          alpha = t;
          blocking = k;
        }
      } else if (d < 0.0 && cand[k] < lo[k]) {
        const double t = (lo[k] - u[k]) / d;
        if (t < alpha) {
          alpha = t;
          blocking = k;
        }
      }
    }
    if (blocking >= 0) {
      for (int k : free_idx) u[k] += alpha * (cand[k] - u[k]);
      const bool up = cand[blocking] > hi[blocking];
      u[blocking] = up ? hi[blocking] : lo[blocking];
      held[static_cast<std::size_t>(blocking)] = up ? 1 : -1;
      continue;
    }
    u = cand;

    // Release the held bound whose multiplier has the wrong sign by the most.
    const Eigen::VectorXd g = A * u - r;
    int release = -1;
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      const int h = held[static_cast<std::size_t>(k)];
      const double wrong = h > 0 ? g[k] : (h < 0 ? -g[k] : 0.0);
      if (wrong > worst) {
        worst = wrong;
        release = k;
      }
    }
    if (release < 0) break;
    held[static_cast<std::size_t>(release)] = 0;
  }
  return u;
}

void advance_kinematic(SceneObject& o, std::uint64_t next_tick) {
  const Vec3 before = o.pose.position;
  if (const auto* osc = std::get_if<Oscillation>(&o.motion)) {
    o.pose.position = osc->position_at(next_tick);
  } else if (const auto* mv = std::get_if<MoveTo>(&o.motion)) {
    const Vec3 delta = mv->target - o.pose.position;
    const double dist = delta.norm();
    const double step = std::min(mv->speed * kDt, dist);
    if (dist > 0.0) o.pose.position += delta * (step / dist);
    if (step == dist) o.motion = std::monostate{};
  } else {
    return;
  }
  o.linear_velocity = (o.pose.position - before) / kDt;
}

void apply_caregiver(WorldState& s, const CaregiverCommand& care) {
  if (!all_finite(care.move)) throw Error("non-finite caregiver move command");
  if (s.caregiver.script) {
    if (auto* body = s.find(s.caregiver.script->body_object)) {
      body->pose.position += care.move * kDt;
      body->linear_velocity = care.move;
      s.caregiver.pose = body->pose.position;
    }
  }
  if (!care.interact) return;
  if (const auto* feed = std::get_if<Feed>(&*care.interact)) {
    if (!(feed->amount >= 0.0) || !std::isfinite(feed->amount)) throw Error("invalid feed amount");
    s.intero.pending_feed += feed->amount;
  } else if (const auto* toy = std::get_if<MoveToy>(&*care.interact)) {
    auto* o = s.find(toy->object);
    if (!o || !o->kinematic) throw Error("MoveToy target " + std::to_string(toy->object) + " is not kinematic");
    if (!all_finite(toy->target) || !(toy->speed >= 0.0)) throw Error("invalid MoveToy trajectory");
    o->motion = MoveTo{toy->target, toy->speed};
  }
}

void step_body(WorldState& s, const MotorCommand& motor) {
  const BodyModel& model = *s.model;
  BodyState& b = s.body;
  const auto& links = model.links();
  const auto& joints = model.joints();
  const PhysicsParams& phys = s.physics;
  const Kinematics kin = forward_kinematics(model, b.root_pose, b.joint_angles);

  // Body point velocity for the current state.
  auto point_velocity = [&](int link, const Vec3& p) {
    Vec3 v = b.root_velocity;
    for (int j : model.chain(link)) {
      const auto ju = static_cast<std::size_t>(j);
      v += kin.joint_axis[ju].cross(p - kin.joint_origin[ju]) * b.joint_velocities[ju];
    }
    return v;
  };

  // Generalized coordinates: 3 root translations then the 53 joints.
  constexpr int kDof = 3 + static_cast<int>(kNumMuscles);
  const double total_mass = model.total_mass();
  const Vec3 gravity_force = total_mass * (1.0 - phys.buoyancy) * phys.gravity;

  auto inertia = [&](int i) { return i < 3 ? total_mass : joints[static_cast<std::size_t>(i - 3)].inertia; };
  auto damping = [&](int i) { return i < 3 ? 0.0 : phys.joint_damping; };
  auto velocity = [&](int i) {
    return i < 3 ? b.root_velocity[i] : b.joint_velocities[static_cast<std::size_t>(i - 3)];
  };
  auto force = [&](int i) { return i < 3 ? gravity_force[i] : motor.torque[static_cast<std::size_t>(i - 3)]; };

  // Contact-free end-of-step speed per DOF, clamped to the joint limits. Any
  // sphere that could reach an obstacle at these speeds becomes a candidate.
  std::array<double, kDof> reach{};
  for (int i = 0; i < kDof; ++i) {
    const double m = inertia(i);
    double v = (m * velocity(i) + kDt * force(i)) / (m + kDt * damping(i));
    if (i >= 3) {
      const auto j = static_cast<std::size_t>(i - 3);
      v = std::clamp(v, std::min(0.0, (joints[j].lower - b.joint_angles[j]) / kDt),
                     std::max(0.0, (joints[j].upper - b.joint_angles[j]) / kDt));
    }
    reach[static_cast<std::size_t>(i)] = std::max(std::abs(v), std::abs(velocity(i)));
  }
  const double root_reach = std::hypot(reach[0], reach[1], reach[2]);

  std::vector<Contact> contacts;
  for (std::size_t l = 0; l < links.size(); ++l) {
    const auto& L = links[l];
    for (const Vec3& local : L.sphere_centers) {
      const Vec3 c = kin.link_poses[l].apply(local);
      double speed = root_reach;
      for (int j : model.chain(static_cast<int>(l))) {
        const auto ju = static_cast<std::size_t>(j);
        speed += reach[3 + ju] * kin.joint_axis[ju].cross(c - kin.joint_origin[ju]).norm();
      }
      for (const auto& o : s.objects) {
        const double margin =
            kSpeculativeMargin + kReachSafety * kDt * (speed + object_point_velocity(o, c).norm());
        if (!o.shape.hollow && (c - o.pose.position).norm() > L.radius + o.shape.bounding_radius() + margin)
          continue;
        const Distance d = signed_distance(o.shape, o.pose, c);
        const double depth = L.radius - d.value;
        if (depth <= -margin) continue;
        const Vec3 p = c - L.radius * d.normal;
        contacts.push_back({static_cast<int>(l), p, d.normal, depth, object_point_velocity(o, p),
                            contact_law(phys, phys.body_material, o.material)});
      }
    }
  }

  std::array<bool, kDof> active{};
  if (!contacts.empty()) {
    active[0] = active[1] = active[2] = true;
    for (const auto& c : contacts)
      for (int j : model.chain(c.link)) active[static_cast<std::size_t>(3 + j)] = true;
  }

  std::array<double, kDof> next{};
  std::array<int, kDof> slot{};
  std::vector<int> index;
  for (int i = 0; i < kDof; ++i) {
    if (active[static_cast<std::size_t>(i)]) {
      slot[static_cast<std::size_t>(i)] = static_cast<int>(index.size());
      index.push_back(i);
    } else {
      // Uncoupled DOF: damping treated implicitly.
      const double m = inertia(i);
      next[static_cast<std::size_t>(i)] = (m * velocity(i) + kDt * force(i)) / (m + kDt * damping(i));
    }
  }

  if (!index.empty()) {
    const int n = static_cast<int>(index.size());
    Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs0(n);
    for (int k = 0; k < n; ++k) {
      const int i = index[static_cast<std::size_t>(k)];
      A0(k, k) = inertia(i) + kDt * damping(i);
      rhs0[k] = inertia(i) * velocity(i) + kDt * force(i);
    }

    // Per-contact Jacobians. Damping acts on contacts already touching at the start of the step.
    struct Row {
      Eigen::MatrixXd J;
      Eigen::RowVectorXd nJ;
      Mat3 D;
      bool damped;
    };
    std::vector<Row> rows;
    rows.reserve(contacts.size());
    for (const auto& c : contacts) {
      Row r;
      r.J = Eigen::MatrixXd::Zero(3, n);
      r.J.block<3, 3>(0, 0).setIdentity();
      for (int j : model.chain(c.link)) {
        const auto ju = static_cast<std::size_t>(j);
        r.J.col(slot[static_cast<std::size_t>(3 + j)]) = kin.joint_axis[ju].cross(c.point - kin.joint_origin[ju]);
      }
      r.nJ = c.normal.transpose() * r.J;
      r.damped = c.depth > 0.0;
      if (r.damped) {
        const Vec3 v_rel = point_velocity(c.link, c.point) - c.obstacle_velocity;
        const double ct = tangential_damping(c, v_rel);
        const Mat3 nn = c.normal * c.normal.transpose();
        r.D = c.law.damping * nn + ct * (Mat3::Identity() - nn);
      }
      rows.push_back(std::move(r));
    }

    // Velocity bounds that keep every joint inside its limits at the end of the step.
    Eigen::VectorXd lo(n), hi(n);
    for (int k = 0; k < n; ++k) {
      const int i = index[static_cast<std::size_t>(k)];
      if (i < 3) {
        lo[k] = -std::numeric_limits<double>::infinity();
        hi[k] = std::numeric_limits<double>::infinity();
      } else {
        const auto j = static_cast<std::size_t>(i - 3);
        lo[k] = std::min(0.0, (joints[j].lower - b.joint_angles[j]) / kDt);
        hi[k] = std::max(0.0, (joints[j].upper - b.joint_angles[j]) / kDt);
      }
    }

    // Backward Euler on the contact springs: the new velocity minimizes
    //   1/2 u'A0 u - rhs0'u + sum dt/2 |v_rel|_D^2 + sum E(end depth)
    // inside the joint-limit box. Convex, solved by projected Newton.
    auto end_depth = [&](std::size_t k, const Eigen::VectorXd& v) {
      const auto& c = contacts[k];
      return c.depth - kDt * (rows[k].nJ.dot(v) - c.normal.dot(c.obstacle_velocity));
    };
    auto objective = [&](const Eigen::VectorXd& v) {
      double e = 0.5 * v.dot(A0 * v) - rhs0.dot(v);
      for (std::size_t k = 0; k < contacts.size(); ++k) {
        const Row& r = rows[k];
        if (r.damped) {
          const Vec3 rel = r.J * v - contacts[k].obstacle_velocity;
          e += 0.5 * kDt * rel.dot(r.D * rel);
        }
        e += contacts[k].law.energy(end_depth(k, v));
      }
      return e;
    };

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) u[k] = std::clamp(rhs0[k] / A0(k, k), lo[k], hi[k]);
    double value = objective(u);
    for (int iter = 0; iter < kNewtonIterations; ++iter) {
      Eigen::MatrixXd H = A0;
      Eigen::VectorXd g = A0 * u - rhs0;
      for (std::size_t k = 0; k < contacts.size(); ++k) {
        const auto& c = contacts[k];
        const Row& r = rows[k];
        if (r.damped) {
          H.noalias() += kDt * (r.J.transpose() * r.D * r.J);
          g.noalias() += kDt * (r.J.transpose() * (r.D * (r.J * u - c.obstacle_velocity)));
        }
        const double d = end_depth(k, u);
        if (d > 0.0) {
          H.noalias() += (kDt * kDt * c.law.slope(d)) * (r.nJ.transpose() * r.nJ);
          g.noalias() -= (kDt * c.law.force(d)) * r.nJ.transpose();
        }
      }
      // Newton step restricted to the box, then backtracking on the objective.
      const Eigen::VectorXd target = solve_box_qp(H, H * u - g, lo, hi);
      const Eigen::VectorXd step = target - u;
      const double slope0 = g.dot(step);
      if (!(slope0 < 0.0) || step.lpNorm<Eigen::Infinity>() < kNewtonTolerance) break;
      double alpha = 1.0;
      Eigen::VectorXd trial = target;
      double trial_value = objective(trial);
      while (trial_value > value + 1e-4 * alpha * slope0 && alpha > 1e-6) {
        alpha *= 0.5;
        trial = u + alpha * step;
        trial_value = objective(trial);
      }
      if (trial_value > value) break;
      u = trial;
      value = trial_value;
    }
    for (int k = 0; k < n; ++k) next[static_cast<std::size_t>(index[static_cast<std::size_t>(k)])] = u[k];
  }

  for (int i = 0; i < 3; ++i) b.root_velocity[i] = next[static_cast<std::size_t>(i)];
  b.root_pose.position += kDt * b.root_velocity;
  for (std::size_t j = 0; j < kNumMuscles; ++j) {
    double qd = next[3 + j];
    double q = b.joint_angles[j] + kDt * qd;
    const auto& js = joints[j];
    if (q >= js.upper) {
      q = js.upper;
      qd = std::min(qd, 0.0);
    } else if (q <= js.lower) {
      q = js.lower;
      qd = std::max(qd, 0.0);
    }
    b.joint_angles[j] = q;
    b.joint_velocities[j] = qd;
  }
  b.link_poses = forward_kinematics(model, b.root_pose, b.joint_angles).link_poses;

  const auto& eyes = model.eyes();
  for (std::size_t k = 0; k < kNumEyeDof; ++k)
    b.eye_angles[k] = std::clamp(b.eye_angles[k] + kDt * motor.eye_velocity[k], eyes.lower[k], eyes.upper[k]);
  b.vocalization = std::clamp(motor.vocalization, 0.0, 1.0);
}

Mat3 body_inertia(const SceneObject& o) {
  const double m = o.mass;
  const Shape& s = o.shape;
  switch (s.kind) {
    case ShapeKind::Sphere:
      return Mat3::Identity() * (0.4 * m * s.radius * s.radius);
    case ShapeKind::Capsule: {
      const double len = 2.0 * s.half_length + s.radius;
      const double ixx = m * (3.0 * s.radius * s.radius + len * len) / 12.0;
      return Vec3(ixx, ixx, 0.5 * m * s.radius * s.radius).asDiagonal();
    }
    case ShapeKind::Box: {
      const Vec3 h = s.half_extents;
      return Vec3(m * (h.y() * h.y() + h.z() * h.z()) / 3.0, m * (h.x() * h.x() + h.z() * h.z()) / 3.0,
                  m * (h.x() * h.x() + h.y() * h.y()) / 3.0)
          .asDiagonal();
    }
  }
  return Mat3::Identity();
}

struct Proxy {
  Vec3 center;
  double radius;
};

std::vector<Proxy> proxies(const SceneObject& o) {
  const Shape& s = o.shape;
  std::vector<Proxy> out;
  switch (s.kind) {
    case ShapeKind::Sphere:
      out.push_back({o.pose.position, s.radius});
      break;
    case ShapeKind::Capsule:
      for (double z : {-s.half_length, 0.0, s.half_length}) out.push_back({o.pose.apply(Vec3(0, 0, z)), s.radius});
      break;
    case ShapeKind::Box:
      for (int i = 0; i < 8; ++i) {
        const Vec3 corner((i & 1) ? s.half_extents.x() : -s.half_extents.x(),
                          (i & 2) ? s.half_extents.y() : -s.half_extents.y(),
                          (i & 4) ? s.half_extents.z() : -s.half_extents.z());
        out.push_back({o.pose.apply(corner), 0.0});
      }
      out.push_back({o.pose.position, s.half_extents.minCoeff()});
      break;
  }
  return out;
}

void step_objects(WorldState& s) {
  const PhysicsParams& phys = s.physics;
  const std::vector<SceneObject> snapshot = s.objects;
  const BodyModel& model = *s.model;
  const Kinematics kin = forward_kinematics(model, s.body.root_pose, s.body.joint_angles);
  const auto& links = model.links();

  auto body_point_velocity = [&](int link, const Vec3& p) {
    Vec3 v = s.body.root_velocity;
    for (int j : model.chain(link)) {
      const auto ju = static_cast<std::size_t>(j);
      v += kin.joint_axis[ju].cross(p - kin.joint_origin[ju]) * s.body.joint_velocities[ju];
    }
    return v;
  };

  for (std::size_t oi = 0; oi < s.objects.size(); ++oi) {
    SceneObject& o = s.objects[oi];
    if (!o.is_dynamic()) continue;
    const SceneObject& cur = snapshot[oi];

    std::vector<Contact> contacts;
    for (const Proxy& px : proxies(cur)) {
      for (std::size_t k = 0; k < snapshot.size(); ++k) {
        if (k == oi) continue;
        const auto& other = snapshot[k];
        if (!other.shape.hollow &&
            (px.center - other.pose.position).norm() > px.radius + other.shape.bounding_radius())
          continue;
        const Distance d = signed_distance(other.shape, other.pose, px.center);
        const double depth = px.radius - d.value;
        if (depth <= 0.0) continue;
        const Vec3 p = px.center - px.radius * d.normal;
        contacts.push_back({-1, p, d.normal, depth, object_point_velocity(other, p),
                            contact_law(phys, cur.material, other.material)});
      }
      for (std::size_t l = 0; l < links.size(); ++l) {
        const Pose shape_pose = kin.link_poses[l] * links[l].shape_pose;
        if ((px.center - shape_pose.position).norm() > px.radius + links[l].shape.bounding_radius()) continue;
        const Distance d = signed_distance(links[l].shape, shape_pose, px.center);
        const double depth = px.radius - d.value;
        if (depth <= 0.0) continue;
        const Vec3 p = px.center - px.radius * d.normal;
        contacts.push_back({-1, p, d.normal, depth, body_point_velocity(static_cast<int>(l), p),
                            contact_law(phys, cur.material, phys.body_material)});
      }
    }

    using Mat6 = Eigen::Matrix<double, 6, 6>;
    using Vec6 = Eigen::Matrix<double, 6, 1>;
    const Mat3 R = cur.pose.orientation.toRotationMatrix();
    const Mat3 I_world = R * body_inertia(cur) * R.transpose();
    Mat6 A = Mat6::Zero();
    A.block<3, 3>(0, 0) = Mat3::Identity() * cur.mass;
    A.block<3, 3>(3, 3) = I_world * (1.0 + kDt * kObjectAngularDamping);
    Vec6 u;
    u << cur.linear_velocity, cur.angular_velocity;
    Vec6 rhs;
    rhs.head<3>() = cur.mass * cur.linear_velocity + kDt * cur.mass * phys.gravity;
    rhs.tail<3>() = I_world * cur.angular_velocity;
    Eigen::Matrix<double, 3, 6> J;
    for (const auto& c : contacts) {
      const Vec3 r = c.point - cur.pose.position;
      J.block<3, 3>(0, 0).setIdentity();
      J.block<3, 3>(0, 3) = -skew(r);
      const Vec3 v_rel = J * u - c.obstacle_velocity;
      const double ct = tangential_damping(c, v_rel);
      const Mat3 nn = c.normal * c.normal.transpose();
      const Mat3 D = c.law.damping * nn + ct * (Mat3::Identity() - nn);
      A.noalias() += J.transpose() * (kDt * D + kDt * kDt * c.law.slope(c.depth) * nn) * J;
      rhs.noalias() += kDt * (J.transpose() * (c.law.force(c.depth) * c.normal + D * c.obstacle_velocity));
    }
    if (contacts.empty()) {
      // Keep the free-flight path exact: v += g dt.
      o.linear_velocity = cur.linear_velocity + kDt * phys.gravity;
      o.angular_velocity = A.block<3, 3>(3, 3).ldlt().solve(rhs.tail<3>());
    } else {
      const Vec6 next = A.ldlt().solve(rhs);
      o.linear_velocity = next.head<3>();
      o.angular_velocity = next.tail<3>();
    }
    o.pose.position = cur.pose.position + kDt * o.linear_velocity;
    const Vec3 w = o.angular_velocity;
    Quat dq(0.0, w.x(), w.y(), w.z());
    Quat q = cur.pose.orientation;
    q.coeffs() += 0.5 * kDt * (dq * q).coeffs();
    q.normalize();
    o.pose.orientation = q;
  }
}

}  // namespace

Vec3 Oscillation::position_at(std::uint64_t tick) const {
  const double t = tick >= start_tick ? ticks_to_seconds(tick - start_tick) : 0.0;
  return origin + axis * (amplitude * std::sin(2.0 * 3.14159265358979323846 * frequency * t));
}

bool SceneObject::has_tag(std::string_view tag) const {
  return std::binary_search(tags.begin(), tags.end(), tag);
}

const SceneObject* WorldState::find(std::uint32_t id) const {
  auto it = std::lower_bound(objects.begin(), objects.end(), id, [](const auto& o, std::uint32_t v) { return o.id < v; });
  return it != objects.end() && it->id == id ? &*it : nullptr;
}

SceneObject* WorldState::find(std::uint32_t id) {
  return const_cast<SceneObject*>(static_cast<const WorldState&>(*this).find(id));
}

WorldState step_world(WorldState s, const MotorCommand& motor, const CaregiverCommand& care) {
  for (std::size_t i = 0; i < kNumMuscles; ++i)
    if (!std::isfinite(motor.torque[i])) throw NonFiniteActionError(i);
  for (std::size_t k = 0; k < kNumEyeDof; ++k)
    if (!std::isfinite(motor.eye_velocity[k])) throw NonFiniteActionError(kNumMuscles + k);
  if (!std::isfinite(motor.vocalization)) throw NonFiniteActionError(kVocalChannel);

  const std::uint64_t next_tick = s.tick + 1;
  apply_caregiver(s, care);
  for (auto& o : s.objects)
    if (o.kinematic) advance_kinematic(o, next_tick);
  step_body(s, motor);
  step_objects(s);
  s.intero = update_interoception(s.intero, s.intero.pending_feed, kDt);

  s.body.head_velocity_prev = s.body.head_velocity;
  s.body.head_velocity = head_point_velocity(s);
  s.tick = next_tick;
  return s;
}

Vec3 head_point_velocity(const WorldState& s) {
  const BodyModel& model = *s.model;
  const Kinematics kin = forward_kinematics(model, s.body.root_pose, s.body.joint_angles);
  const int head = model.head_link();
  const auto& L = model.links()[static_cast<std::size_t>(head)];
  const Vec3 p = kin.link_poses[static_cast<std::size_t>(head)].apply(0.5 * (L.seg_a + L.seg_b));
  Vec3 v = s.body.root_velocity;
  for (int j : model.chain(head)) {
    const auto ju = static_cast<std::size_t>(j);
    v += kin.joint_axis[ju].cross(p - kin.joint_origin[ju]) * s.body.joint_velocities[ju];
  }
  return v;
}

double max_static_penetration(const WorldState& s) {
  const auto& links = s.model->links();
  double worst = 0.0;
  for (std::size_t l = 0; l < links.size(); ++l) {
    for (const Vec3& local : links[l].sphere_centers) {
      const Vec3 c = s.body.link_poses[l].apply(local);
      for (const auto& o : s.objects) {
        if (!o.is_static()) continue;
        worst = std::max(worst, links[l].radius - signed_distance(o.shape, o.pose, c).value);
      }
    }
  }
  return worst;
}

}  // namespace sedro
