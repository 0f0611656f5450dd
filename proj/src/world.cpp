#include <cmath>

#include "sedro/error.hpp"
#include "sedro/world.hpp"

namespace sedro {

std::optional<Hit> raycast(const WorldState& state, const Vec3& origin, const Vec3& direction,
                           const RaycastOptions& opts) {
  const double len = direction.norm();
  if (len == 0.0) throw Error("raycast: zero-length direction");
  if (std::abs(len - 1.0) > 1e-6) throw Error("raycast: direction not normalized");

  std::optional<Hit> best;
  for (const auto& o : state.objects) {  // ascending id: strict '<' keeps the lowest id on ties
    auto h = intersect_ray(o.shape, o.pose, origin, direction);
    if (h && (!best || h->distance < best->distance))
      best = Hit{HitKind::Object, o.id, h->distance, h->normal, o.color};
  }
  if (opts.include_body) {
    const auto& links = state.model->links();
    for (std::size_t l = 0; l < links.size(); ++l) {
      if (static_cast<int>(l) == opts.exclude_link) continue;
      const Pose pose = state.body.link_poses[l] * links[l].shape_pose;
      auto h = intersect_ray(links[l].shape, pose, origin, direction);
      if (h && (!best || h->distance < best->distance))
        best = Hit{HitKind::BodyLink, static_cast<std::uint32_t>(l), h->distance, h->normal, state.model->skin_color()};
    }
  }
  return best;
}

Gaze eye_gaze(const WorldState& state) {
  const auto& eyes = state.model->eyes();
  const Pose& head = state.body.link_poses[static_cast<std::size_t>(eyes.head_link)];
  const double yaw = state.body.eye_angles[0];
  const double pitch = state.body.eye_angles[1];
  const Vec3 dir(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
  const Vec3 up(-std::sin(pitch) * std::cos(yaw), -std::sin(pitch) * std::sin(yaw), std::cos(pitch));
  Gaze g;
  g.origin = head.apply(eyes.offset);
  g.direction = head.rotate(dir).normalized();
  g.up = head.rotate(up).normalized();
  g.right = g.direction.cross(g.up);
  return g;
}

// Canonical serialization --------------------------------------------------

namespace {

void write_vec(ByteWriter& w, const Vec3& v) {
  for (int i = 0; i < 3; ++i) w.f64(v[i]);
}
Vec3 read_vec(ByteReader& r) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = r.f64();
  return v;
}
void write_quat(ByteWriter& w, const Quat& q) {
  w.f64(q.w());
  w.f64(q.x());
  w.f64(q.y());
  w.f64(q.z());
}
Quat read_quat(ByteReader& r) {
  const double w = r.f64();
  const double x = r.f64();
  const double y = r.f64();
  const double z = r.f64();
  return Quat(w, x, y, z);
}

void write_object(ByteWriter& w, const SceneObject& o) {
  w.u32(o.id);
  w.u8(static_cast<std::uint8_t>(o.shape.kind));
  w.f64(o.shape.radius);
  w.f64(o.shape.half_length);
  write_vec(w, o.shape.half_extents);
  w.u8(o.shape.hollow ? 1 : 0);
  write_vec(w, o.pose.position);
  write_quat(w, o.pose.orientation);
  write_vec(w, o.linear_velocity);
  write_vec(w, o.angular_velocity);
  w.f64(o.mass);
  w.u8(o.kinematic ? 1 : 0);
  w.f64(o.material.friction);
  w.f64(o.material.restitution);
  for (auto c : o.color) w.u8(c);
  w.u32(static_cast<std::uint32_t>(o.tags.size()));
  for (const auto& t : o.tags) w.str(t);
  w.u8(static_cast<std::uint8_t>(o.motion.index()));
  if (const auto* osc = std::get_if<Oscillation>(&o.motion)) {
    write_vec(w, osc->origin);
    write_vec(w, osc->axis);
    w.f64(osc->amplitude);
    w.f64(osc->frequency);
    w.u64(osc->start_tick);
  } else if (const auto* mv = std::get_if<MoveTo>(&o.motion)) {
    write_vec(w, mv->target);
    w.f64(mv->speed);
  }
}

SceneObject read_object(ByteReader& r) {
  SceneObject o;
  o.id = r.u32();
  const auto kind = r.u8();
  if (kind > 2) throw IoError("bad shape kind");
  o.shape.kind = static_cast<ShapeKind>(kind);
  o.shape.radius = r.f64();
  o.shape.half_length = r.f64();
  o.shape.half_extents = read_vec(r);
  o.shape.hollow = r.u8() != 0;
  o.pose.position = read_vec(r);
  o.pose.orientation = read_quat(r);
  o.linear_velocity = read_vec(r);
  o.angular_velocity = read_vec(r);
  o.mass = r.f64();
  o.kinematic = r.u8() != 0;
  o.material.friction = r.f64();
  o.material.restitution = r.f64();
  for (auto& c : o.color) c = r.u8();
  const auto ntags = r.u32();
  for (std::uint32_t i = 0; i < ntags; ++i) o.tags.push_back(r.str());
  switch (r.u8()) {
    case 0:
      break;
    case 1: {
      Oscillation osc;
      osc.origin = read_vec(r);
      osc.axis = read_vec(r);
      osc.amplitude = r.f64();
      osc.frequency = r.f64();
      osc.start_tick = r.u64();
      o.motion = osc;
      break;
    }
    case 2: {
      MoveTo mv;
      mv.target = read_vec(r);
      mv.speed = r.f64();
      o.motion = mv;
      break;
    }
    default:
      throw IoError("bad motion kind");
  }
  return o;
}

}  // namespace

Bytes serialize_state(const WorldState& s) {
  ByteWriter w;
  w.raw(std::string_view("SDWS"));
  w.u32(kStateSchemaVersion);
  w.u64(s.tick);
  w.str(s.scene_id);
  w.u64(s.rng.seed);
  write_vec(w, s.physics.gravity);
  w.f64(s.physics.buoyancy);
  w.f64(s.physics.joint_damping);
  w.f64(s.physics.contact_stiffness);
  w.f64(s.physics.contact_hardening_depth);
  w.f64(s.physics.contact_damping);
  w.f64(s.physics.body_material.friction);
  w.f64(s.physics.body_material.restitution);
  w.f64(s.light);
  w.f64(s.start_age_days);

  w.u32(static_cast<std::uint32_t>(s.objects.size()));
  for (const auto& o : s.objects) write_object(w, o);

  const auto& b = s.body;
  for (double q : b.joint_angles) w.f64(q);
  for (double qd : b.joint_velocities) w.f64(qd);
  for (double e : b.eye_angles) w.f64(e);
  write_vec(w, b.root_pose.position);
  write_quat(w, b.root_pose.orientation);
  write_vec(w, b.root_velocity);
  w.f64(b.vocalization);
  write_vec(w, b.head_velocity);
  write_vec(w, b.head_velocity_prev);

  w.f64(s.intero.energy);
  w.f64(s.intero.decay_rate);
  w.f64(s.intero.pending_feed);

  const auto& c = s.caregiver;
  w.u8(c.script ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(c.behavior));
  w.f64(c.behavior_timer);
  write_vec(w, c.pose);
  write_vec(w, c.home);
  write_vec(w, c.bottle_home);
  write_vec(w, c.toy_home);
  w.u32(c.active_toy);
  w.u32(c.utterance_cursor);
  w.f64(c.vocal_sustain);
  w.u32(static_cast<std::uint32_t>(c.next_due.size()));
  for (double d : c.next_due) w.f64(d);
  return w.take();
}

WorldState deserialize_state(std::span<const std::uint8_t> bytes, std::shared_ptr<const BodyModel> model,
                             std::shared_ptr<const CaregiverScript> script) {
  ByteReader r(bytes);
  auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "SDWS") throw IoError("not a serialized world state");
  if (r.u32() != kStateSchemaVersion) throw IoError("unsupported state schema version");
  WorldState s;
  s.model = std::move(model);
  s.tick = r.u64();
  s.scene_id = r.str();
  s.rng.seed = r.u64();
  s.physics.gravity = read_vec(r);
  s.physics.buoyancy = r.f64();
  s.physics.joint_damping = r.f64();
  s.physics.contact_stiffness = r.f64();
  s.physics.contact_hardening_depth = r.f64();
  s.physics.contact_damping = r.f64();
  s.physics.body_material.friction = r.f64();
  s.physics.body_material.restitution = r.f64();
  s.light = r.f64();
  s.start_age_days = r.f64();

  const auto nobj = r.u32();
  for (std::uint32_t i = 0; i < nobj; ++i) s.objects.push_back(read_object(r));

  auto& b = s.body;
  for (double& q : b.joint_angles) q = r.f64();
  for (double& qd : b.joint_velocities) qd = r.f64();
  for (double& e : b.eye_angles) e = r.f64();
  b.root_pose.position = read_vec(r);
  b.root_pose.orientation = read_quat(r);
  b.root_velocity = read_vec(r);
  b.vocalization = r.f64();
  b.head_velocity = read_vec(r);
  b.head_velocity_prev = read_vec(r);

  s.intero.energy = r.f64();
  s.intero.decay_rate = r.f64();
  s.intero.pending_feed = r.f64();

  auto& c = s.caregiver;
  const bool has_script = r.u8() != 0;
  if (has_script && !script) throw IoError("state references a caregiver script but none was supplied");
  if (has_script) c.script = std::move(script);
  const auto behavior = r.u8();
  if (behavior > 5) throw IoError("bad caregiver behavior");
  c.behavior = static_cast<Behavior>(behavior);
  c.behavior_timer = r.f64();
  c.pose = read_vec(r);
  c.home = read_vec(r);
  c.bottle_home = read_vec(r);
  c.toy_home = read_vec(r);
  c.active_toy = r.u32();
  c.utterance_cursor = r.u32();
  c.vocal_sustain = r.f64();
  const auto ndue = r.u32();
  for (std::uint32_t i = 0; i < ndue; ++i) c.next_due.push_back(r.f64());
  if (!r.done()) throw IoError("trailing bytes after world state");

  b.link_poses = forward_kinematics(*s.model, b.root_pose, b.joint_angles).link_poses;
  return s;
}

std::uint64_t state_hash(const WorldState& state) {
  const Bytes bytes = serialize_state(state);
  return fnv1a64(bytes);
}

}  // namespace sedro
