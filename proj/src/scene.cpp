#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "sedro/error.hpp"
#include "sedro/world.hpp"

namespace sedro {

using nlohmann::json;

namespace {

bool is_uint(const json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(field, "non-finite value");
  return v;
}

Vec3 vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(field, "expected [x, y, z]");
  return Vec3(number(j[0], field + "[0]"), number(j[1], field + "[1]"), number(j[2], field + "[2]"));
}

Quat quat(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 4) throw ValidationError(field, "expected [w, x, y, z]");
  Quat q(number(j[0], field + "[0]"), number(j[1], field + "[1]"), number(j[2], field + "[2]"),
         number(j[3], field + "[3]"));
  if (q.norm() < 1e-9) throw ValidationError(field, "zero quaternion");
  q.normalize();
  return q;
}

double positive(const json& j, const std::string& field) {
  const double v = number(j, field);
  if (!(v > 0.0)) throw ValidationError(field, "must be positive");
  return v;
}

Shape parse_shape(const json& j, const std::string& f) {
  if (!j.is_object() || !j.contains("type")) throw ValidationError(f + ".type", "missing shape type");
  const std::string type = j["type"].get<std::string>();
  if (type == "sphere") return Shape::sphere(positive(j.at("radius"), f + ".radius"), j.value("hollow", false));
  if (type == "capsule")
    return Shape::capsule(positive(j.at("radius"), f + ".radius"),
                          positive(j.at("half_length"), f + ".half_length"));
  if (type == "box") {
    const Vec3 h = vec3(j.at("half_extents"), f + ".half_extents");
    if (h.minCoeff() <= 0.0) throw ValidationError(f + ".half_extents", "must be positive");
    return Shape::box(h);
  }
  throw ValidationError(f + ".type", "unknown shape '" + type + "'");
}

SceneObject parse_object(const json& j, const std::string& f) {
  SceneObject o;
  if (!j.contains("id") || !is_uint(j["id"])) throw ValidationError(f + ".id", "expected unsigned id");
  o.id = j["id"].get<std::uint32_t>();
  o.shape = parse_shape(j.value("shape", json()), f + ".shape");
  o.pose.position = vec3(j.at("position"), f + ".position");
  if (j.contains("orientation")) o.pose.orientation = quat(j["orientation"], f + ".orientation");
  if (j.contains("velocity")) o.linear_velocity = vec3(j["velocity"], f + ".velocity");
  if (j.contains("angular_velocity")) o.angular_velocity = vec3(j["angular_velocity"], f + ".angular_velocity");
  o.mass = j.contains("mass") ? number(j["mass"], f + ".mass") : 0.0;
  if (o.mass < 0.0) throw ValidationError(f + ".mass", "must be >= 0");
  o.kinematic = j.value("kinematic", false);
  if (o.kinematic && o.mass <= 0.0) throw ValidationError(f + ".mass", "kinematic objects need mass > 0");
  if (o.shape.hollow && !o.is_static()) throw ValidationError(f + ".shape.hollow", "hollow shapes must be static");
  if (o.is_static() && (o.linear_velocity.norm() > 0.0 || o.angular_velocity.norm() > 0.0))
    throw ValidationError(f + ".velocity", "static objects cannot move");
  if (j.contains("material")) {
    const auto& m = j["material"];
    o.material.friction = m.contains("friction") ? number(m["friction"], f + ".material.friction") : 0.6;
    o.material.restitution = m.contains("restitution") ? number(m["restitution"], f + ".material.restitution") : 0.0;
    if (o.material.friction < 0.0) throw ValidationError(f + ".material.friction", "must be >= 0");
    if (o.material.restitution < 0.0 || o.material.restitution > 1.0)
      throw ValidationError(f + ".material.restitution", "must be in [0, 1]");
  }
  if (j.contains("color")) {
    const auto& c = j["color"];
    if (!c.is_array() || c.size() != 3) throw ValidationError(f + ".color", "expected [r, g, b]");
    for (std::size_t k = 0; k < 3; ++k) o.color[k] = c[k].get<std::uint8_t>();
  }
  std::set<std::string> tags;
  for (const auto& t : j.value("tags", json::array())) tags.insert(t.get<std::string>());
  o.tags.assign(tags.begin(), tags.end());
  return o;
}

}  // namespace

SceneSpec SceneSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
  SceneSpec spec = from_json(doc, path.parent_path());
  spec.source = path;
  return spec;
}

SceneSpec SceneSpec::from_json(const json& doc, const std::filesystem::path& base_dir) {
  SceneSpec s;
  try {
    if (!doc.is_object()) throw ValidationError("", "scene must be a JSON object");
    if (!doc.contains("seed") || !is_uint(doc["seed"])) throw ValidationError("seed", "expected unsigned integer");
    s.seed = doc["seed"].get<std::uint64_t>();
    if (!doc.contains("scene_id") || !doc["scene_id"].is_string()) throw ValidationError("scene_id", "expected string");
    s.scene_id = doc["scene_id"].get<std::string>();
    if (doc.contains("gravity")) s.physics.gravity = vec3(doc["gravity"], "gravity");
    if (doc.contains("buoyancy")) s.physics.buoyancy = number(doc["buoyancy"], "buoyancy");
    if (doc.contains("light")) s.light = number(doc["light"], "light");
    if (doc.contains("age_days")) s.age_days = number(doc["age_days"], "age_days");
    if (doc.contains("physics")) {
      const auto& p = doc["physics"];
      if (p.contains("joint_damping")) s.physics.joint_damping = number(p["joint_damping"], "physics.joint_damping");
      if (p.contains("contact_stiffness")) s.physics.contact_stiffness = positive(p["contact_stiffness"], "physics.contact_stiffness");
      if (p.contains("contact_hardening_depth")) {
        s.physics.contact_hardening_depth = number(p["contact_hardening_depth"], "physics.contact_hardening_depth");
        if (s.physics.contact_hardening_depth < 0.0) throw ValidationError("physics.contact_hardening_depth", "must be >= 0");
      }
      if (p.contains("contact_damping")) s.physics.contact_damping = number(p["contact_damping"], "physics.contact_damping");
      if (p.contains("body_friction")) s.physics.body_material.friction = number(p["body_friction"], "physics.body_friction");
    }
    if (doc.contains("interoception")) {
      const auto& in = doc["interoception"];
      if (in.contains("energy")) s.intero.energy = number(in["energy"], "interoception.energy");
      if (s.intero.energy < 0.0 || s.intero.energy > 1.0) throw ValidationError("interoception.energy", "must be in [0, 1]");
      if (in.contains("full_tank_s")) {
        s.intero.decay_rate = in["full_tank_s"].is_null() ? 0.0 : 1.0 / positive(in["full_tank_s"], "interoception.full_tank_s");
      }
    }

    if (!doc.contains("body_spec_ref") || !doc["body_spec_ref"].is_string())
      throw ValidationError("body_spec_ref", "expected path string");
    const auto body_path = base_dir / doc["body_spec_ref"].get<std::string>();
    if (!std::filesystem::exists(body_path))
      throw ValidationError("body_spec_ref", "file not found: " + body_path.string());
    s.body = std::make_shared<const BodyModel>(BodyModel::load(body_path));

    if (doc.contains("caregiver_script_ref") && !doc["caregiver_script_ref"].is_null()) {
      const auto path = base_dir / doc["caregiver_script_ref"].get<std::string>();
      if (!std::filesystem::exists(path))
        throw ValidationError("caregiver_script_ref", "file not found: " + path.string());
      s.caregiver = std::make_shared<const CaregiverScript>(CaregiverScript::load(path));
    }

    std::set<std::uint32_t> ids;
    const auto& objects = doc.value("objects", json::array());
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const std::string f = "objects[" + std::to_string(i) + "]";
      SceneObject o = parse_object(objects[i], f);
      if (!ids.insert(o.id).second) throw ValidationError(f + ".id", "duplicate object id " + std::to_string(o.id));
      s.objects.push_back(std::move(o));
    }
    std::sort(s.objects.begin(), s.objects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    const auto& agent = doc.value("agent", json::object());
    if (agent.contains("root_position")) s.agent.root.position = vec3(agent["root_position"], "agent.root_position");
    if (agent.contains("root_orientation")) s.agent.root.orientation = quat(agent["root_orientation"], "agent.root_orientation");
    const json joint_angles = agent.value("joint_angles", json::object());
    for (const auto& [name, value] : joint_angles.items()) {
      const std::string f = "agent.joint_angles." + name;
      const int j = s.body->joint_index(name);
      if (j < 0) throw ValidationError(f, "unknown joint");
      const double v = number(value, f);
      const auto& js = s.body->joints()[static_cast<std::size_t>(j)];
      if (v < js.lower || v > js.upper) throw ValidationError(f, "outside joint limits");
      s.agent.joint_angles[static_cast<std::size_t>(j)] = v;
    }
    if (agent.contains("eye_angles")) {
      const Vec3 e = vec3(agent["eye_angles"], "agent.eye_angles");
      for (std::size_t k = 0; k < 3; ++k) s.agent.eye_angles[k] = e[static_cast<int>(k)];
    }

    if (s.caregiver) {
      auto check = [&](std::uint32_t id, const std::string& what) {
        auto it = std::find_if(s.objects.begin(), s.objects.end(), [&](const auto& o) { return o.id == id; });
        if (it == s.objects.end() || !it->kinematic)
          throw ValidationError("caregiver_script_ref." + what,
                                "object " + std::to_string(id) + " must exist and be kinematic");
      };
      check(s.caregiver->body_object, "body_object");
      check(s.caregiver->bottle_object, "bottle_object");
      for (const auto& r : s.caregiver->routines)
        if (r.behavior == Behavior::ShowToy) check(r.object, "routines." + r.id + ".object");
    }
  } catch (const json::exception& e) {
    throw ValidationError("scene", e.what());
  }
  return s;
}

namespace {

CaregiverState initial_caregiver(const std::vector<SceneObject>& objects,
                                 std::shared_ptr<const CaregiverScript> script) {
  CaregiverState c;
  c.script = std::move(script);
  if (!c.script) return c;
  auto pos = [&](std::uint32_t id) {
    for (const auto& o : objects)
      if (o.id == id) return o.pose.position;
    return Vec3(Vec3::Zero());
  };
  c.pose = pos(c.script->body_object);
  c.home = c.pose;
  c.bottle_home = pos(c.script->bottle_object);
  for (const auto& r : c.script->routines)
    c.next_due.push_back(r.trigger == Trigger::Periodic ? r.offset_s : std::numeric_limits<double>::quiet_NaN());
  return c;
}

}  // namespace

WorldState load_scene(const SceneSpec& spec) {
  if (!spec.body) throw ValidationError("body_spec_ref", "no body model");
  WorldState s;
  s.tick = 0;
  s.scene_id = spec.scene_id;
  s.rng.seed = spec.seed;
  s.physics = spec.physics;
  s.light = spec.light;
  s.start_age_days = spec.age_days;
  s.objects = spec.objects;
  s.model = spec.body;
  s.intero = spec.intero;
  s.body.root_pose = spec.agent.root;
  s.body.joint_angles = spec.agent.joint_angles;
  s.body.eye_angles = spec.agent.eye_angles;
  s.body.link_poses = forward_kinematics(*s.model, s.body.root_pose, s.body.joint_angles).link_poses;
  s.caregiver = initial_caregiver(s.objects, spec.caregiver);
  return s;
}

WorldState transition_scene(const WorldState& state, const SceneSpec& next) {
  WorldState s = load_scene(next);
  s.tick = state.tick;
  s.rng = state.rng;
  s.start_age_days = state.start_age_days;
  s.intero.energy = state.intero.energy;
  s.body.joint_angles = state.body.joint_angles;
  s.body.joint_velocities = state.body.joint_velocities;
  s.body.eye_angles = state.body.eye_angles;
  s.body.link_poses = forward_kinematics(*s.model, s.body.root_pose, s.body.joint_angles).link_poses;
  // Periodic routines count from the moment the scene is entered.
  for (double& due : s.caregiver.next_due) due += state.sim_time();
  return s;
}

}  // namespace sedro
