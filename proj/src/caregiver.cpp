#include "sedro/caregiver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sedro/error.hpp"

namespace sedro {

const char* to_string(Behavior b) {
  switch (b) {
    case Behavior::Idle: return "idle";
    case Behavior::Approach: return "approach";
    case Behavior::Feed: return "feed";
    case Behavior::Talk: return "talk";
    case Behavior::ShowToy: return "show_toy";
    case Behavior::Respond: return "respond";
  }
  return "?";
}

namespace {

Behavior parse_behavior(const std::string& s, const std::string& field) {
  for (auto b : {Behavior::Idle, Behavior::Approach, Behavior::Feed, Behavior::Talk, Behavior::ShowToy,
                 Behavior::Respond})
    if (s == to_string(b)) return b;
  throw ValidationError(field, "unknown behavior '" + s + "'");
}

Trigger parse_trigger(const std::string& s, const std::string& field) {
  if (s == "hunger") return Trigger::Hunger;
  if (s == "vocalization") return Trigger::Vocalization;
  if (s == "periodic") return Trigger::Periodic;
  throw ValidationError(field, "unknown trigger '" + s + "'");
}

double num(const nlohmann::json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ValidationError(key, "expected a number");
  return obj[key].get<double>();
}

}  // namespace

CaregiverScript CaregiverScript::from_json(const nlohmann::json& doc) {
  CaregiverScript s;
  try {
    s.body_object = doc.at("body_object").get<std::uint32_t>();
    s.bottle_object = doc.at("bottle_object").get<std::uint32_t>();
    s.speed = doc.value("speed", s.speed);
    s.reach = doc.value("reach", s.reach);
    if (doc.contains("bedside_offset")) {
      const auto v = doc["bedside_offset"].get<std::vector<double>>();
      if (v.size() != 3) throw ValidationError("bedside_offset", "expected 3 numbers");
      s.bedside_offset = Vec3(v[0], v[1], v[2]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("caregiver", e.what());
  }
  if (!(s.speed > 0.0)) throw ValidationError("speed", "must be positive");

  if (!doc.contains("routines") || !doc["routines"].is_array())
    throw ValidationError("routines", "expected a list");
  const auto& list = doc["routines"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "routines[" + std::to_string(i) + "]";
    const auto& j = list[i];
    Routine r;
    try {
      r.id = j.at("id").get<std::string>();
      r.behavior = parse_behavior(j.at("behavior").get<std::string>(), where + ".behavior");
      const auto& sched = j.at("schedule");
      r.trigger = parse_trigger(sched.at("trigger").get<std::string>(), where + ".schedule.trigger");
      r.offset_s = num(sched, "offset_s", 0.0);
      r.period_s = num(sched, "period_s", 0.0);
      r.jitter_s = num(sched, "jitter_s", 0.0);
      const nlohmann::json params = j.value("params", nlohmann::json::object());
      r.duration_s = num(params, "duration_s", 0.0);
      r.threshold = num(params, "threshold", 0.0);
      r.rate = num(params, "rate", 0.0);
      r.stop = num(params, "stop", 1.0);
      r.sustain_s = num(params, "sustain_s", 0.0);
      r.distance = num(params, "distance", 0.0);
      r.object = params.value("object", 0u);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where, e.what());
    }
    if (s.index_of(r.id) >= 0) throw ValidationError(where + ".id", "duplicate routine id " + r.id);
    if (r.trigger == Trigger::Periodic && !(r.period_s > r.jitter_s && r.jitter_s >= 0.0))
      throw ValidationError(where + ".schedule", "period must exceed jitter");
    if (r.behavior == Behavior::Feed && !(r.rate > 0.0 && r.stop > r.threshold))
      throw ValidationError(where + ".params", "feed needs rate > 0 and stop > threshold");
    s.routines.push_back(std::move(r));
  }

  if (!doc.contains("utterances") || !doc["utterances"].is_array() || doc["utterances"].empty())
    throw ValidationError("utterances", "script must contain at least one utterance");
  try {
    s.utterances = doc["utterances"].get<std::vector<std::vector<std::uint32_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("utterances", e.what());
  }
  for (std::size_t i = 0; i < s.utterances.size(); ++i)
    if (s.utterances[i].empty()) throw ValidationError("utterances[" + std::to_string(i) + "]", "empty utterance");
  return s;
}

CaregiverScript CaregiverScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("caregiver_script_ref", "file not found: " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("caregiver_script_ref", path.string() + ": " + e.what());
  }
}

const Routine* CaregiverScript::find(Behavior b) const {
  for (const auto& r : routines)
    if (r.behavior == b) return &r;
  return nullptr;
}

int CaregiverScript::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < routines.size(); ++i)
    if (routines[i].id == id) return static_cast<int>(i);
  return -1;
}

bool transition_allowed(Behavior from, Behavior to) {
  if (from == to) return true;
  using B = Behavior;
  switch (from) {
    case B::Idle: return to == B::Approach || to == B::Respond || to == B::Talk || to == B::ShowToy;
    case B::Approach: return to == B::Feed || to == B::Idle;
    case B::Feed: return to == B::Idle || to == B::Approach;
    case B::Talk:
    case B::ShowToy: return to == B::Idle || to == B::Approach || to == B::Respond;
    case B::Respond: return to == B::Idle || to == B::Approach;
  }
  return false;
}

std::pair<std::vector<std::uint32_t>, std::uint32_t> emit_utterance(const CaregiverScript& script,
                                                                    std::uint32_t cursor) {
  if (script.utterances.empty()) throw Error("caregiver script has no utterances");
  const auto n = static_cast<std::uint32_t>(script.utterances.size());
  const std::uint32_t at = cursor % n;
  return {script.utterances[at], (at + 1) % n};
}

std::pair<Vec3, Vec3> head_center_and_face(const WorldState& w) {
  const auto& model = *w.model;
  const auto head = static_cast<std::size_t>(model.head_link());
  const Pose& pose = w.body.link_poses[head];
  const Pose shape = pose * model.links()[head].shape_pose;
  return {shape.position, pose.rotate(Vec3::UnitX())};
}

namespace {

struct Ctx {
  const WorldState& world;
  const CaregiverScript& script;
  const StageParams& stage;
  Vec3 head;
  Vec3 face;
  double head_radius;
};

const Routine* active(const Ctx& c, Behavior b) {
  for (const auto& r : c.script.routines)
    if (r.behavior == b && std::binary_search(c.stage.caregiver_routines.begin(),
                                              c.stage.caregiver_routines.end(), r.id))
      return &r;
  return nullptr;
}

double object_radius(const SceneObject& o) {
  return o.shape.kind == ShapeKind::Sphere ? o.shape.radius : o.shape.bounding_radius();
}

Vec3 mouth_target(const Ctx& c) {
  const SceneObject* bottle = c.world.find(c.script.bottle_object);
  const double r = bottle ? object_radius(*bottle) : 0.0;
  return c.head + c.face * (c.head_radius + r + 0.002);
}

bool bottle_in_reach(const Ctx& c) {
  const SceneObject* bottle = c.world.find(c.script.bottle_object);
  if (!bottle) return false;
  const double gap = (bottle->pose.position - c.head).norm() - c.head_radius - object_radius(*bottle);
  return gap <= c.script.reach;
}

Vec3 seek(const Vec3& from, const Vec3& to, double speed, double dt) {
  const Vec3 d = to - from;
  const double dist = d.norm();
  if (dist < 1e-12) return Vec3::Zero();
  return d / dist * std::min(speed, dist / dt);
}

bool target_is(const SceneObject* o, const Vec3& where) {
  const auto* mv = o ? std::get_if<MoveTo>(&o->motion) : nullptr;
  if (!mv) return o && (o->pose.position - where).norm() < 1e-9;
  return (mv->target - where).norm() < 1e-9;
}

}  // namespace

std::pair<CaregiverState, CaregiverCommand> caregiver_policy(const WorldState& world, CaregiverState s,
                                                             const StageParams& stage, double dt) {
  CaregiverCommand cmd;
  if (!s.script) return {std::move(s), cmd};
  const CaregiverScript& script = *s.script;
  const auto [head, face] = head_center_and_face(world);
  const auto head_link = static_cast<std::size_t>(world.model->head_link());
  const Ctx c{world, script, stage, head, face, world.model->links()[head_link].radius};
  const double now = world.sim_time();
  const double energy = world.intero.energy;

  const Routine* feed = active(c, Behavior::Feed);
  const Routine* respond = active(c, Behavior::Respond);

  if (respond && world.body.vocalization > respond->threshold)
    s.vocal_sustain += dt;
  else
    s.vocal_sustain = 0.0;

  const bool hungry = feed && energy < feed->threshold;
  const bool wants_respond = respond && s.vocal_sustain >= respond->sustain_s - 1e-9;

  const Behavior from = s.behavior;
  Behavior to = from;
  const Routine* current = (from == Behavior::Approach) ? feed : active(c, from);
  const bool expired = current && s.behavior_timer >= current->duration_s - 1e-9;

  switch (from) {
    case Behavior::Idle:
      if (hungry) {
        to = Behavior::Approach;
      } else if (wants_respond) {
        to = Behavior::Respond;
      } else {
        for (std::size_t i = 0; i < script.routines.size(); ++i) {
          const Routine& r = script.routines[i];
          if (r.trigger != Trigger::Periodic || active(c, r.behavior) != &r) continue;
          if (!(now >= s.next_due[i])) continue;
          const double jitter =
              world.rng.uniform(-r.jitter_s, r.jitter_s, world.tick, RngStream::Caregiver, i);
          s.next_due[i] += r.period_s + jitter;
          if (to == Behavior::Idle) to = r.behavior;
        }
      }
      break;
    case Behavior::Approach:
      if (!feed || energy >= feed->stop) to = Behavior::Idle;
      else if (bottle_in_reach(c)) to = Behavior::Feed;
      break;
    case Behavior::Feed:
      if (!feed || energy >= feed->stop) to = Behavior::Idle;
      else if (!bottle_in_reach(c)) to = Behavior::Approach;
      break;
    case Behavior::Talk:
    case Behavior::ShowToy:
      if (hungry) to = Behavior::Approach;
      else if (wants_respond) to = Behavior::Respond;
      else if (!current || expired) to = Behavior::Idle;
      break;
    case Behavior::Respond:
      if (hungry) to = Behavior::Approach;
      else if (!current || expired) to = Behavior::Idle;
      break;
  }

  const bool entered = to != from;
  if (entered) {
    s.behavior = to;
    s.behavior_timer = 0.0;
    if (to == Behavior::Respond) s.vocal_sustain = 0.0;
  } else {
    s.behavior_timer += dt;
  }

  // Body placement.
  const bool at_bed = to != Behavior::Idle;
  const Vec3 goal = at_bed ? Vec3(head + script.bedside_offset) : s.home;
  const SceneObject* body = world.find(script.body_object);
  cmd.move = seek(body ? body->pose.position : s.pose, goal, script.speed, dt);

  const SceneObject* bottle = world.find(script.bottle_object);
  const SceneObject* toy = s.active_toy ? world.find(s.active_toy) : nullptr;

  // Behavior action.
  switch (to) {
    case Behavior::Approach:
      cmd.interact = MoveToy{script.bottle_object, mouth_target(c), script.speed};
      break;
    case Behavior::Feed:
      cmd.interact = Feed{feed->rate * dt};
      break;
    case Behavior::Talk:
    case Behavior::Respond:
      if (entered) {
        auto [tokens, next] = emit_utterance(script, s.utterance_cursor);
        s.utterance_cursor = next;
        cmd.interact = Utterance{std::move(tokens)};
      }
      break;
    case Behavior::ShowToy:
      if (const Routine* r = active(c, Behavior::ShowToy)) {
        if (entered) {
          s.active_toy = r->object;
          if (const SceneObject* t = world.find(r->object)) s.toy_home = t->pose.position;
        }
        cmd.interact = MoveToy{r->object, Vec3(head + face * r->distance), script.speed};
      }
      break;
    case Behavior::Idle:
      break;
  }

  // Return held objects once their behavior is over and the slot is free.
  if (!cmd.interact && to != Behavior::Feed && bottle && !target_is(bottle, s.bottle_home)) {
    cmd.interact = MoveToy{script.bottle_object, s.bottle_home, script.speed};
  }
  if (!cmd.interact && to != Behavior::ShowToy && toy && !target_is(toy, s.toy_home)) {
    cmd.interact = MoveToy{s.active_toy, s.toy_home, script.speed};
  }
  return {std::move(s), cmd};
}

}  // namespace sedro
