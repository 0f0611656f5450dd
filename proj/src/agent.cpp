#include "sedro/agent.hpp"

#include <algorithm>
#include <cmath>

#include "sedro/rng.hpp"
#include "sedro/session.hpp"

namespace sedro::agent {

using nlohmann::json;

Action RandomPolicy::act(const Observation& obs, const std::vector<proto::Event>&) {
  const CounterRng rng{seed_};
  Action a;
  for (std::size_t i = 0; i < kNumMuscles; ++i) a.muscle[i] = rng.uniform(-scale_, scale_, obs.tick, RngStream::Agent, i);
  for (std::size_t k = 0; k < kNumEyeDof; ++k)
    a.eye[k] = rng.uniform(-scale_, scale_, obs.tick, RngStream::Agent, kNumMuscles + k);
  return a;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 vec_from(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> sa = a, sb = b, both, either;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(either));
  return either.empty() ? 1.0 : static_cast<double>(both.size()) / static_cast<double>(either.size());
}

}  // namespace

double GazeOracle::planned_look(const std::string& stimulus, const std::vector<std::string>& features) const {
  if (p_.mode == GazeMode::Stare) return 0.0;
  if (p_.mode == GazeMode::LookFor) return p_.look_for;
  const auto it = exposure_.find(stimulus);
  const double seen = it == exposure_.end() ? 0.0 : it->second;
  if (p_.mode == GazeMode::Symmetric) return p_.base_look * std::exp(-seen / p_.satiation);

  // Similarity to the most often presented display; ties go to the first id.
  double sim = 1.0;
  const std::string* ref = nullptr;
  int most = 0;
  for (const auto& [id, n] : presentations_)
    if (n > most) most = n, ref = &id;
  if (ref) sim = jaccard(features, features_.at(*ref));

  double weight = sim, slowdown = 1.0;
  if (p_.mode == GazeMode::Novelty) {
    weight = 0.25 + 1.5 * (1.0 - sim);
    slowdown = 1.0 + (1.0 - sim);
  }
  return p_.base_look * weight * std::exp(-seen / (p_.satiation * slowdown));
}

void GazeOracle::on_stimulus(const json& body, std::uint64_t tick) {
  const std::string id = body.at("stimulus").get<std::string>();
  const auto features = body.at("features").get<std::vector<std::string>>();
  const double look = planned_look(id, features);
  const auto n = static_cast<std::uint64_t>(std::llround(std::max(look, 0.0) * kTicksPerSecond));
  exposure_[id] += ticks_to_seconds(n);
  ++presentations_[id];
  features_[id] = features;

  Target t;
  t.fixation = vec_from(body.at("fixation"));
  t.lookaway = vec_from(body.at("lookaway"));
  const json& m = body.at("motion");
  t.axis = vec_from(m.at("axis"));
  t.amplitude = m.at("amplitude").get<double>();
  t.frequency = m.at("frequency").get<double>();
  t.start_tick = m.at("start_tick").get<std::uint64_t>();
  t.max_speed = body.at("eye_max_speed").get<double>();
  t.look_until = tick + n;
  t.resting = false;
  target_ = t;
}

Action GazeOracle::act(const Observation& obs, const std::vector<proto::Event>& events) {
  for (const auto& e : events) {
    if (e.kind == proto::EventKind::Stimulus) on_stimulus(e.body, obs.tick);
    else if (e.kind == proto::EventKind::TrialEnd && target_) target_->resting = true;
  }
  Action a;
  if (!target_ || p_.mode == GazeMode::Stare) return a;

  // Aim where the point will be after this tick's eye motion.
  const Target& t = *target_;
  const std::uint64_t next = obs.tick + 1;
  const double phase = next >= t.start_tick ? ticks_to_seconds(next - t.start_tick) : 0.0;
  // Between trials rest above the display centre, ready for the next one.
  const Vec3 shift = t.resting ? Vec3(Vec3::Zero()) : Vec3(t.axis * (t.amplitude * std::sin(2.0 * kPi * t.frequency * phase)));
  const Vec3 p = (obs.tick < t.look_until && !t.resting ? t.fixation : t.lookaway) + shift;
  const double yaw = std::atan2(p.y(), p.x());
  const double pitch = std::atan2(p.z(), std::hypot(p.x(), p.y()));
  const double desired[3] = {yaw, pitch, 0.0};
  for (std::size_t k = 0; k < kNumEyeDof; ++k) {
    const double err = desired[k] - static_cast<double>(obs.eye_pose[k]);
    a.eye[k] = std::clamp(err / (kDt * t.max_speed), -1.0, 1.0);
  }
  return a;
}

std::unique_ptr<Policy> make_policy(const std::string& name, std::uint64_t seed) {
  if (name == "zero") return std::make_unique<ZeroPolicy>();
  if (name == "random") return std::make_unique<RandomPolicy>(seed);
  OracleParams p;
  if (name == "familiarity") p.mode = GazeMode::Familiarity;
  else if (name == "novelty") p.mode = GazeMode::Novelty;
  else if (name == "symmetric") p.mode = GazeMode::Symmetric;
  else if (name == "stare") p.mode = GazeMode::Stare;
  else if (name.rfind("look:", 0) == 0) {
    p.mode = GazeMode::LookFor;
    try {
      std::size_t used = 0;
      p.look_for = std::stod(name.substr(5), &used);
      if (used != name.size() - 5 || !(p.look_for >= 0.0)) throw std::invalid_argument(name);
    } catch (const std::exception&) {
      throw ValidationError("policy", "bad look time in \"" + name + "\"");
    }
  } else {
    throw ValidationError("policy", "unknown policy \"" + name +
                                        "\" (zero, random, familiarity, novelty, symmetric, stare, look:<s>)");
  }
  return std::make_unique<GazeOracle>(p);
}

ClientResult run_client(net::Stream& stream, Policy& policy, const ClientOptions& opts) {
  ClientResult r;
  r.version = client_handshake(stream, opts.versions, opts.timeout_ms);
  std::vector<proto::Event> pending;
  try {
    while (true) {
      const proto::Frame f = net::read_frame(stream, opts.timeout_ms);
      switch (f.type) {
        case proto::FrameType::Event:
          pending.push_back(proto::decode_event(f.payload));
          break;
        case proto::FrameType::Obs: {
          if (opts.max_ticks && r.ticks >= *opts.max_ticks) {
            net::write_frame(stream, {proto::FrameType::Bye, f.tick, proto::encode_bye(proto::ByeStatus::Completed)});
            r.completed = true;
            r.message = "max ticks reached";
            return r;
          }
          const Observation obs = proto::decode_observation(f.payload, f.tick);
          const Action a = policy.act(obs, pending);
          pending.clear();
          net::write_frame(stream, {proto::FrameType::Act, f.tick, proto::encode_action(a)});
          ++r.ticks;
          break;
        }
        case proto::FrameType::Err:
          r.errors.push_back(proto::decode_error(f.payload).message);
          break;
        case proto::FrameType::Bye:
          r.completed = proto::decode_bye(f.payload) == proto::ByeStatus::Completed;
          r.message = r.completed ? "server completed the session" : "server aborted the session";
          return r;
        default:
          throw proto::ProtocolError(proto::ErrorCode::UnexpectedFrame,
                                     "unexpected frame type " + std::to_string(static_cast<int>(f.type)));
      }
    }
  } catch (const net::ClosedError& e) {
    r.message = std::string("server closed the connection: ") + e.what();
  }
  return r;
}

}  // namespace sedro::agent
