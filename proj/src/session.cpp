#include "sedro/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iterator>

#include "sedro/caregiver.hpp"

namespace sedro {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path data_dir() {
  if (const char* env = std::getenv("SEDRO_DATA_DIR"); env && *env) return env;
  return SEDRO_DEFAULT_DATA_DIR;
}

json SessionSetup::to_json() const {
  json j;
  j["scene"] = fs::absolute(scene).lexically_normal().string();
  j["schedule"] = fs::absolute(schedule).lexically_normal().string();
  j["script"] = script ? json(fs::absolute(*script).lexically_normal().string()) : json(nullptr);
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["time_scale"] = time_scale;
  j["max_ticks"] = max_ticks;
  j["retina"] = {{"fovea_px", retina.fovea_px},
                 {"fovea_fov_deg", retina.fovea_fov_deg},
                 {"periphery_px", retina.periphery_px},
                 {"periphery_fov_deg", retina.periphery_fov_deg}};
  return j;
}

SessionSetup SessionSetup::from_json(const json& doc) {
  try {
    SessionSetup s;
    s.scene = doc.at("scene").get<std::string>();
    s.schedule = doc.at("schedule").get<std::string>();
    if (doc.contains("script") && !doc["script"].is_null()) s.script = doc["script"].get<std::string>();
    if (doc.contains("seed") && !doc["seed"].is_null()) s.seed = doc["seed"].get<std::uint64_t>();
    s.time_scale = doc.value("time_scale", 1.0);
    s.max_ticks = doc.value("max_ticks", std::uint64_t{1000});
    if (doc.contains("retina")) {
      const json& r = doc["retina"];
      s.retina.fovea_px = r.value("fovea_px", s.retina.fovea_px);
      s.retina.fovea_fov_deg = r.value("fovea_fov_deg", s.retina.fovea_fov_deg);
      s.retina.periphery_px = r.value("periphery_px", s.retina.periphery_px);
      s.retina.periphery_fov_deg = r.value("periphery_fov_deg", s.retina.periphery_fov_deg);
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError("header", e.what());
  }
}

namespace {

void require_file(const fs::path& p, const char* field) {
  if (!fs::is_regular_file(p)) throw ValidationError(field, "file not found: " + p.string());
}

proto::Event dev_event(const DevEvent& e) {
  return {e.kind == "birth" ? proto::EventKind::Birth : proto::EventKind::StageChange, e.body};
}

}  // namespace

Simulation::Simulation(const SessionSetup& setup) : setup_(setup) {
  require_file(setup.scene, "scene");
  require_file(setup.schedule, "schedule");
  if (setup.script) require_file(*setup.script, "script");
  if (!(setup.time_scale > 0.0) || !std::isfinite(setup.time_scale))
    throw ValidationError("time_scale", "must be positive and finite");
  if (setup.retina.fovea_px != 32 || setup.retina.periphery_px != 16)
    throw ValidationError("retina", "resolutions are fixed at 32 and 16 for protocol version 1");

  std::shared_ptr<const CaregiverScript> script;
  if (setup.script) script = std::make_shared<const CaregiverScript>(CaregiverScript::load(*setup.script));
  auto prepare = [&](SceneSpec spec) {
    if (script && spec.caregiver) spec.caregiver = script;
    if (setup.seed) spec.seed = *setup.seed;
    return spec;
  };

  SceneSpec start = prepare(SceneSpec::load(setup.scene));
  schedule_ = std::make_shared<const Schedule>(Schedule::load(setup.schedule));
  if (start.age_days < kFirstAgeDays || start.age_days > kLastAgeDays)
    throw ValidationError("age_days", "scene age outside the schedule timeline");
  age0_ = age_ = start.age_days;
  tracker_ = std::make_unique<AgeTracker>(*schedule_, age0_);

  // Every scene a later stage can move to must exist up front.
  const fs::path scene_dir = setup.scene.parent_path();
  for (const auto& st : schedule_->stages()) {
    if (st.end_day <= age0_ || scenes_.count(st.scene_id)) continue;
    if (st.scene_id == start.scene_id) {
      scenes_.emplace(st.scene_id, start);
      continue;
    }
    const fs::path p = scene_dir / (st.scene_id + ".json");
    require_file(p, "stages.scene");
    SceneSpec spec = prepare(SceneSpec::load(p));
    if (spec.scene_id != st.scene_id)
      throw ValidationError("stages.scene", p.string() + " declares scene_id \"" + spec.scene_id + "\"");
    scenes_.emplace(st.scene_id, std::move(spec));
  }
  world_ = load_scene(start);
}

Observation Simulation::observe() const { return sedro::observe(world_, stage(), setup_.retina); }

void Simulation::step(const Action& action) {
  const StageParams& st = stage();
  const MotorCommand motor = apply_action(action, st, *world_.model);
  auto [care, cmd] = caregiver_policy(world_, world_.caregiver, st, kDt);
  world_.caregiver = std::move(care);
  if (cmd.interact) {
    if (const auto* u = std::get_if<Utterance>(&*cmd.interact))
      events_.push_back({proto::EventKind::Utterance, {{"tokens", u->tokens}, {"tick", world_.tick + 1}}});
  }
  world_ = step_world(std::move(world_), motor, cmd);

  age_ = advance_age(age0_, world_.tick, setup_.time_scale);
  for (const DevEvent& e : tracker_->update(age_)) {
    events_.push_back(dev_event(e));
    if (e.kind != "stage_change") continue;
    const std::string& next = tracker_->current().scene_id;
    if (next == world_.scene_id) continue;
    const auto it = scenes_.find(next);
    if (it == scenes_.end()) throw Error("no scene loaded for \"" + next + "\"");
    world_ = transition_scene(world_, it->second);
  }
}

void Simulation::push_event(proto::Event event) { events_.push_back(std::move(event)); }

std::vector<proto::Event> Simulation::take_events() { return std::exchange(events_, {}); }

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Completed: return "completed";
    case SessionStatus::Aborted: return "aborted";
    case SessionStatus::TimedOut: return "timed_out";
    case SessionStatus::Failed: return "failed";
  }
  return "unknown";
}

// ---- log file ----

namespace {

Bytes encode_record(const LogRecord& rec) {
  ByteWriter w;
  w.u64(rec.digest);
  w.u32(static_cast<std::uint32_t>(rec.action.size()));
  w.raw(rec.action);
  w.u32(static_cast<std::uint32_t>(rec.events.size()));
  for (const auto& e : rec.events) {
    const Bytes b = proto::encode_event(e);
    w.u32(static_cast<std::uint32_t>(b.size()));
    w.raw(b);
  }
  return w.take();
}

LogRecord decode_record(std::uint64_t tick, std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  LogRecord rec;
  rec.tick = tick;
  rec.digest = r.u64();
  auto a = r.raw(r.u32());
  rec.action.assign(a.begin(), a.end());
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) rec.events.push_back(proto::decode_event(r.raw(r.u32())));
  if (!r.done()) throw LogFormatError("tick record " + std::to_string(tick) + " has trailing bytes");
  return rec;
}

}  // namespace

SessionLogWriter::SessionLogWriter(const fs::path& path, const json& header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw IoError("cannot write log " + path.string());
  const std::string text = header.dump();
  put(kLogHeader, 0, Bytes(text.begin(), text.end()));
}

void SessionLogWriter::put(std::uint8_t type, std::uint64_t tick, const Bytes& payload) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(proto::kHeaderSize + payload.size()));
  w.u8(type);
  w.u64(tick);
  w.raw(payload);
  out_.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.size()));
  if (!out_) throw IoError("write failed on log " + path_.string());
}

void SessionLogWriter::record(const LogRecord& rec) { put(kLogTick, rec.tick, encode_record(rec)); }

void SessionLogWriter::finish(const LogEnd& end) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(end.status));
  w.u64(end.ticks);
  w.str(end.reason);
  put(kLogEnd, end.ticks, w.take());
  out_.flush();
}

SessionLog read_session_log(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open log " + path.string());
  const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  SessionLog log;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < data.size()) {
    if (data.size() - pos < proto::kHeaderSize) {
      log.truncated = true;
      break;
    }
    ByteReader h{std::span<const std::uint8_t>(data).subspan(pos, proto::kHeaderSize)};
    const std::uint32_t length = h.u32();
    const std::uint8_t type = h.u8();
    const std::uint64_t tick = h.u64();
    if (length < proto::kHeaderSize) throw LogFormatError("bad frame length at byte " + std::to_string(pos));
    if (type != kLogHeader && type != kLogTick && type != kLogEnd)
      throw LogFormatError("unknown log frame type " + std::to_string(type) + " at byte " + std::to_string(pos));
    if (data.size() - pos < length) {
      log.truncated = true;
      break;
    }
    const auto payload = std::span(data).subspan(pos + proto::kHeaderSize, length - proto::kHeaderSize);
    pos += length;
    if (!have_header) {
      if (type != kLogHeader) throw LogFormatError("log does not start with a header");
      try {
        log.header = json::parse(payload.begin(), payload.end());
      } catch (const json::exception& e) {
        throw LogFormatError(std::string("log header is not JSON: ") + e.what());
      }
      have_header = true;
      continue;
    }
    if (log.end) throw LogFormatError("data after the end record");
    try {
      if (type == kLogTick) {
        if (tick != log.records.size())
          throw LogFormatError("tick record " + std::to_string(tick) + " out of sequence");
        log.records.push_back(decode_record(tick, payload));
      } else if (type == kLogEnd) {
        ByteReader r(payload);
        LogEnd end;
        const std::uint8_t status = r.u8();
        if (status > 3) throw LogFormatError("unknown end status " + std::to_string(status));
        end.status = static_cast<SessionStatus>(status);
        end.ticks = r.u64();
        end.reason = r.str();
        log.end = end;
      } else {
        throw LogFormatError("second header at byte " + std::to_string(pos - length));
      }
    } catch (const IoError&) {
      throw LogFormatError("malformed log record at tick " + std::to_string(tick));
    } catch (const proto::ProtocolError& e) {
      throw LogFormatError(std::string("malformed event in log: ") + e.what());
    }
  }
  if (!have_header) throw LogFormatError("truncated header");
  if (!log.end) log.truncated = true;
  return log;
}

std::string ReplayResult::summary() const {
  std::string s;
  if (first_divergence)
    s = "diverged at tick " + std::to_string(*first_divergence) + " after " + std::to_string(verified) +
        " verified ticks";
  else
    s = "verified, 0 divergences (" + std::to_string(verified) + " ticks)";
  if (truncated) s += ", log truncated";
  return s;
}

ReplayResult replay(const SessionLog& log) {
  SessionSetup setup = SessionSetup::from_json(log.header.at("setup"));
  Simulation sim(setup);
  ReplayResult out;
  out.truncated = log.truncated;
  for (const LogRecord& rec : log.records) {
    const auto events = sim.take_events();
    if (proto::observation_digest(sim.observe()) != rec.digest || events != rec.events) {
      out.first_divergence = rec.tick;
      return out;
    }
    Action action;
    try {
      action = proto::decode_action(rec.action);
    } catch (const Error&) {
      out.first_divergence = rec.tick;
      return out;
    }
    sim.step(action);
    ++out.verified;
  }
  return out;
}

// ---- live session ----

namespace {

void send(net::Stream& s, proto::FrameType type, std::uint64_t tick, Bytes payload) {
  net::write_frame(s, {type, tick, std::move(payload)});
}

}  // namespace

void send_error(net::Stream& s, std::uint64_t tick, proto::ErrorCode code, const std::string& msg) {
  try {
    send(s, proto::FrameType::Err, tick, proto::encode_error({code, msg}));
  } catch (const IoError&) {
    // peer already gone
  }
}

TickExchange serve_tick(net::Stream& stream, Simulation& sim, int timeout_ms, bool allow_reset) {
  TickExchange x;
  const std::uint64_t t = sim.tick();
  x.record.tick = t;
  x.record.events = sim.take_events();
  for (const auto& e : x.record.events) send(stream, proto::FrameType::Event, t, proto::encode_event(e));
  Bytes payload = proto::encode_observation(sim.observe());
  x.record.digest = fnv1a64(payload);
  send(stream, proto::FrameType::Obs, t, std::move(payload));

  while (true) {
    proto::Frame f = net::read_frame(stream, timeout_ms);
    switch (f.type) {
      case proto::FrameType::Act:
        try {
          const Action a = proto::decode_action(f.payload);
          x.record.action = std::move(f.payload);
          sim.step(a);
          return x;
        } catch (const NonFiniteActionError& e) {
          send_error(stream, t, proto::ErrorCode::NonFiniteAction, e.what());
        } catch (const proto::ProtocolError& e) {
          send_error(stream, t, e.code(), e.what());
        }
        continue;
      case proto::FrameType::Bye:
        x.outcome = TickOutcome::Bye;
        return x;
      case proto::FrameType::Reset:
        if (!allow_reset) break;
        x.outcome = TickOutcome::Reset;
        x.reset = proto::decode_reset(f.payload);
        return x;
      default:
        break;
    }
    throw proto::ProtocolError(proto::ErrorCode::UnexpectedFrame,
                               "unexpected frame type " + std::to_string(static_cast<int>(f.type)) + " at tick " +
                                   std::to_string(t));
  }
}

std::uint16_t server_handshake(net::Stream& s, std::span<const std::uint16_t> versions, int timeout_ms) {
  const proto::Frame f = net::read_frame(s, timeout_ms);
  if (f.type != proto::FrameType::Hello) {
    send_error(s, 0, proto::ErrorCode::UnexpectedFrame, "expected HELLO");
    throw proto::ProtocolError(proto::ErrorCode::UnexpectedFrame, "expected HELLO");
  }
  try {
    const std::uint16_t v = proto::negotiate(proto::decode_hello(f.payload), versions);
    const std::uint16_t chosen[] = {v};
    send(s, proto::FrameType::Hello, 0, proto::encode_hello(chosen));
    return v;
  } catch (const proto::ProtocolError& e) {
    send_error(s, 0, e.code(), e.what());
    throw;
  }
}

std::uint16_t client_handshake(net::Stream& s, std::span<const std::uint16_t> versions, int timeout_ms) {
  send(s, proto::FrameType::Hello, 0, proto::encode_hello(versions));
  const proto::Frame f = net::read_frame(s, timeout_ms);
  if (f.type == proto::FrameType::Err) {
    const auto e = proto::decode_error(f.payload);
    throw proto::ProtocolError(e.code, "server refused handshake: " + e.message);
  }
  if (f.type != proto::FrameType::Hello)
    throw proto::ProtocolError(proto::ErrorCode::UnexpectedFrame, "expected HELLO reply");
  const proto::Hello h = proto::decode_hello(f.payload);
  if (h.versions.size() != 1 ||
      std::find(versions.begin(), versions.end(), h.versions[0]) == versions.end())
    throw proto::ProtocolError(proto::ErrorCode::NoMutualVersion, "server chose an unoffered version");
  return h.versions[0];
}

SessionResult run_session(net::Stream& stream, const SessionSetup& setup, const SessionOptions& opts) {
  SessionResult result;
  std::uint16_t version = 0;
  try {
    version = server_handshake(stream, opts.versions, opts.timeout_ms);
  } catch (const net::TimeoutError& e) {
    return {SessionStatus::TimedOut, 0, e.what()};
  } catch (const Error& e) {
    return {SessionStatus::Failed, 0, e.what()};
  }

  SessionSetup active = setup;
  auto sim = std::make_unique<Simulation>(active);
  std::unique_ptr<SessionLogWriter> log;
  auto open_log = [&] {
    if (!opts.log_path || log) return;
    json header;
    header["format"] = "sedro-session-log";
    header["protocol_version"] = version;
    header["setup"] = active.to_json();
    log = std::make_unique<SessionLogWriter>(*opts.log_path, header);
  };
  auto finish = [&](SessionStatus status, const std::string& msg) {
    result.status = status;
    result.message = msg;
    open_log();
    if (log) log->finish({status, result.ticks, msg});
    return result;
  };

  try {
    while (sim->tick() < active.max_ticks) {
      TickExchange x = serve_tick(stream, *sim, opts.timeout_ms, sim->tick() == 0);
      if (x.outcome == TickOutcome::Bye) return finish(SessionStatus::Completed, "client ended the session");
      if (x.outcome == TickOutcome::Reset) {
        active.seed = x.reset.seed;
        if (!x.reset.scene.empty()) active.scene = setup.scene.parent_path() / (x.reset.scene + ".json");
        sim = std::make_unique<Simulation>(active);
        continue;
      }
      open_log();
      if (log) log->record(x.record);
      ++result.ticks;
    }
    const std::uint64_t t = sim->tick();
    send(stream, proto::FrameType::Event, t, proto::encode_event({proto::EventKind::SessionEnd, {{"ticks", t}}}));
    send(stream, proto::FrameType::Bye, t, proto::encode_bye(proto::ByeStatus::Completed));
    return finish(SessionStatus::Completed, "max ticks reached");
  } catch (const net::TimeoutError& e) {
    send_error(stream, result.ticks, proto::ErrorCode::Timeout, e.what());
    return finish(SessionStatus::TimedOut, e.what());
  } catch (const net::ClosedError& e) {
    return finish(SessionStatus::Aborted, std::string("agent disconnected: ") + e.what());
  } catch (const proto::ProtocolError& e) {
    send_error(stream, result.ticks, e.code(), e.what());
    return finish(SessionStatus::Failed, e.what());
  }
}

}  // namespace sedro
