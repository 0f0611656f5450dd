#include "sedro/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace sedro::proto {

namespace {

void expect_size(std::span<const std::uint8_t> payload, std::size_t want, const char* what) {
  if (payload.size() != want)
    throw ProtocolError(ErrorCode::BadPayload, std::string(what) + " payload: expected " + std::to_string(want) +
                                                   " bytes, got " + std::to_string(payload.size()));
}

void expect_done(const ByteReader& r, const char* what) {
  if (!r.done())
    throw ProtocolError(ErrorCode::BadPayload,
                        std::string(what) + " payload: " + std::to_string(r.remaining()) + " trailing bytes");
}

bool known_type(std::uint8_t t) { return t >= 1 && t <= 7; }

// Short reads inside a payload are a protocol problem, not an I/O one.
template <typename F>
auto parse(const char* what, F&& f) {
  try {
    return f();
  } catch (const ProtocolError&) {
    throw;
  } catch (const IoError&) {
    throw ProtocolError(ErrorCode::BadPayload, std::string(what) + " payload truncated");
  }
}

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::NoMutualVersion: return "NoMutualVersion";
    case ErrorCode::BadFrame: return "BadFrame";
    case ErrorCode::BadPayload: return "BadPayload";
    case ErrorCode::UnexpectedFrame: return "UnexpectedFrame";
    case ErrorCode::NonFiniteAction: return "NonFiniteAction";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Birth: return "birth";
    case EventKind::StageChange: return "stage_change";
    case EventKind::Utterance: return "utterance";
    case EventKind::Stimulus: return "stimulus";
    case EventKind::TrialStart: return "trial_start";
    case EventKind::TrialEnd: return "trial_end";
    case EventKind::SessionEnd: return "session_end";
  }
  return "unknown";
}

Bytes encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxFrameSize - kHeaderSize)
    throw ProtocolError(ErrorCode::BadFrame, "frame payload too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(kHeaderSize + frame.payload.size()));
  w.u8(static_cast<std::uint8_t>(frame.type));
  w.u64(frame.tick);
  w.raw(frame.payload);
  return w.take();
}

std::size_t payload_size_from_header(std::span<const std::uint8_t> header) {
  if (header.size() < kHeaderSize) throw ProtocolError(ErrorCode::BadFrame, "truncated frame header");
  ByteReader r(header.first(kHeaderSize));
  const std::uint32_t length = r.u32();
  const std::uint8_t type = r.u8();
  if (length < kHeaderSize)
    throw ProtocolError(ErrorCode::BadFrame, "frame length " + std::to_string(length) + " shorter than header");
  if (length > kMaxFrameSize)
    throw ProtocolError(ErrorCode::BadFrame, "frame length " + std::to_string(length) + " exceeds limit");
  if (!known_type(type)) throw ProtocolError(ErrorCode::BadFrame, "unknown frame type " + std::to_string(type));
  return length - kHeaderSize;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  const std::size_t n = payload_size_from_header(bytes);
  if (bytes.size() != kHeaderSize + n)
    throw ProtocolError(ErrorCode::BadFrame, "frame length " + std::to_string(kHeaderSize + n) + " but " +
                                                 std::to_string(bytes.size()) + " bytes present");
  ByteReader r(bytes);
  r.u32();
  Frame f;
  f.type = static_cast<FrameType>(r.u8());
  f.tick = r.u64();
  auto p = r.raw(n);
  f.payload.assign(p.begin(), p.end());
  return f;
}

Bytes encode_hello(std::span<const std::uint16_t> versions) {
  if (versions.empty() || versions.size() > 255) throw Error("hello: need 1..255 versions");
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u8(static_cast<std::uint8_t>(versions.size()));
  for (auto v : versions) w.u16(v);
  return w.take();
}

Hello decode_hello(std::span<const std::uint8_t> payload) {
  if (payload.size() < 4) throw ProtocolError(ErrorCode::BadPayload, "HELLO payload truncated");
  Hello h;
  h.magic.assign(payload.begin(), payload.begin() + 4);
  if (h.magic != std::string_view(kMagic, 4)) throw ProtocolError(ErrorCode::BadMagic, "bad magic \"" + h.magic + "\"");
  return parse("HELLO", [&] {
    ByteReader r(payload.subspan(4));
    const std::uint8_t n = r.u8();
    if (n == 0) throw ProtocolError(ErrorCode::BadPayload, "HELLO lists no versions");
    for (int i = 0; i < n; ++i) h.versions.push_back(r.u16());
    expect_done(r, "HELLO");
    return h;
  });
}

std::uint16_t negotiate(const Hello& client, std::span<const std::uint16_t> server_versions) {
  if (client.magic != std::string_view(kMagic, 4))
    throw ProtocolError(ErrorCode::BadMagic, "bad magic \"" + client.magic + "\"");
  std::optional<std::uint16_t> best;
  for (auto v : client.versions)
    if (std::find(server_versions.begin(), server_versions.end(), v) != server_versions.end())
      best = std::max(best.value_or(v), v);
  if (!best) {
    std::string msg = "no mutual version: client {";
    for (std::size_t i = 0; i < client.versions.size(); ++i)
      msg += (i ? "," : "") + std::to_string(client.versions[i]);
    msg += "} server {";
    for (std::size_t i = 0; i < server_versions.size(); ++i)
      msg += (i ? "," : "") + std::to_string(server_versions[i]);
    throw ProtocolError(ErrorCode::NoMutualVersion, msg + "}");
  }
  return *best;
}

Bytes encode_observation(const Observation& obs) {
  ByteWriter w;
  w.bytes().reserve(kObsPayloadSize);
  w.raw(obs.fovea);
  w.raw(obs.periphery);
  // Touch bits packed LSB first.
  for (std::size_t b = 0; b < kTouchBytes; ++b) {
    std::uint8_t v = 0;
    for (int k = 0; k < 8; ++k)
      if (obs.touch[8 * b + static_cast<std::size_t>(k)]) v |= static_cast<std::uint8_t>(1u << k);
    w.u8(v);
  }
  for (float x : obs.proprio) w.f32(x);
  for (float x : obs.eye_pose) w.f32(x);
  for (float x : obs.vestibular) w.f32(x);
  for (float x : obs.interoception) w.f32(x);
  return w.take();
}

Observation decode_observation(std::span<const std::uint8_t> payload, std::uint64_t tick) {
  expect_size(payload, kObsPayloadSize, "OBS");
  ByteReader r(payload);
  Observation o;
  o.tick = tick;
  auto fov = r.raw(kFoveaBytes);
  std::copy(fov.begin(), fov.end(), o.fovea.begin());
  auto per = r.raw(kPeripheryBytes);
  std::copy(per.begin(), per.end(), o.periphery.begin());
  for (std::size_t b = 0; b < kTouchBytes; ++b) {
    const std::uint8_t v = r.u8();
    for (int k = 0; k < 8; ++k) o.touch[8 * b + static_cast<std::size_t>(k)] = (v >> k) & 1u;
  }
  for (float& x : o.proprio) x = r.f32();
  for (float& x : o.eye_pose) x = r.f32();
  for (float& x : o.vestibular) x = r.f32();
  for (float& x : o.interoception) x = r.f32();
  return o;
}

Bytes encode_action(std::span<const float> values) {
  if (values.size() != kNumActionChannels)
    throw ValidationError("action", "expected " + std::to_string(kNumActionChannels) + " values, got " +
                                        std::to_string(values.size()));
  ByteWriter w;
  for (float v : values) w.f32(v);
  return w.take();
}

Bytes encode_action(const Action& action) {
  std::array<float, kNumActionChannels> f{};
  const auto v = action.values();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(v[i]);
  return encode_action(f);
}

Action decode_action(std::span<const std::uint8_t> payload) {
  expect_size(payload, kActPayloadSize, "ACT");
  ByteReader r(payload);
  std::array<float, kNumActionChannels> f{};
  for (float& x : f) x = r.f32();
  return Action::from_floats(f);
}

Bytes encode_event(const Event& event) {
  const std::string text = event.body.dump();
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(event.kind));
  w.str(text);
  return w.take();
}

Event decode_event(std::span<const std::uint8_t> payload) {
  return parse("EVENT", [&] {
    ByteReader r(payload);
    Event e;
    const std::uint16_t kind = r.u16();
    if (kind < 1 || kind > 7) throw ProtocolError(ErrorCode::BadPayload, "unknown event kind " + std::to_string(kind));
    e.kind = static_cast<EventKind>(kind);
    const std::string text = r.str();
    expect_done(r, "EVENT");
    try {
      e.body = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
      throw ProtocolError(ErrorCode::BadPayload, std::string("EVENT body is not JSON: ") + ex.what());
    }
    return e;
  });
}

Bytes encode_reset(const Reset& reset) {
  ByteWriter w;
  w.u64(reset.seed);
  w.str(reset.scene);
  return w.take();
}

Reset decode_reset(std::span<const std::uint8_t> payload) {
  return parse("RESET", [&] {
    ByteReader r(payload);
    Reset out;
    out.seed = r.u64();
    out.scene = r.str();
    expect_done(r, "RESET");
    return out;
  });
}

Bytes encode_error(const ErrorMessage& err) {
  const std::string_view msg(err.message.data(), std::min<std::size_t>(err.message.size(), 0xffff));
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(err.code));
  w.u16(static_cast<std::uint16_t>(msg.size()));
  w.raw(msg);
  return w.take();
}

ErrorMessage decode_error(std::span<const std::uint8_t> payload) {
  return parse("ERR", [&] {
    ByteReader r(payload);
    ErrorMessage e;
    e.code = static_cast<ErrorCode>(r.u16());
    auto text = r.raw(r.u16());
    e.message.assign(text.begin(), text.end());
    expect_done(r, "ERR");
    return e;
  });
}

Bytes encode_bye(ByeStatus status) { return Bytes{static_cast<std::uint8_t>(status)}; }

ByeStatus decode_bye(std::span<const std::uint8_t> payload) {
  expect_size(payload, 1, "BYE");
  if (payload[0] > 2) throw ProtocolError(ErrorCode::BadPayload, "unknown BYE status " + std::to_string(payload[0]));
  return static_cast<ByeStatus>(payload[0]);
}

std::uint64_t observation_digest(const Observation& obs) { return fnv1a64(encode_observation(obs)); }

}  // namespace sedro::proto
