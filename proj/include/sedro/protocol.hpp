#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedro/bytes.hpp"
#include "sedro/sensors.hpp"

namespace sedro::proto {

enum class FrameType : std::uint8_t { Hello = 1, Obs = 2, Act = 3, Reset = 4, Event = 5, Bye = 6, Err = 7 };

/// u32 total length, u8 type, u64 tick.
inline constexpr std::size_t kHeaderSize = 13;
inline constexpr std::size_t kMaxFrameSize = 1u << 24;
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr char kMagic[4] = {'S', 'D', 'R', 'O'};

inline constexpr std::size_t kTouchBytes = kNumTouchSensors / 8;
inline constexpr std::size_t kObsPayloadSize =
    kFoveaBytes + kPeripheryBytes + kTouchBytes + 4 * (kProprioSize + 3 + 6 + 4);
inline constexpr std::size_t kActPayloadSize = 4 * kNumActionChannels;
static_assert(kObsPayloadSize == 4332);
static_assert(kActPayloadSize == 224);

enum class ErrorCode : std::uint16_t {
  BadMagic = 1,
  NoMutualVersion = 2,
  BadFrame = 3,
  BadPayload = 4,
  UnexpectedFrame = 5,
  NonFiniteAction = 6,
  Timeout = 7,
  Internal = 8,
};
const char* to_string(ErrorCode code);

/// Malformed or out-of-sequence wire data.
class ProtocolError : public Error {
 public:
  ProtocolError(ErrorCode code, const std::string& what) : Error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Frame {
  FrameType type = FrameType::Hello;
  std::uint64_t tick = 0;
  Bytes payload;

  bool operator==(const Frame&) const = default;
};

Bytes encode_frame(const Frame& frame);
/// Exactly one frame; the length prefix must match the buffer.
Frame decode_frame(std::span<const std::uint8_t> bytes);
/// Validates a 13-byte header and returns the payload size it announces.
std::size_t payload_size_from_header(std::span<const std::uint8_t> header);

struct Hello {
  std::string magic;
  std::vector<std::uint16_t> versions;
};
Bytes encode_hello(std::span<const std::uint16_t> versions);
Hello decode_hello(std::span<const std::uint8_t> payload);
/// Highest version both sides list. Throws BadMagic or NoMutualVersion.
std::uint16_t negotiate(const Hello& client, std::span<const std::uint16_t> server_versions);

Bytes encode_observation(const Observation& obs);
Observation decode_observation(std::span<const std::uint8_t> payload, std::uint64_t tick);

Bytes encode_action(const Action& action);
Bytes encode_action(std::span<const float> values);
/// Throws ProtocolError(BadPayload) on a wrong size and NonFiniteActionError on NaN/Inf.
Action decode_action(std::span<const std::uint8_t> payload);

enum class EventKind : std::uint16_t {
  Birth = 1,
  StageChange = 2,
  Utterance = 3,
  Stimulus = 4,
  TrialStart = 5,
  TrialEnd = 6,
  SessionEnd = 7,
};
const char* to_string(EventKind kind);

struct Event {
  EventKind kind = EventKind::Birth;
  nlohmann::json body = nlohmann::json::object();

  bool operator==(const Event&) const = default;
};
Bytes encode_event(const Event& event);
Event decode_event(std::span<const std::uint8_t> payload);

struct Reset {
  std::uint64_t seed = 0;
  std::string scene;
};
Bytes encode_reset(const Reset& reset);
Reset decode_reset(std::span<const std::uint8_t> payload);

struct ErrorMessage {
  ErrorCode code = ErrorCode::Internal;
  std::string message;
};
Bytes encode_error(const ErrorMessage& err);
ErrorMessage decode_error(std::span<const std::uint8_t> payload);

enum class ByeStatus : std::uint8_t { Completed = 0, Aborted = 1, Failed = 2 };
Bytes encode_bye(ByeStatus status);
ByeStatus decode_bye(std::span<const std::uint8_t> payload);

/// FNV-1a of the encoded OBS payload.
std::uint64_t observation_digest(const Observation& obs);

}  // namespace sedro::proto
