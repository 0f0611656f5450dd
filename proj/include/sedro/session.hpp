#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedro/development.hpp"
#include "sedro/protocol.hpp"
#include "sedro/sensors.hpp"
#include "sedro/transport.hpp"
#include "sedro/world.hpp"

namespace sedro {

/// Everything needed to reproduce a session from tick 0.
struct SessionSetup {
  std::filesystem::path scene;
  std::filesystem::path schedule;
  std::optional<std::filesystem::path> script;  ///< overrides the scenes' caregiver
  std::optional<std::uint64_t> seed;            ///< overrides the scene seed
  double time_scale = 1.0;
  std::uint64_t max_ticks = 1000;
  RetinaConfig retina;

  nlohmann::json to_json() const;
  static SessionSetup from_json(const nlohmann::json& doc);
};

/// Default asset root: $SEDRO_DATA_DIR, else the build-time data directory.
std::filesystem::path data_dir();

/// Lockstep kernel shared by live sessions, replay and evaluation: the world,
/// the development clock and the caregiver, without any I/O.
class Simulation {
 public:
  /// Loads and validates every file the session can reach. Throws
  /// ValidationError or IoError.
  explicit Simulation(const SessionSetup& setup);

  const WorldState& world() const { return world_; }
  WorldState& world_mut() { return world_; }
  const StageParams& stage() const { return tracker_->current(); }
  double age_days() const { return age_; }
  std::uint64_t tick() const { return world_.tick; }

  Observation observe() const;
  /// Applies the action for the current tick and advances one tick.
  void step(const Action& action);

  void push_event(proto::Event event);
  /// Events raised since the last call, oldest first.
  std::vector<proto::Event> take_events();

 private:
  SessionSetup setup_;
  std::shared_ptr<const Schedule> schedule_;
  std::map<std::string, SceneSpec> scenes_;  ///< by scene id
  std::unique_ptr<AgeTracker> tracker_;
  WorldState world_;
  double age0_ = 0.0;
  double age_ = 0.0;
  std::vector<proto::Event> events_;
};

// Log frame types, outside the wire range.
inline constexpr std::uint8_t kLogHeader = 0x20;
inline constexpr std::uint8_t kLogTick = 0x21;
inline constexpr std::uint8_t kLogEnd = 0x22;

enum class SessionStatus : std::uint8_t { Completed = 0, Aborted = 1, TimedOut = 2, Failed = 3 };
const char* to_string(SessionStatus s);

struct LogRecord {
  std::uint64_t tick = 0;
  std::uint64_t digest = 0;  ///< observation digest at `tick`
  Bytes action;              ///< ACT payload as received
  std::vector<proto::Event> events;  ///< sent before OBS(tick)

  bool operator==(const LogRecord&) const = default;
};

struct LogEnd {
  SessionStatus status = SessionStatus::Completed;
  std::uint64_t ticks = 0;
  std::string reason;
};

struct SessionLog {
  nlohmann::json header;
  std::vector<LogRecord> records;
  std::optional<LogEnd> end;  ///< missing when the file was cut short
  bool truncated = false;
};

/// Appends framed log records to a file as the session runs.
class SessionLogWriter {
 public:
  SessionLogWriter(const std::filesystem::path& path, const nlohmann::json& header);
  void record(const LogRecord& rec);
  void finish(const LogEnd& end);

 private:
  void put(std::uint8_t type, std::uint64_t tick, const Bytes& payload);
  std::ofstream out_;
  std::filesystem::path path_;
};

/// Corrupt or unreadable session log.
class LogFormatError : public Error {
 public:
  using Error::Error;
};

/// Empty file → "truncated header"; a frame cut off at the end marks the log truncated.
SessionLog read_session_log(const std::filesystem::path& path);

struct ReplayResult {
  std::uint64_t verified = 0;  ///< ticks whose digest matched
  std::optional<std::uint64_t> first_divergence;
  bool truncated = false;
  std::string summary() const;
};

/// Re-simulates the logged actions and compares observation digests and events.
ReplayResult replay(const SessionLog& log);

/// Server side of the HELLO exchange. Sends ERR and throws ProtocolError on failure.
std::uint16_t server_handshake(net::Stream& s, std::span<const std::uint16_t> versions, int timeout_ms);
/// Client side. Throws ProtocolError naming both version lists when refused.
std::uint16_t client_handshake(net::Stream& s, std::span<const std::uint16_t> versions, int timeout_ms);

enum class TickOutcome { Stepped, Bye, Reset };

struct TickExchange {
  TickOutcome outcome = TickOutcome::Stepped;
  LogRecord record;    ///< filled when Stepped
  proto::Reset reset;  ///< filled when Reset
};

/// One lockstep tick on the wire: pending EVENTs, OBS, then blocks for ACT
/// and steps. Bad or non-finite actions get an ERR and the tick stays
/// pending. RESET is returned to the caller only when `allow_reset`.
/// Throws TimeoutError, ClosedError, or ProtocolError for out-of-sequence frames.
TickExchange serve_tick(net::Stream& stream, Simulation& sim, int timeout_ms, bool allow_reset = false);

/// Sends an ERR frame, ignoring a peer that has already gone.
void send_error(net::Stream& s, std::uint64_t tick, proto::ErrorCode code, const std::string& msg);

struct SessionOptions {
  int timeout_ms = 30000;
  std::optional<std::filesystem::path> log_path;
  std::vector<std::uint16_t> versions{proto::kProtocolVersion};
};

struct SessionResult {
  SessionStatus status = SessionStatus::Completed;
  std::uint64_t ticks = 0;  ///< ACTs applied
  std::string message;
};

/// Strict lockstep: per tick send EVENTs and OBS, block for ACT, step. An
/// RESET in place of the first ACT restarts with a new seed or scene.
SessionResult run_session(net::Stream& stream, const SessionSetup& setup, const SessionOptions& opts);

}  // namespace sedro
