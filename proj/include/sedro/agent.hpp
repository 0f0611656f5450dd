#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sedro/protocol.hpp"
#include "sedro/sensors.hpp"
#include "sedro/transport.hpp"

namespace sedro::agent {

/// Maps the latest observation and the events that preceded it to an action.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const Observation& obs, const std::vector<proto::Event>& events) = 0;
};

/// All muscles and eyes at rest.
class ZeroPolicy : public Policy {
 public:
  Action act(const Observation&, const std::vector<proto::Event>&) override { return {}; }
};

/// Uniform commands in [-scale, scale], a pure function of (seed, tick).
class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed, double scale = 1.0) : seed_(seed), scale_(scale) {}
  Action act(const Observation& obs, const std::vector<proto::Event>& events) override;

 private:
  std::uint64_t seed_;
  double scale_;
};

enum class GazeMode {
  Familiarity,  ///< looks longest at what resembles the most-seen display
  Novelty,      ///< looks longest at what differs from it
  Symmetric,    ///< same look for every fresh stimulus
  Stare,        ///< never moves the eyes
  LookFor,      ///< fixed look of `look_for` seconds per stimulus
};

struct OracleParams {
  GazeMode mode = GazeMode::Novelty;
  double base_look = 24.0;    ///< s, look at a fresh stimulus of full weight
  double satiation = 30.0;    ///< s of exposure per e-fold of interest
  double look_for = 10.0;     ///< s, LookFor only
};

/// Scripted looker for evaluation scenarios. Reads the stimulus advertised by
/// EVENT frames, steers the eyes onto it for a planned time, then looks away.
/// Muscles stay at zero.
class GazeOracle : public Policy {
 public:
  explicit GazeOracle(OracleParams p) : p_(p) {}
  Action act(const Observation& obs, const std::vector<proto::Event>& events) override;

  /// Planned look in seconds for a stimulus with these features, given the
  /// exposure so far. Pure function of the memory and mode.
  double planned_look(const std::string& stimulus, const std::vector<std::string>& features) const;
  const std::map<std::string, double>& exposure() const { return exposure_; }
  const std::map<std::string, int>& presentations() const { return presentations_; }

 private:
  struct Target {
    Vec3 fixation = Vec3::Zero();
    Vec3 lookaway = Vec3::Zero();
    Vec3 axis = Vec3::UnitY();
    double amplitude = 0.0;
    double frequency = 0.0;
    std::uint64_t start_tick = 0;
    double max_speed = 1.0;
    std::uint64_t look_until = 0;  ///< last tick whose command aims at the fixation, exclusive
    bool resting = false;          ///< trial over, parked at the look-away point
  };

  void on_stimulus(const nlohmann::json& body, std::uint64_t tick);

  OracleParams p_;
  std::map<std::string, double> exposure_;                    ///< planned look seconds per stimulus id
  std::map<std::string, int> presentations_;
  std::map<std::string, std::vector<std::string>> features_;  ///< per stimulus id
  std::optional<Target> target_;
};

/// "zero", "random", "familiarity", "novelty", "symmetric", "stare", or
/// "look:<seconds>". Throws ValidationError("policy") otherwise.
std::unique_ptr<Policy> make_policy(const std::string& name, std::uint64_t seed = 0);

struct ClientOptions {
  int timeout_ms = 30000;
  std::vector<std::uint16_t> versions{proto::kProtocolVersion};
  std::optional<std::uint64_t> max_ticks;  ///< send BYE after this many actions
};

struct ClientResult {
  bool completed = false;  ///< server sent BYE Completed, or we ended at max_ticks
  std::uint64_t ticks = 0;  ///< actions sent
  std::uint16_t version = 0;
  std::vector<std::string> errors;  ///< ERR messages received
  std::string message;
};

/// Lockstep client loop: handshake, then per OBS one ACT until BYE or the
/// stream closes. Throws ProtocolError when the handshake is refused.
ClientResult run_client(net::Stream& stream, Policy& policy, const ClientOptions& opts = {});

}  // namespace sedro::agent
