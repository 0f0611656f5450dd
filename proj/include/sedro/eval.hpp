#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedro/session.hpp"
#include "sedro/world.hpp"

namespace sedro::eval {

struct HabituationCriterion {
  int window = 3;
  double ratio = 0.5;
  int min_trials = 6;
  int max_trials = 14;
  double lookaway_end = 2.0;  ///< s of continuous look-away that ends a trial
  double trial_cap = 60.0;    ///< s
  double blank = 2.0;         ///< s between trials
  bool cone = false;          ///< gaze by cone instead of the central ray
  double cone_half_angle_deg = 10.0;

  /// Throws ValidationError naming the field.
  void validate() const;
  nlohmann::json to_json() const;
  static HabituationCriterion from_json(const nlohmann::json& doc);
  bool operator==(const HabituationCriterion&) const = default;
};

enum class EndedBy { LookAway, Cap };
const char* to_string(EndedBy e);

struct Trial {
  int index = 0;  ///< 1-based within its phase
  std::string stimulus_id;
  double looking_time = 0.0;  ///< s
  EndedBy ended_by = EndedBy::LookAway;
  std::uint64_t start_tick = 0;
  std::vector<std::uint8_t> gaze;  ///< per tick of the trial, 0 or 1

  bool operator==(const Trial&) const = default;
};

struct HabituationReport {
  std::string scenario = "rod_and_box";
  std::uint64_t seed = 0;
  HabituationCriterion criterion;
  std::vector<Trial> habituation_trials;
  std::optional<int> habituated_at;  ///< trial index
  std::vector<Trial> test_trials;
  std::optional<double> novelty_preference;
  std::vector<std::string> flags;  ///< "NotHabituated", "NoLooking"

  bool operator==(const HabituationReport&) const = default;
};

/// True iff the gaze ray (or cone) meets an object carrying any of `tags`.
bool gaze_on_stimulus(const WorldState& state, std::span<const std::string> tags,
                      const HabituationCriterion& crit = {});

/// Mean of the last `window` looking times below ratio x the mean of the
/// first `window`, once at least min_trials are in.
bool habituation_reached(std::span<const double> looking_times, const HabituationCriterion& crit);
bool habituation_reached(std::span<const Trial> trials, const HabituationCriterion& crit);

/// Σ broken / (Σ broken + Σ complete); nullopt when nothing was looked at.
std::optional<double> novelty_preference(std::span<const Trial> test_trials);

struct RodAndBoxConfig {
  double rod_length = 0.3;
  double rod_width = 0.02;
  double box_width = 0.12;    ///< extent along the rod that it hides
  double box_lateral = 0.22;  ///< extent across the rod's motion
  double box_depth = 0.02;
  double box_gap = 0.05;      ///< box sits this much nearer the eyes than the rod
  double amplitude = 0.08;
  double frequency = 0.5;
  double distance = 0.6;
  bool moving_in_test = true;
  HabituationCriterion criterion;

  void validate() const;
  nlohmann::json to_json() const;
  static RodAndBoxConfig from_json(const nlohmann::json& doc);
};

struct EvalOptions {
  SessionSetup setup;  ///< scene, schedule and seed of the evaluation room
  int timeout_ms = 30000;
  std::vector<std::uint16_t> versions{proto::kProtocolVersion};
};

/// Handshakes with the agent, runs habituation then the test phase, and
/// ends the session. Throws on agent failure (timeout, disconnect, protocol).
HabituationReport run_rod_and_box(net::Stream& agent, const RodAndBoxConfig& config, const EvalOptions& opts);

/// JSON report at `path` plus a tick-level gaze CSV next to it.
void write_report(const HabituationReport& report, const std::filesystem::path& path);
HabituationReport read_report(const std::filesystem::path& path);
/// CSV path used for a report path.
std::filesystem::path gaze_csv_path(const std::filesystem::path& report_path);

using ScenarioFn = std::function<HabituationReport(net::Stream&, const nlohmann::json& config, const EvalOptions&)>;
/// Scenario id -> runner. "rod_and_box" is built in.
const std::map<std::string, ScenarioFn>& scenario_registry();

}  // namespace sedro::eval
