#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedro/world.hpp"

namespace sedro {

inline constexpr double kFirstAgeDays = -84.0;
inline constexpr double kLastAgeDays = 365.0;

/// Stage descriptor. When returned by stage_at the factors are the
/// interpolated values at the queried age.
struct StageParams {
  std::string stage_id;
  double start_day = 0.0;
  double end_day = 0.0;  ///< exclusive, except for the final stage
  double acuity_factor = 1.0;
  double strength_factor = 1.0;
  std::string scene_id;
  std::vector<std::string> caregiver_routines;  ///< sorted
};

/// One record of the schedule file: factor ramps across the window.
struct StageRecord {
  std::string stage_id;
  double start_day = 0.0;
  double end_day = 0.0;
  double acuity_start = 1.0, acuity_end = 1.0;
  double strength_start = 1.0, strength_end = 1.0;
  std::string scene_id;
  std::vector<std::string> caregiver_routines;
};

class Schedule {
 public:
  /// Validates: windows partition [-84, 365] in order, factors in (0, 1]
  /// and non-decreasing along the timeline.
  static Schedule from_json(const nlohmann::json& doc);
  static Schedule load(const std::filesystem::path& path);

  const std::vector<StageRecord>& stages() const { return stages_; }
  std::size_t index_at(double age_days) const;
  /// Throws ValidationError("age") outside [-84, 365].
  StageParams stage_at(double age_days) const;

 private:
  std::vector<StageRecord> stages_;
};

/// age0 + tick * dt * time_scale / 86400.
double advance_age(double age0_days, std::uint64_t tick, double time_scale);
double advance_age(const WorldState& world, double time_scale);

struct DevEvent {
  std::string kind;  ///< "birth" or "stage_change"
  nlohmann::json body;
};

/// Watches the age cross stage boundaries and day 0. Ages past the last
/// day are clamped to it.
class AgeTracker {
 public:
  AgeTracker(const Schedule& schedule, double age_days);

  /// Events raised by moving to `age_days`.
  std::vector<DevEvent> update(double age_days);
  const StageParams& current() const { return current_; }
  bool born() const { return born_; }

 private:
  const Schedule* schedule_;
  std::size_t index_;
  double age_;
  bool born_;
  StageParams current_;
};

}  // namespace sedro
