#include "sedro/development.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sedro/error.hpp"

namespace sedro {

namespace {

double clamp_age(double age) { return std::min(std::max(age, kFirstAgeDays), kLastAgeDays); }

void check_factor(double v, const std::string& field) {
  if (!(v > 0.0 && v <= 1.0)) throw ValidationError(field, "must lie in (0, 1]");
}

std::pair<double, double> ramp(const nlohmann::json& s, const char* key, const std::string& where) {
  if (!s.contains(key)) throw ValidationError(where + "." + key, "missing");
  const auto& v = s[key];
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ValidationError(where + "." + key, "expected [start, end]");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

Schedule Schedule::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("stages") || !doc["stages"].is_array())
    throw ValidationError("stages", "expected a list of stage records");
  Schedule out;
  const auto& list = doc["stages"];
  if (list.empty()) throw ValidationError("stages", "empty schedule");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& s = list[i];
    const std::string where = "stages[" + std::to_string(i) + "]";
    StageRecord r;
    try {
      r.stage_id = s.at("id").get<std::string>();
      const auto& w = s.at("window");
      if (!w.is_array() || w.size() != 2) throw ValidationError(where + ".window", "expected [start, end]");
      r.start_day = w[0].get<double>();
      r.end_day = w[1].get<double>();
      r.scene_id = s.at("scene").get<std::string>();
      if (s.contains("routines")) r.caregiver_routines = s["routines"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where, e.what());
    }
    std::tie(r.acuity_start, r.acuity_end) = ramp(s, "acuity", where);
    std::tie(r.strength_start, r.strength_end) = ramp(s, "strength", where);
    std::sort(r.caregiver_routines.begin(), r.caregiver_routines.end());
    check_factor(r.acuity_start, where + ".acuity");
    check_factor(r.acuity_end, where + ".acuity");
    check_factor(r.strength_start, where + ".strength");
    check_factor(r.strength_end, where + ".strength");
    if (!(r.end_day > r.start_day)) throw ValidationError(where + ".window", "end must exceed start");
    if (r.acuity_end < r.acuity_start || r.strength_end < r.strength_start)
      throw ValidationError(where, "factors must not decrease within a stage");
    if (i == 0) {
      if (r.start_day != kFirstAgeDays) throw ValidationError(where + ".window", "first stage must start at -84");
    } else {
      const auto& prev = out.stages_.back();
      if (r.start_day != prev.end_day) throw ValidationError(where + ".window", "gap or overlap with previous stage");
      if (r.acuity_start < prev.acuity_end || r.strength_start < prev.strength_end)
        throw ValidationError(where, "factors must not decrease across stages");
    }
    out.stages_.push_back(std::move(r));
  }
  if (out.stages_.back().end_day != kLastAgeDays)
    throw ValidationError("stages[" + std::to_string(list.size() - 1) + "].window", "last stage must end at 365");
  return out;
}

Schedule Schedule::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("schedule", "file not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("schedule", path.string() + ": " + e.what());
  }
  return from_json(doc);
}

std::size_t Schedule::index_at(double age) const {
  if (!(age >= kFirstAgeDays && age <= kLastAgeDays))
    throw ValidationError("age", "age " + std::to_string(age) + " outside [-84, 365]");
  for (std::size_t i = 0; i < stages_.size(); ++i)
    if (age < stages_[i].end_day) return i;
  return stages_.size() - 1;
}

StageParams Schedule::stage_at(double age) const {
  const auto& r = stages_[index_at(age)];
  const double f = (age - r.start_day) / (r.end_day - r.start_day);
  StageParams p;
  p.stage_id = r.stage_id;
  p.start_day = r.start_day;
  p.end_day = r.end_day;
  p.acuity_factor = r.acuity_start + f * (r.acuity_end - r.acuity_start);
  p.strength_factor = r.strength_start + f * (r.strength_end - r.strength_start);
  p.scene_id = r.scene_id;
  p.caregiver_routines = r.caregiver_routines;
  return p;
}

double advance_age(double age0, std::uint64_t tick, double time_scale) {
  return age0 + static_cast<double>(tick) * time_scale / (static_cast<double>(kTicksPerSecond) * 86400.0);
}

double advance_age(const WorldState& w, double time_scale) {
  return advance_age(w.start_age_days, w.tick, time_scale);
}

AgeTracker::AgeTracker(const Schedule& schedule, double age)
    : schedule_(&schedule),
      index_(schedule.index_at(clamp_age(age))),
      age_(clamp_age(age)),
      born_(age >= 0.0),
      current_(schedule.stage_at(age_)) {}

std::vector<DevEvent> AgeTracker::update(double age) {
  std::vector<DevEvent> out;
  age_ = clamp_age(age);
  if (!born_ && age >= 0.0) {
    born_ = true;
    out.push_back({"birth", {{"age_days", age}}});
  }
  const std::size_t idx = schedule_->index_at(age_);
  current_ = schedule_->stage_at(age_);
  if (idx != index_) {
    index_ = idx;
    out.push_back({"stage_change",
                   {{"stage", current_.stage_id}, {"scene", current_.scene_id}, {"age_days", age}}});
  }
  return out;
}

}  // namespace sedro
