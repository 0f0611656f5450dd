#pragma once

#include <utility>
#include <vector>

#include "sedro/caregiver_types.hpp"
#include "sedro/development.hpp"
#include "sedro/world.hpp"

namespace sedro {

/// Edge test for the behavior graph. Self-loops are always allowed.
bool transition_allowed(Behavior from, Behavior to);

/// Returns the utterance at `cursor` and the wrapped next cursor.
/// Throws Error on an empty script.
std::pair<std::vector<std::uint32_t>, std::uint32_t> emit_utterance(const CaregiverScript& script,
                                                                    std::uint32_t cursor);

/// One tick of the caregiver state machine. Routines not listed in the
/// stage are ignored. A state without a script stays Idle and commands nothing.
std::pair<CaregiverState, CaregiverCommand> caregiver_policy(const WorldState& world, CaregiverState state,
                                                             const StageParams& stage, double dt);

/// Centre of the head sphere and the outward face normal, world frame.
std::pair<Vec3, Vec3> head_center_and_face(const WorldState& world);

}  // namespace sedro
