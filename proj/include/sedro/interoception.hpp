#pragma once

#include <algorithm>

#include "sedro/world.hpp"

namespace sedro {

/// energy <- clamp(energy - decay_rate * dt + feeds, 0, 1). Feeds are consumed.
inline InteroState update_interoception(InteroState s, double feeds, double dt) {
  s.energy = std::clamp(s.energy - s.decay_rate * dt + feeds, 0.0, 1.0);
  s.pending_feed = 0.0;
  return s;
}

}  // namespace sedro
