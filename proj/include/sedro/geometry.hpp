#pragma once

#include <cstdint>
#include <optional>

#include "sedro/math.hpp"

namespace sedro {

enum class ShapeKind : std::uint8_t { Sphere = 0, Capsule = 1, Box = 2 };

/// Primitive in its local frame. Capsules run along local z from
/// -half_length to +half_length; boxes are centered with half_extents.
struct Shape {
  ShapeKind kind = ShapeKind::Sphere;
  double radius = 0.0;
  double half_length = 0.0;
  Vec3 half_extents = Vec3::Zero();
  /// Solid on the outside: contact happens when leaving the interior.
  /// Only meaningful for spheres (padded enclosures).
  bool hollow = false;

  static Shape sphere(double r, bool hollow = false) {
    Shape s;
    s.kind = ShapeKind::Sphere;
    s.radius = r;
    s.hollow = hollow;
    return s;
  }
  static Shape capsule(double r, double half_len) {
    Shape s;
    s.kind = ShapeKind::Capsule;
    s.radius = r;
    s.half_length = half_len;
    return s;
  }
  static Shape box(const Vec3& half) {
    Shape s;
    s.kind = ShapeKind::Box;
    s.half_extents = half;
    return s;
  }

  /// Radius of a sphere around the local origin that contains the solid.
  double bounding_radius() const;
};

struct Distance {
  double value;  ///< signed distance, negative inside the solid
  Vec3 normal;   ///< unit gradient pointing out of the solid
};

/// Signed distance from world point `p` to the shape placed at `pose`.
Distance signed_distance(const Shape& shape, const Pose& pose, const Vec3& p);

struct RayHit {
  double distance;
  Vec3 normal;  ///< faces against the ray direction's half-space it was hit from
};

/// Nearest intersection with t >= 0 along a unit-direction ray.
/// Tangent rays count as hits.
std::optional<RayHit> intersect_ray(const Shape& shape, const Pose& pose, const Vec3& origin,
                                    const Vec3& dir);

}  // namespace sedro
