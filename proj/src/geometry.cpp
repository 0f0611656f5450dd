#include "sedro/geometry.hpp"

#include <algorithm>
#include <limits>

namespace sedro {

namespace {

std::optional<double> ray_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r,
                                 bool want_far = false) {
  const Vec3 oc = o - c;
  const double b = oc.dot(d);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  const double t1 = -b + s;
  if (want_far) return t1 >= 0.0 ? std::optional<double>(t1) : std::nullopt;
  if (t0 >= 0.0) return t0;
  if (t1 >= 0.0) return t1;
  return std::nullopt;
}

Vec3 closest_on_segment(const Vec3& p, double h) {
  return Vec3(0.0, 0.0, std::clamp(p.z(), -h, h));
}

}  // namespace

double Shape::bounding_radius() const {
  switch (kind) {
    case ShapeKind::Sphere:
      return radius;
    case ShapeKind::Capsule:
      return radius + half_length;
    case ShapeKind::Box:
      return half_extents.norm();
  }
  return 0.0;
}

Distance signed_distance(const Shape& shape, const Pose& pose, const Vec3& p) {
  const Vec3 local = pose.to_local(p);
  switch (shape.kind) {
    case ShapeKind::Sphere: {
      const double n = local.norm();
      Vec3 dir = n > 0.0 ? Vec3(local / n) : Vec3::UnitZ();
      if (shape.hollow) return {shape.radius - n, pose.rotate(-dir)};
      return {n - shape.radius, pose.rotate(dir)};
    }
    case ShapeKind::Capsule: {
      const Vec3 diff = local - closest_on_segment(local, shape.half_length);
      const double n = diff.norm();
      Vec3 dir = n > 0.0 ? Vec3(diff / n) : Vec3::UnitX();
      return {n - shape.radius, pose.rotate(dir)};
    }
    case ShapeKind::Box: {
      const Vec3 q = local.cwiseAbs() - shape.half_extents;
      if (q.maxCoeff() > 0.0) {
        const Vec3 outside = q.cwiseMax(0.0);
        Vec3 dir = Vec3::Zero();
        for (int i = 0; i < 3; ++i)
          dir[i] = outside[i] > 0.0 ? std::copysign(outside[i], local[i]) : 0.0;
        const double n = dir.norm();
        return {n, pose.rotate(dir / n)};
      }
      // Inside: push out through the nearest face.
      int axis = 0;
      for (int i = 1; i < 3; ++i)
        if (q[i] > q[axis]) axis = i;
      Vec3 dir = Vec3::Zero();
      dir[axis] = local[axis] >= 0.0 ? 1.0 : -1.0;
      return {q[axis], pose.rotate(dir)};
    }
  }
  return {std::numeric_limits<double>::infinity(), Vec3::UnitZ()};
}

std::optional<RayHit> intersect_ray(const Shape& shape, const Pose& pose, const Vec3& origin,
                                    const Vec3& dir) {
  const Vec3 o = pose.to_local(origin);
  const Vec3 d = pose.inverse_rotate(dir);
  switch (shape.kind) {
    case ShapeKind::Sphere: {
      auto t = ray_sphere(o, d, Vec3::Zero(), shape.radius, shape.hollow);
      if (!t) return std::nullopt;
      Vec3 n = (o + *t * d) / shape.radius;
      if (shape.hollow) n = -n;
      return RayHit{*t, pose.rotate(n)};
    }
    case ShapeKind::Capsule: {
      const double h = shape.half_length;
      const double r = shape.radius;
      std::optional<double> best;
      Vec3 best_n = Vec3::Zero();
      auto consider = [&](double t, const Vec3& n) {
        if (t >= 0.0 && (!best || t < *best)) {
          best = t;
          best_n = n;
        }
      };
      // Cylinder body.
      const double a = d.x() * d.x() + d.y() * d.y();
      if (a > 0.0) {
        const double b = o.x() * d.x() + o.y() * d.y();
        const double c = o.x() * o.x() + o.y() * o.y() - r * r;
        const double disc = b * b - a * c;
        if (disc >= 0.0) {
          const double s = std::sqrt(disc);
          for (double t : {(-b - s) / a, (-b + s) / a}) {
            const Vec3 p = o + t * d;
            if (std::abs(p.z()) <= h) consider(t, Vec3(p.x(), p.y(), 0.0) / r);
          }
        }
      }
      for (double cz : {-h, h}) {
        const Vec3 c(0.0, 0.0, cz);
        if (auto t = ray_sphere(o, d, c, r)) consider(*t, (o + *t * d - c) / r);
      }
      if (!best) return std::nullopt;
      return RayHit{*best, pose.rotate(best_n)};
    }
    case ShapeKind::Box: {
      double tmin = 0.0;
      double tmax = std::numeric_limits<double>::infinity();
      int axis_min = -1;
      int axis_max = -1;
      for (int i = 0; i < 3; ++i) {
        const double e = shape.half_extents[i];
        if (d[i] == 0.0) {
          if (std::abs(o[i]) > e) return std::nullopt;
          continue;
        }
        double t1 = (-e - o[i]) / d[i];
        double t2 = (e - o[i]) / d[i];
        if (t1 > t2) std::swap(t1, t2);
        if (t1 > tmin) {
          tmin = t1;
          axis_min = i;
        }
        if (t2 < tmax) {
          tmax = t2;
          axis_max = i;
        }
        if (tmin > tmax) return std::nullopt;
      }
      // Origin inside the box: report the exit face.
      const bool inside = axis_min < 0;
      const int axis = inside ? axis_max : axis_min;
      if (axis < 0) return std::nullopt;
      const double t = inside ? tmax : tmin;
      Vec3 n = Vec3::Zero();
      n[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
      if (inside) n = -n;
      return RayHit{t, pose.rotate(n)};
    }
  }
  return std::nullopt;
}

}  // namespace sedro
