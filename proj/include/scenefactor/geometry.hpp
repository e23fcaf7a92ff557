// Top-down 2D primitives. Vertical planes reduce to oriented lines.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace scenefactor {

using Vec2 = Eigen::Vector2d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vertical plane seen from above: points p on it satisfy normal·p + offset = 0.
/// The normal points toward the side the plane was observed from.
struct Plane2D {
  Vec2 normal{1.0, 0.0};
  double offset = 0.0;
  Vec2 centroid{0.0, 0.0};
  double length = 1.0;

  double signed_distance(const Vec2& p) const { return normal.dot(p) + offset; }

  /// Direction along the segment, normal rotated by -90 degrees.
  Vec2 tangent() const { return {normal.y(), -normal.x()}; }
  Vec2 endpoint0() const { return centroid - 0.5 * length * tangent(); }
  Vec2 endpoint1() const { return centroid + 0.5 * length * tangent(); }

  bool operator==(const Plane2D&) const = default;
};

struct Origin2D {
  Vec2 xy{0.0, 0.0};
  bool operator==(const Origin2D&) const = default;
};

/// Minimal (angle, offset) parametrization; keeps the normal on the unit circle.
struct PlaneParam {
  double theta = 0.0;
  double offset = 0.0;
};

/// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

inline Plane2D plane_from_segment(const Vec2& p0, const Vec2& p1, const Vec2& inward_point) {
  const Vec2 d = p1 - p0;
  const double len = d.norm();
  if (len < 1e-9) throw GeometryError("plane_from_segment: degenerate segment");
  Vec2 n(-d.y() / len, d.x() / len);
  const Vec2 mid = 0.5 * (p0 + p1);
  const double side = n.dot(inward_point - mid);
  if (std::abs(side) < 1e-12) throw GeometryError("plane_from_segment: inward point lies on the segment line");
  if (side < 0.0) n = -n;
  Plane2D out;
  out.normal = n;
  out.centroid = mid;
  out.offset = -n.dot(mid);
  out.length = len;
  return out;
}

/// Rigid rotation of the plane about `pivot`.
inline Plane2D rotate_plane(const Plane2D& plane, const Vec2& pivot, double angle) {
  if (angle == 0.0) return plane;
  Plane2D out = plane;
  out.normal = rotate(plane.normal, angle).normalized();
  out.centroid = pivot + rotate(plane.centroid - pivot, angle);
  out.offset = -out.normal.dot(out.centroid);
  return out;
}

inline Plane2D translate_plane(const Plane2D& plane, const Vec2& t) {
  Plane2D out = plane;
  out.centroid += t;
  out.offset = -out.normal.dot(out.centroid);
  return out;
}

inline PlaneParam plane_to_param(const Plane2D& plane) {
  return {wrap_angle(std::atan2(plane.normal.y(), plane.normal.x())), plane.offset};
}

/// The centroid is projected onto the parametrized line so the result is a valid Plane2D.
inline Plane2D param_to_plane(const PlaneParam& param, const Vec2& centroid, double length) {
  Plane2D out;
  out.normal = Vec2(std::cos(param.theta), std::sin(param.theta));
  out.offset = param.offset;
  out.centroid = centroid - (out.normal.dot(centroid) + param.offset) * out.normal;
  out.length = length;
  return out;
}

/// Area centroid of a simple polygon given as a vertex loop (either winding).
inline Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
  double a2 = 0.0;
  Vec2 acc(0.0, 0.0);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    const double cross = p.x() * q.y() - q.x() * p.y();
    a2 += cross;
    acc += cross * (p + q);
  }
  if (std::abs(a2) < 1e-15) throw GeometryError("polygon_centroid: zero-area polygon");
  return acc / (3.0 * a2);
}

inline double polygon_area(const std::vector<Vec2>& poly) {
  double a2 = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a2 += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a2);
}

/// Even-odd point-in-polygon; points on the boundary count as outside.
inline bool point_strictly_inside(const std::vector<Vec2>& poly, const Vec2& p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    // On-edge check.
    const Vec2 ab = b - a;
    const double cross = ab.x() * (p.y() - a.y()) - ab.y() * (p.x() - a.x());
    if (std::abs(cross) < 1e-12 && (p - a).dot(p - b) <= 0.0) return false;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

}  // namespace scenefactor
