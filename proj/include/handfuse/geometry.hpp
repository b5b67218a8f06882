#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace handfuse {

/// Integer pixel coordinate: x = column (right), y = row (down).
struct Point {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(Point, Point) = default;
};

/// Real-valued coordinate in the same image convention as Point.
struct PointF {
  double x = 0.0;
  double y = 0.0;

  constexpr PointF() = default;
  constexpr PointF(double x_, double y_) : x(x_), y(y_) {}
  constexpr PointF(Point p) : x(p.x), y(p.y) {}

  constexpr PointF operator+(PointF o) const { return {x + o.x, y + o.y}; }
  constexpr PointF operator-(PointF o) const { return {x - o.x, y - o.y}; }
  constexpr PointF operator*(double s) const { return {x * s, y * s}; }
  constexpr PointF operator/(double s) const { return {x / s, y / s}; }
  constexpr PointF operator-() const { return {-x, -y}; }
  PointF& operator+=(PointF o) { x += o.x; y += o.y; return *this; }

  friend constexpr bool operator==(PointF, PointF) = default;
};

constexpr PointF operator*(double s, PointF p) { return p * s; }

constexpr double dot(PointF a, PointF b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(PointF a, PointF b) { return a.x * b.y - a.y * b.x; }
inline double norm(PointF a) { return std::hypot(a.x, a.y); }
inline double distance(PointF a, PointF b) { return norm(a - b); }
inline PointF normalized(PointF a) { return a / norm(a); }
constexpr PointF midpoint(PointF a, PointF b) { return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0}; }
/// Rotates by +90 degrees in a y-up frame.
constexpr PointF perp(PointF a) { return {-a.y, a.x}; }

inline PointF rotated(PointF a, double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Maps an angle in degrees into [0, 360).
inline double wrap360(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

/// 2x3 affine map p' = A p + t.
struct Affine {
  std::array<double, 6> m{1, 0, 0, 0, 1, 0};

  static Affine identity() { return {}; }
  static Affine translation(double tx, double ty) { return {{1, 0, tx, 0, 1, ty}}; }
  static Affine scaling(double s) { return {{s, 0, 0, 0, s, 0}}; }
  /// Rotation by `radians` about `center`, in the array-index frame (x right, y down).
  static Affine rotation(double radians, PointF center) {
    const double c = std::cos(radians), s = std::sin(radians);
    return {{c, -s, center.x - c * center.x + s * center.y,
             s, c, center.y - s * center.x - c * center.y}};
  }

  PointF operator()(PointF p) const {
    return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
  }

  /// (*this)(other(p)).
  Affine after(const Affine& o) const {
    const auto& a = m;
    const auto& b = o.m;
    return {{a[0] * b[0] + a[1] * b[3], a[0] * b[1] + a[1] * b[4], a[0] * b[2] + a[1] * b[5] + a[2],
             a[3] * b[0] + a[4] * b[3], a[3] * b[1] + a[4] * b[4], a[3] * b[2] + a[4] * b[5] + a[5]}};
  }

  Affine inverse() const {
    const double det = m[0] * m[4] - m[1] * m[3];
    const double i0 = m[4] / det, i1 = -m[1] / det, i3 = -m[3] / det, i4 = m[0] / det;
    return {{i0, i1, -(i0 * m[2] + i1 * m[5]), i3, i4, -(i3 * m[2] + i4 * m[5])}};
  }

  double scale() const { return std::sqrt(std::abs(m[0] * m[4] - m[1] * m[3])); }
};

}  // namespace handfuse
