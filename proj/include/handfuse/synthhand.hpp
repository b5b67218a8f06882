#pragma once

// Parametric synthetic hand silhouettes with analytically known landmarks and
// features. The hand frame is y-up with its origin at the nominal wrist
// reference point; a left hand has its thumb towards -x, a right hand is the
// mirror image.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "handfuse/error.hpp"
#include "handfuse/geometry.hpp"
#include "handfuse/image.hpp"
#include "handfuse/types.hpp"

namespace handfuse::synth {

/// One finger: splay from vertical (positive leans towards the thumb side),
/// distance of the fingertip from the frame origin, and widths at the base
/// and at the tip cap.
struct FingerShape {
  double splay_deg = 0.0;
  double tip_distance = 0.0;
  double base_width = 0.0;
  double tip_width = 0.0;
};

inline constexpr std::array<FingerShape, kFingerCount> kDefaultFingers{{
    {55.0, 150.0, 28.0, 22.0},   // thumb
    {15.0, 205.0, 24.0, 19.0},   // index
    {0.0, 225.0, 25.0, 20.0},    // middle
    {-14.0, 210.0, 23.0, 18.0},  // ring
    {-29.0, 180.0, 20.0, 16.0},  // little
}};

/// Placement of the hand frame in the image. Rotation is counter-clockwise as
/// displayed.
struct Pose {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

struct HandParams {
  std::array<FingerShape, kFingerCount> fingers = kDefaultFingers;
  double palm_width = 116.0;
  double palm_height = 70.0;
  double palm_bottom = -10.0;
  double bevel_width = 18.0;   // little-finger side corner cut
  double bevel_height = 30.0;
  double shoulder_height = 64.0;  // top of the palm's thumb-side edge
  double index_knuckle = 105.0;   // palm edge rises to this distance along the index axis
  double knuckle_radius = 60.0;  // pivot of each finger when gaps change
  double finger_base_radius = 30.0;
  double thumb_base_radius = 40.0;
  double fillet_radius = 4.0;
  double wrist_width_fraction = 0.8;
  double wrist_bulge = 3.0;
  /// Splay multiplier per adjacent pair (index/middle, middle/ring,
  /// ring/little). 0 makes the pair parallel and overlapping.
  std::array<double, 3> gap{1.0, 1.0, 1.0};
  bool allow_merge = false;
  HandSide side = HandSide::Left;
  Pose pose;
  double pixel_noise = 0.0;  // gray-level sigma
  int margin = 16;
  std::uint8_t background = 20;
  std::uint8_t foreground = 220;
};

/// Convex hull of a base disk and a tip disk.
struct Capsule {
  PointF c0, c1;
  double r0 = 0.0, r1 = 0.0;
  PointF u;  // unit axis, base to tip
  double len = 0.0;
  double sin_psi = 0.0;
  PointF n_right, n_left;  // outward normals of the straight sides
  double k_right = 0.0, k_left = 0.0;

  static Capsule make(PointF base, double base_r, PointF tip, double tip_r) {
    Capsule c;
    c.c0 = base, c.c1 = tip, c.r0 = base_r, c.r1 = tip_r;
    c.len = distance(base, tip);
    if (!(c.len > std::abs(base_r - tip_r))) fail(Errc::ParamConflict, "finger too short for its taper");
    c.u = (tip - base) / c.len;
    c.sin_psi = (base_r - tip_r) / c.len;
    const double cos_psi = std::sqrt(1.0 - c.sin_psi * c.sin_psi);
    const PointF right{c.u.y, -c.u.x};
    c.n_right = right * cos_psi + c.u * c.sin_psi;
    c.n_left = -right * cos_psi + c.u * c.sin_psi;
    c.k_right = dot(c.n_right, base) + base_r;
    c.k_left = dot(c.n_left, base) + base_r;
    return c;
  }

  PointF normal(bool right) const { return right ? n_right : n_left; }
  double support(bool right) const { return right ? k_right : k_left; }
  PointF base_tangent(bool right) const { return c0 + normal(right) * r0; }
  PointF tip_tangent(bool right) const { return c1 + normal(right) * r1; }

  /// Axial coordinate is on the straight part of the sides.
  bool on_straight(PointF p) const {
    const double s = dot(p - c0, u);
    return s >= r0 * sin_psi - 1e-9 && s <= len + r1 * sin_psi + 1e-9;
  }

  bool contains(PointF p) const {
    if (distance(p, c0) <= r0 || distance(p, c1) <= r1) return true;
    const double s = dot(p - c0, u);
    return s >= r0 * sin_psi && s <= len + r1 * sin_psi && dot(n_right, p) <= k_right && dot(n_left, p) <= k_left;
  }
};

/// Concave rounding between the facing sides of two adjacent fingers.
struct Fillet {
  bool valid = false;
  PointF apex;    // intersection of the two side lines
  PointF center;  // fillet circle centre, inside the gap
  double rho = 0.0;
  PointF na, nb;  // outward normals of the left finger's right side and the right finger's left side
  double ka = 0.0, kb = 0.0;
  PointF ta, tb;  // tangent points
  PointF axis;    // unit bisector pointing into the gap

  bool fills(PointF p) const {
    if (!valid) return false;
    if (dot(na, p) < ka || dot(nb, p) < kb) return false;
    if (dot(axis, p) > dot(axis, ta)) return false;
    return distance(p, center) > rho;
  }
};

inline std::optional<PointF> solve2(PointF n1, double k1, PointF n2, double k2) {
  const double det = n1.x * n2.y - n1.y * n2.x;
  if (std::abs(det) < 1e-12) return std::nullopt;
  return PointF{(k1 * n2.y - n1.y * k2) / det, (n1.x * k2 - k1 * n2.x) / det};
}

inline PointF direction_from_splay(double deg) { return {-std::sin(deg2rad(deg)), std::cos(deg2rad(deg))}; }

/// Rotates unit vector `from` towards unit vector `to` by `radians`.
inline PointF turn_towards(PointF from, PointF to, double radians) {
  PointF w = to - from * dot(from, to);
  const double wn = norm(w);
  if (wn < 1e-15) return from;
  w = w / wn;
  return from * std::cos(radians) + w * std::sin(radians);
}

inline double angle_between(PointF a, PointF b) {
  return std::acos(std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0));
}

class HandModel {
 public:
  explicit HandModel(const HandParams& p) : p_(p) {
    for (const auto& f : p.fingers)
      if (!(f.tip_distance > 0 && f.base_width > 0 && f.tip_width > 0))
        fail(Errc::ParamConflict, "finger dimensions must be positive");
    if (!(p.palm_width > 0 && p.palm_height > 0 && p.fillet_radius > 0 && p.pose.scale > 0))
      fail(Errc::ParamConflict, "palm dimensions and scale must be positive");
    for (double g : p.gap)
      if (g < 0) fail(Errc::ParamConflict, "gap factor must be >= 0");

    const double hw = p.palm_width / 2.0;
    const auto& F = p.fingers;
    const PointF knuckle = direction_from_splay(F[1].splay_deg) * p.index_knuckle;
    palm_ = {PointF{-hw, p.palm_bottom}, PointF{hw, p.palm_bottom}, PointF{hw, p.palm_height - p.bevel_height},
             PointF{hw - p.bevel_width, p.palm_height}, knuckle, PointF{-hw, p.shoulder_height}};
    for (std::size_t i = 0; i < palm_.size(); ++i) {
      const PointF a = palm_[i], b = palm_[(i + 1) % palm_.size()], c = palm_[(i + 2) % palm_.size()];
      if (cross(b - a, c - b) <= 0) fail(Errc::ParamConflict, "palm outline is not convex");
    }

    const PointF ut = direction_from_splay(F[0].splay_deg);
    fingers_[0] = Capsule::make(ut * p.thumb_base_radius, F[0].base_width / 2.0,
                                ut * (F[0].tip_distance - F[0].tip_width / 2.0), F[0].tip_width / 2.0);

    std::array<double, 5> splay{};
    splay[2] = F[2].splay_deg;
    splay[1] = splay[2] + (F[1].splay_deg - F[2].splay_deg) * p.gap[0];
    splay[3] = splay[2] + (F[3].splay_deg - F[2].splay_deg) * p.gap[1];
    splay[4] = splay[3] + (F[4].splay_deg - F[3].splay_deg) * p.gap[2];
    for (std::size_t i = 1; i < kFingerCount; ++i) {
      const PointF pivot = direction_from_splay(F[i].splay_deg) * p.knuckle_radius;
      const PointF u = direction_from_splay(splay[i]);
      fingers_[i] = Capsule::make(pivot + u * (p.finger_base_radius - p.knuckle_radius), F[i].base_width / 2.0,
                                  pivot + u * (F[i].tip_distance - F[i].tip_width / 2.0 - p.knuckle_radius),
                                  F[i].tip_width / 2.0);
    }

    // Thumb valley: the thumb's upper side meets the palm's left edge.
    const Capsule& th = fingers_[0];
    if (std::abs(th.n_right.y) < 1e-9) fail(Errc::ParamConflict, "thumb parallel to palm edge");
    thumb_valley_ = {-hw, (th.k_right + th.n_right.x * hw) / th.n_right.y};
    if (!(thumb_valley_.y > p.palm_bottom && thumb_valley_.y < p.shoulder_height) || !th.on_straight(thumb_valley_))
      fail(Errc::ParamConflict, "thumb does not meet the palm edge on its straight side");

    for (std::size_t k = 0; k < 3; ++k) {
      fillets_[k] = make_fillet(fingers_[k + 1], fingers_[k + 2]);
      if (!fillets_[k].valid && !p.allow_merge)
        fail(Errc::ParamConflict, "fingers " + std::to_string(k + 1) + " and " + std::to_string(k + 2) +
                                      " overlap without a valley (set allow_merge for touching fingers)");
    }

    double top = -1e300;
    for (const auto& c : fingers_) top = std::max({top, c.c0.y + c.r0, c.c1.y + c.r1});
    wrist_bottom_ = -0.25 * top;
  }

  const HandParams& params() const { return p_; }
  HandSide side() const { return p_.side; }
  const Capsule& finger(Finger f) const { return fingers_[static_cast<std::size_t>(f)]; }
  const Fillet& fillet(std::size_t k) const { return fillets_[k]; }
  bool merged() const {
    return std::any_of(fillets_.begin(), fillets_.end(), [](const Fillet& f) { return !f.valid; });
  }

  /// Membership in the hand frame of this model's side.
  bool inside(PointF p) const { return inside_left(to_left(p)); }

  /// Points whose extremes bound the silhouette in any direction (hand frame).
  std::vector<std::pair<PointF, double>> extent_discs() const {
    std::vector<std::pair<PointF, double>> out;
    for (const auto& c : fingers_) {
      out.push_back({from_left(c.c0), c.r0});
      out.push_back({from_left(c.c1), c.r1});
    }
    for (PointF v : palm_) out.push_back({from_left(v), 0.0});
    const double hw = p_.wrist_width_fraction * p_.palm_width / 2.0;
    for (int i = 0; i <= 64; ++i) {
      const double y = wrist_bottom_ + (0.0 - wrist_bottom_) * i / 64.0;
      const double x = wrist_half_width(y, hw);
      out.push_back({from_left({-x, y}), 0.0});
      out.push_back({from_left({x, y}), 0.0});
    }
    return out;
  }

  /// Ground-truth landmarks in the hand frame, given R in the same frame.
  LandmarkSet landmarks(PointF R_frame) const {
    const PointF R = to_left(R_frame);
    LandmarkSet s;
    s.side = p_.side;
    s.R = R;
    auto tip = [&](const Capsule& c) { return c.c1 + normalized(c.c1 - R) * c.r1; };
    s.B = tip(fingers_[0]);
    s.E = tip(fingers_[1]);
    s.G = tip(fingers_[2]);
    s.I = tip(fingers_[3]);
    s.K = tip(fingers_[4]);
    s.C = thumb_valley_;
    s.F = valley_point(fillets_[0], R);
    s.H = valley_point(fillets_[1], R);
    s.J = valley_point(fillets_[2], R);
    // Second valleys: equal contour arc length on the far side of each tip.
    const Capsule& th = fingers_[0];
    s.A = walk_other_side(th, s.B, /*valley_right=*/true, arc_on_cap(th, s.B, true) + distance(th.tip_tangent(true), s.C));
    s.D = walk_other_side(fingers_[1], s.E, true, arc_to_fillet_valley(fingers_[1], s.E, true, fillets_[0], s.F));
    s.L = walk_other_side(fingers_[4], s.K, false, arc_to_fillet_valley(fingers_[4], s.K, false, fillets_[2], s.J));
    for (std::size_t i = 0; i < LandmarkSet::kCount; ++i) s[i] = from_left(s[i]);
    return s;
  }

  /// Ground-truth features measured on the exact shape (hand-frame units).
  FeatureVector features(const LandmarkSet& lm) const {
    FeatureVector v;
    v.side = lm.side;
    for (std::size_t f = 0; f < kFingerCount; ++f) {
      const auto fi = static_cast<Finger>(f);
      const PointF tip = lm.tip(fi), base = lm.base_mid(fi);
      const double length = distance(tip, base);
      const PointF a = normalized(tip - base);
      const PointF n = perp(a);
      v[feature_index::length(fi)] = length;
      for (std::size_t k = 0; k < 2; ++k) {
        const PointF c = base + a * (length * static_cast<double>(k + 1) / 3.0);
        v[feature_index::width(fi, k)] = exit_distance(c, n) + exit_distance(c, -n);
      }
      const auto bl = lm.baseline(fi);
      v[feature_index::width(fi, 2)] = distance(bl[0], bl[1]);
    }
    const PointF g = normalized(lm.G - lm.R);
    PointF n{g.y, -g.x};
    if (dot(n, lm.K - lm.C) < 0) n = -n;
    const PointF S = lm.C + n * exit_distance(lm.C + n * 1e-3, n, /*inside_required=*/true) + n * 1e-3;
    const PointF M = midpoint(lm.C, S);
    v[feature_index::palm_width] = distance(lm.C, S);
    for (std::size_t f = 0; f < kFingerCount; ++f)
      v[feature_index::center_distance(static_cast<Finger>(f))] = distance(M, lm.base_mid(static_cast<Finger>(f)));
    return v;
  }

  /// Distance from `from` along unit `dir` to the first boundary crossing.
  double exit_distance(PointF from, PointF dir, bool inside_required = true) const {
    if (inside_required && !inside(from)) fail(Errc::FeatureFailure, "chord start lies outside the hand");
    const double step = 0.25;
    double t = 0.0;
    while (inside(from + dir * (t + step))) {
      t += step;
      if (t > 4000.0) fail(Errc::FeatureFailure, "chord never leaves the hand");
    }
    double lo = t, hi = t + step;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (inside(from + dir * mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  PointF to_left(PointF p) const { return p_.side == HandSide::Left ? p : PointF{-p.x, p.y}; }
  PointF from_left(PointF p) const { return to_left(p); }

  double wrist_half_width(double y, double hw) const {
    return hw + p_.wrist_bulge * std::sin(std::numbers::pi * (y - wrist_bottom_) / (0.0 - wrist_bottom_));
  }

  bool inside_palm(PointF p) const {
    for (std::size_t i = 0; i < palm_.size(); ++i)
      if (cross(palm_[(i + 1) % palm_.size()] - palm_[i], p - palm_[i]) < 0) return false;
    return true;
  }

  bool inside_left(PointF p) const {
    if (inside_palm(p)) return true;
    if (p.y >= wrist_bottom_ && p.y <= 0.0 &&
        std::abs(p.x) <= wrist_half_width(p.y, p_.wrist_width_fraction * p_.palm_width / 2.0))
      return true;
    for (const auto& c : fingers_)
      if (c.contains(p)) return true;
    for (const auto& f : fillets_)
      if (f.fills(p)) return true;
    return false;
  }

  Fillet make_fillet(const Capsule& a, const Capsule& b) const {
    Fillet f;
    f.rho = p_.fillet_radius;
    f.na = a.n_right, f.ka = a.k_right;
    f.nb = b.n_left, f.kb = b.k_left;
    const auto apex = solve2(f.na, f.ka, f.nb, f.kb);
    const auto center = solve2(f.na, f.ka + f.rho, f.nb, f.kb + f.rho);
    if (!apex || !center) return f;
    f.apex = *apex;
    f.center = *center;
    f.axis = normalized(f.center - f.apex);
    f.ta = f.center - f.na * f.rho;
    f.tb = f.center - f.nb * f.rho;
    const PointF up = normalized(a.u + b.u);
    const PointF bottom = f.center - f.axis * f.rho;
    f.valid = dot(f.axis, up) > 0 && a.on_straight(f.ta) && b.on_straight(f.tb) && !inside_palm(f.ta) &&
              !inside_palm(f.tb) && !inside_palm(bottom);
    return f;
  }

  /// Point of the fillet arc nearest to R (the arc spans the directions
  /// between -na and -nb through -axis).
  static PointF valley_point(const Fillet& f, PointF R) {
    if (!f.valid) return f.center;
    const PointF d = normalized(R - f.center);
    const double span = angle_between(-f.na, -f.axis);
    if (angle_between(d, -f.axis) <= span) return f.center + d * f.rho;
    return distance(f.ta, R) < distance(f.tb, R) ? f.ta : f.tb;
  }

  static double arc_on_cap(const Capsule& c, PointF tip, bool right) {
    return c.r1 * angle_between(tip - c.c1, c.normal(right));
  }

  static double arc_to_fillet_valley(const Capsule& c, PointF tip, bool right, const Fillet& f, PointF valley) {
    const PointF t = right ? f.ta : f.tb;
    return arc_on_cap(c, tip, right) + distance(c.tip_tangent(right), t) +
           f.rho * angle_between(t - f.center, valley - f.center);
  }

  PointF walk_other_side(const Capsule& c, PointF tip, bool valley_right, double length) const {
    const bool side = !valley_right;
    const double cap = arc_on_cap(c, tip, side);
    PointF p;
    if (length <= cap) {
      p = c.c1 + turn_towards(normalized(tip - c.c1), c.normal(side), length / c.r1) * c.r1;
    } else {
      const PointF t1 = c.tip_tangent(side);
      p = t1 + normalized(c.base_tangent(side) - t1) * (length - cap);
      const PointF n = c.normal(side);
      if (!inside_left(p - n * 0.3) || inside_left(p + n * 0.3))
        fail(Errc::ParamConflict, "second valley walk leaves the exposed finger side");
    }
    return p;
  }

  HandParams p_;
  std::array<PointF, 6> palm_{};
  std::array<Capsule, kFingerCount> fingers_{};
  std::array<Fillet, 3> fillets_{};
  PointF thumb_valley_;
  double wrist_bottom_ = 0.0;
};

/// Hand frame (y-up) to image pixels (y-down) for a pose, before canvas offset.
inline Affine pose_transform(const Pose& pose) {
  const Affine flip{{pose.scale, 0, 0, 0, -pose.scale, 0}};
  return Affine::rotation(-deg2rad(pose.rotation_deg), {0, 0}).after(flip);
}

/// The image row and columns the wrist trim rule selects when the silhouette
/// is viewed through `frame_to_target` (a y-down pixel frame), expressed as R
/// in the hand frame.
inline PointF reference_point(const HandModel& model, const Affine& frame_to_target, double fraction = 0.20) {
  double top = 1e300, bottom = -1e300, left = 1e300, right = -1e300;
  const double s = frame_to_target.scale();
  for (const auto& [c, r] : model.extent_discs()) {
    const PointF q = frame_to_target(c);
    top = std::min(top, q.y - r * s), bottom = std::max(bottom, q.y + r * s);
    left = std::min(left, q.x - r * s), right = std::max(right, q.x + r * s);
  }
  const int top_row = static_cast<int>(std::ceil(top));
  const int bottom_row = static_cast<int>(std::floor(bottom));
  const int h = static_cast<int>(std::lround(fraction * (bottom_row - top_row + 1)));
  const double row = bottom_row - h;

  const Affine back = frame_to_target.inverse();
  auto in = [&](double x) { return model.inside(back(PointF{x, row})); };
  auto crossing = [&](double from, double step) {
    double x = from;
    while (!in(x + step)) {
      x += step;
      if ((step > 0 && x > right + 1) || (step < 0 && x < left - 1)) fail(Errc::WristNotFound, "oracle row empty");
    }
    double out = x, inn = x + step;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (out + inn);
      (in(mid) ? inn : out) = mid;
    }
    return 0.5 * (out + inn);
  };
  const double xl = crossing(std::floor(left) - 1.0, 0.25);
  const double xr = crossing(std::ceil(right) + 1.0, -0.25);
  const double R_x = (std::ceil(xl) + std::floor(xr)) / 2.0;
  return back(PointF{R_x, row});
}

/// Landmarks as the pipeline should find them in a target pixel frame.
inline LandmarkSet ground_truth_in_frame(const HandModel& model, const Affine& frame_to_target) {
  LandmarkSet lm = model.landmarks(reference_point(model, frame_to_target));
  for (std::size_t i = 0; i < LandmarkSet::kCount; ++i) lm[i] = frame_to_target(lm[i]);
  return lm;
}

struct Rendering {
  GrayImage image;
  Affine frame_to_image;
};

/// Antialiased rendering: pixels whose corners disagree are supersampled 8x8.
inline Rendering render(const HandModel& model, std::uint64_t seed = 0) {
  const HandParams& p = model.params();
  const Affine base = pose_transform(p.pose);
  double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
  for (const auto& [c, r] : model.extent_discs()) {
    const PointF q = base(c);
    const double rr = r * p.pose.scale;
    minx = std::min(minx, q.x - rr), miny = std::min(miny, q.y - rr);
    maxx = std::max(maxx, q.x + rr), maxy = std::max(maxy, q.y + rr);
  }
  const double ox = p.margin - std::floor(minx) + std::max(0.0, p.pose.tx);
  const double oy = p.margin - std::floor(miny) + std::max(0.0, p.pose.ty);
  const int w = static_cast<int>(std::ceil(maxx + ox)) + p.margin + 1;
  const int h = static_cast<int>(std::ceil(maxy + oy)) + p.margin + 1;

  Rendering out{GrayImage(w, h), Affine::translation(ox, oy).after(base)};
  const Affine back = out.frame_to_image.inverse();

  // Corner lattice: corner (i, j) sits at pixel coordinates (i - 0.5, j - 0.5).
  std::vector<std::uint8_t> corner(static_cast<std::size_t>((w + 1) * (h + 1)));
  for (int j = 0; j <= h; ++j)
    for (int i = 0; i <= w; ++i)
      corner[static_cast<std::size_t>(j * (w + 1) + i)] = model.inside(back(PointF{i - 0.5, j - 0.5}));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  constexpr int kSuper = 8;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto at = [&](int i, int j) { return corner[static_cast<std::size_t>(j * (w + 1) + i)]; };
      const int sum = at(x, y) + at(x + 1, y) + at(x, y + 1) + at(x + 1, y + 1);
      double cov = sum / 4.0;
      if (sum != 0 && sum != 4) {
        int hits = 0;
        for (int j = 0; j < kSuper; ++j)
          for (int i = 0; i < kSuper; ++i)
            hits += model.inside(back(PointF{x - 0.5 + (i + 0.5) / kSuper, y - 0.5 + (j + 0.5) / kSuper}));
        cov = hits / static_cast<double>(kSuper * kSuper);
      }
      double v = p.background + (p.foreground - p.background) * cov;
      if (p.pixel_noise > 0) v += p.pixel_noise * noise(rng);
      out.image(x, y) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
    }
  return out;
}

/// A rendered hand with its ground truth: landmarks in image pixels (R from
/// the trim rule applied in the hand's own upright frame) and features in
/// image pixel units.
/// A rendered hand. Ground truth is absent for merged hands, whose valleys
/// are undefined.
struct Sample {
  GrayImage image;
  Affine frame_to_image;
  std::optional<LandmarkSet> truth;
  std::optional<FeatureVector> features;
};

inline Sample generate(const HandParams& params, std::uint64_t seed = 0) {
  const HandModel model(params);
  Rendering r = render(model, seed);
  Sample out{std::move(r.image), r.frame_to_image, std::nullopt, std::nullopt};
  if (model.merged()) return out;
  const double s = params.pose.scale;
  const Affine upright{{s, 0, 0, 0, -s, 0}};
  LandmarkSet lm = model.landmarks(reference_point(model, upright));
  FeatureVector fv = model.features(lm);
  for (double& v : fv.values) v *= s;
  for (std::size_t i = 0; i < LandmarkSet::kCount; ++i) lm[i] = r.frame_to_image(lm[i]);
  out.truth = lm;
  out.features = fv;
  return out;
}

// Population model. Inter-class variation is a global size factor plus
// per-parameter relative spreads; intra-class jitter is expressed in units of
// those spreads, so sigma is comparable to a z-score.

struct PopulationOptions {
  int users = 10;
  int samples = 3;
  double intra_sigma = 0.05;
  std::uint64_t seed = 1;
  double max_rotation_deg = 15.0;
  double max_shift = 12.0;
  double asymmetry = 0.01;
  double pixel_noise = 0.0;
};

struct SubjectSample {
  int user = 0;
  int sample = 0;
  HandParams left;
  HandParams right;
};

namespace detail {

struct Spread {
  double scale = 0.07;
  double length = 0.02;
  double width = 0.06;
  double palm_width = 0.05;
  double palm_height = 0.05;
  double splay_deg = 1.5;
};

/// Multiplies every shape parameter by 1 + amount * spread * N(0, 1).
inline void perturb(HandParams& p, double amount, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const Spread sp;
  const double g = 1.0 + amount * sp.scale * z(rng);
  for (auto& f : p.fingers) {
    f.tip_distance *= g * (1.0 + amount * sp.length * z(rng));
    const double w = g * (1.0 + amount * sp.width * z(rng));
    f.base_width *= w;
    f.tip_width *= w;
    f.splay_deg += amount * sp.splay_deg * z(rng);
  }
  p.palm_width *= g * (1.0 + amount * sp.palm_width * z(rng));
  p.palm_height *= g * (1.0 + amount * sp.palm_height * z(rng));
  p.knuckle_radius *= g;
  p.finger_base_radius *= g;
  p.thumb_base_radius *= g;
  p.bevel_width *= g;
  p.bevel_height *= g;
  p.palm_bottom *= g;
}

/// True when the outline climbs away from R on both sides of the corner at
/// `c`: each crossing of the circle of radius `reach` around it lies at least
/// `reach * min_slope` farther from R.
inline bool sharp_corner(const HandModel& m, PointF c, PointF R, double reach = 8.0, double min_slope = 0.25) {
  const int steps = 720;
  auto at = [&](int k) { return c + PointF{std::cos(2 * std::numbers::pi * k / steps), std::sin(2 * std::numbers::pi * k / steps)} * reach; };
  int crossings = 0;
  bool prev = m.inside(at(0));
  for (int k = 1; k <= steps; ++k) {
    const bool cur = m.inside(at(k));
    if (cur != prev) {
      ++crossings;
      if (distance(at(k), R) - distance(c, R) < reach * min_slope) return false;
    }
    prev = cur;
  }
  return crossings == 2;
}

/// Buildable shapes with the usual anatomy: the middle tip reaches farthest
/// from R, the outer valleys (thumb/index, ring/little) sit deeper than their
/// inner neighbours and the thumb valley is a distinct radial minimum.
inline bool valid_params(const HandParams& p, double margin = 4.0) {
  try {
    const HandModel m(p);
    const PointF R = reference_point(m, Affine{{1, 0, 0, 0, -1, 0}});  // any y-down frame
    const LandmarkSet lm = m.landmarks(R);
    const auto r = [&](PointF q) { return distance(q, lm.R); };
    return r(lm.G) > std::max(r(lm.E), r(lm.I)) + margin && r(lm.C) + margin < r(lm.F) &&
           r(lm.J) + margin < r(lm.H) && sharp_corner(m, lm.C, lm.R);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace detail

inline std::vector<SubjectSample> generate_population(const PopulationOptions& opt) {
  if (opt.users < 1 || opt.samples < 1) fail(Errc::InvalidInput, "population needs at least one user and sample");
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<SubjectSample> out;
  for (int u = 0; u < opt.users; ++u) {
    HandParams base;
    do {
      base = HandParams{};
      detail::perturb(base, 1.0, rng);
    } while (!detail::valid_params(base));

    HandParams other = base;  // the second hand: same person, slight asymmetry
    for (auto& f : other.fingers) {
      f.tip_distance *= 1.0 + opt.asymmetry * z(rng);
      const double w = 1.0 + opt.asymmetry * z(rng);
      f.base_width *= w;
      f.tip_width *= w;
    }
    other.palm_width *= 1.0 + opt.asymmetry * z(rng);
    if (!detail::valid_params(other)) other = base;

    for (int s = 0; s < opt.samples; ++s) {
      SubjectSample smp{u, s, base, other};
      smp.left.side = HandSide::Left;
      smp.right.side = HandSide::Right;
      for (HandParams* hp : {&smp.left, &smp.right}) {
        HandParams jittered = *hp;
        for (int attempt = 0; attempt < 16; ++attempt) {
          jittered = *hp;
          detail::perturb(jittered, opt.intra_sigma, rng);
          if (detail::valid_params(jittered)) break;
          jittered = *hp;
        }
        jittered.pose.rotation_deg = opt.max_rotation_deg * (2.0 * uni(rng) - 1.0);
        jittered.pose.tx = opt.max_shift * uni(rng);
        jittered.pose.ty = opt.max_shift * uni(rng);
        jittered.pixel_noise = opt.pixel_noise;
        *hp = jittered;
      }
      out.push_back(smp);
    }
  }
  return out;
}

}  // namespace handfuse::synth
