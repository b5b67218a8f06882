#pragma once

// Fingertip and valley landmarks located by alternating radial extrema around
// the reference point R inside angular windows, with subpixel refinement on
// the coverage map.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "handfuse/error.hpp"
#include "handfuse/geometry.hpp"
#include "handfuse/image.hpp"
#include "handfuse/imaging.hpp"
#include "handfuse/types.hpp"

namespace handfuse {

/// Angle of the ray p1 -> p2 in degrees, counter-clockwise from +x with y
/// pointing up, in [0, 360). Inputs are image coordinates (y down).
inline double angle_ccw(PointF p1, PointF p2) {
  if (p1 == p2) fail(Errc::InvalidInput, "angle of coincident points");
  return wrap360(rad2deg(std::atan2(-(p2.y - p1.y), p2.x - p1.x)));
}

struct AngleWindow {
  double lo = 0.0;
  double hi = 0.0;

  static AngleWindow spanning(double a, double b) { return {std::min(a, b), std::max(a, b)}; }
  bool contains(double deg) const { return deg >= lo && deg <= hi; }
};

struct LandmarkOptions {
  double alpha_deg = 5.0;
  double depth_fraction = 0.15;     // minimum valley depth relative to the shorter finger
  double min_tip_separation = 3.0;  // pixels
  double tip_band = 1.0;            // radial band for the partial-tip correction
  bool refine = true;
};

/// Contour points with their polar coordinates about R.
class RadialContour {
 public:
  RadialContour(const HandContour& contour, PointF R) : c_(contour), R_(R) {
    if (contour.size() == 0) fail(Errc::EmptyMask, "empty contour");
    r_.resize(contour.size());
    theta_.resize(contour.size());
    for (std::size_t i = 0; i < contour.size(); ++i) {
      const PointF p = contour[i];
      r_[i] = distance(p, R);
      theta_[i] = p == R ? 0.0 : angle_ccw(R, p);
    }
    anchor_ = static_cast<std::size_t>(std::min_element(r_.begin(), r_.end()) - r_.begin());
  }

  std::size_t size() const { return r_.size(); }
  const HandContour& contour() const { return c_; }
  PointF R() const { return R_; }
  PointF point(std::size_t i) const { return c_[i]; }
  double r(std::size_t i) const { return r_[i]; }
  double theta(std::size_t i) const { return theta_[i]; }
  /// Contour index nearest to R; arcs between landmarks never pass it.
  std::size_t anchor() const { return anchor_; }

  std::size_t wrap(long i) const {
    const long n = static_cast<long>(size());
    return static_cast<std::size_t>(((i % n) + n) % n);
  }

  /// Indices from a to b (inclusive) along the side of the loop that avoids the anchor.
  std::vector<std::size_t> arc(std::size_t a, std::size_t b) const {
    const std::size_t n = size();
    const std::size_t fwd = (b + n - a) % n;
    const std::size_t to_anchor = (anchor_ + n - a) % n;
    const int dir = (to_anchor > 0 && to_anchor < fwd) ? -1 : 1;
    std::vector<std::size_t> out;
    for (std::size_t i = a;; i = wrap(static_cast<long>(i) + dir)) {
      out.push_back(i);
      if (i == b) break;
    }
    return out;
  }

  /// Extreme radius among `candidates` within `w`; ties go to the smallest index.
  std::optional<std::size_t> extreme(const std::vector<std::size_t>& candidates, AngleWindow w, bool maximum) const {
    std::optional<std::size_t> best;
    for (std::size_t i : candidates) {
      if (!w.contains(theta_[i])) continue;
      if (!best) {
        best = i;
        continue;
      }
      const double v = r_[i], b = r_[*best];
      if ((maximum ? v > b : v < b) || (v == b && i < *best)) best = i;
    }
    return best;
  }

  std::vector<std::size_t> all() const {
    std::vector<std::size_t> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = i;
    return out;
  }

 private:
  const HandContour& c_;
  PointF R_;
  std::vector<double> r_, theta_;
  std::size_t anchor_ = 0;
};

/// Middle of the fingertip's end run: among the contour points around `idx`
/// (the neighbourhood where the radius stays within band + 1 px of the
/// candidate), the span of points within `band` of the candidate radius.
/// On a flat or truncated tip this is the middle of the end run rather than
/// one of its corners.
inline std::size_t fix_partial_tip(const RadialContour& rc, std::size_t idx, double band = 1.0) {
  const double rc0 = rc.r(idx);
  const long n = static_cast<long>(rc.size());
  const auto r_at = [&](long k) { return rc.r(rc.wrap(static_cast<long>(idx) + k)); };
  long lo = 0, hi = 0;
  while (lo > -n && r_at(lo - 1) >= rc0 - band - 1.0) --lo;
  while (hi < n && r_at(hi + 1) >= rc0 - band - 1.0) ++hi;
  if (hi - lo + 1 >= n) return idx;
  while (r_at(lo) < rc0 - band) ++lo;
  while (r_at(hi) < rc0 - band) --hi;
  return rc.wrap(static_cast<long>(idx) + static_cast<long>(std::floor((lo + hi) / 2.0)));
}

inline std::size_t locate_middle_tip(const RadialContour& rc, double band = 1.0) {
  const auto best = rc.extreme(rc.all(), {0.0, 360.0}, true);
  return fix_partial_tip(rc, *best, band);
}

/// Thumb tip: farthest point from R inside the angle spanned by the extreme
/// thumb-side contour point X and the far end Y of X's horizontal run.
inline std::size_t locate_side_tip(const RadialContour& rc, const BinaryImage& mask, bool thumb_side, double band = 1.0) {
  std::size_t xi = 0;
  for (std::size_t i = 1; i < rc.size(); ++i) {
    const int x = rc.point(i).x, bx = rc.point(xi).x;
    if (thumb_side ? x < bx : x > bx) xi = i;
  }
  const Point X = rc.contour()[xi];
  const int step = thumb_side ? 1 : -1;
  Point Y = X;
  while (mask.get(Y.x + step, Y.y)) Y.x += step;
  if (Y == X) fail(Errc::LandmarkFailure, "no horizontal intersection from the extreme side point");
  const auto w = AngleWindow::spanning(angle_ccw(rc.R(), PointF(X)), angle_ccw(rc.R(), PointF(Y)));
  const auto best = rc.extreme(rc.all(), w, true);
  if (!best) fail(Errc::LandmarkFailure, "empty side-tip window");
  return fix_partial_tip(rc, *best, band);
}

inline std::size_t locate_thumb_tip(const RadialContour& rc, const BinaryImage& mask, double band = 1.0) {
  return locate_side_tip(rc, mask, true, band);
}

/// Contour indices of the landmarks found by radial search.
struct LandmarkIndices {
  std::size_t B = 0, C = 0, E = 0, F = 0, G = 0, H = 0, I = 0, J = 0, K = 0;
};

/// C, E, F on the thumb side and K, J, I, H on the little-finger side, in that
/// order. Tip windows are narrowed by alpha at the G end so they cannot
/// return the middle finger itself.
inline LandmarkIndices locate_remaining(const RadialContour& rc, const BinaryImage& mask, std::size_t G, std::size_t B,
                                        const LandmarkOptions& opt = {}) {
  const double a = opt.alpha_deg;
  auto pick = [&](std::size_t from, std::size_t to, AngleWindow w, bool maximum, const char* name) {
    const auto best = rc.extreme(rc.arc(from, to), w, maximum);
    if (!best) fail(Errc::LandmarkFailure, std::string("empty angle window for ") + name);
    return *best;
  };
  LandmarkIndices ix;
  ix.G = G;
  ix.B = B;
  const double tG = rc.theta(G);
  ix.C = pick(B, G, AngleWindow::spanning(tG - a, rc.theta(B) + a), false, "C");
  ix.E = fix_partial_tip(rc, pick(ix.C, G, AngleWindow::spanning(tG + a, rc.theta(ix.C)), true, "E"), opt.tip_band);
  ix.F = pick(ix.E, G, AngleWindow::spanning(tG - a, rc.theta(ix.E) + a), false, "F");
  ix.K = locate_side_tip(rc, mask, false, opt.tip_band);
  ix.J = pick(ix.K, G, AngleWindow::spanning(rc.theta(ix.K) - a, tG + a), false, "J");
  ix.I = fix_partial_tip(rc, pick(ix.J, G, AngleWindow::spanning(rc.theta(ix.J), tG - a), true, "I"), opt.tip_band);
  ix.H = pick(ix.I, G, AngleWindow::spanning(rc.theta(ix.I) - a, tG + a), false, "H");
  return ix;
}

/// Cyclic moving average of the contour points.
inline std::vector<PointF> smooth_contour(const HandContour& c, int window = 5) {
  const long n = static_cast<long>(c.size());
  const long h = window / 2;
  std::vector<PointF> out(c.size());
  for (long i = 0; i < n; ++i) {
    PointF acc;
    for (long k = -h; k <= h; ++k) acc += PointF(c.at_wrapped(i + k));
    out[static_cast<std::size_t>(i)] = acc / static_cast<double>(2 * h + 1);
  }
  return out;
}

namespace detail {

/// Positions t in [t0, t1] along origin + t*dir where the coverage crosses 0.5.
inline std::vector<double> coverage_crossings(const FloatImage& cov, PointF origin, PointF dir, double t0, double t1,
                                              double step = 0.05) {
  std::vector<double> out;
  double prev_t = t0;
  double prev = sample_bilinear(cov, origin + dir * t0) - 0.5;
  for (double t = t0 + step; t <= t1 + 1e-12; t += step) {
    const double v = sample_bilinear(cov, origin + dir * t) - 0.5;
    if ((prev >= 0) != (v >= 0)) out.push_back(prev_t + (t - prev_t) * prev / (prev - v));
    prev = v;
    prev_t = t;
  }
  return out;
}

inline std::optional<double> nearest(const std::vector<double>& xs, double ref) {
  std::optional<double> best;
  for (double x : xs)
    if (!best || std::abs(x - ref) < std::abs(*best - ref)) best = x;
  return best;
}

/// Least-squares parabola vertex; nullopt when not convex.
inline std::optional<std::pair<double, double>> parabola_vertex(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) return std::nullopt;
  double s[5] = {}, t[3] = {};
  for (auto [x, y] : pts) {
    double xp = 1.0;
    for (int k = 0; k < 5; ++k) {
      if (k < 3) t[k] += xp * y;
      s[k] += xp;
      xp *= x;
    }
  }
  // Normal equations for y = c0 + c1 x + c2 x^2.
  const double m[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
  auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det3(m);
  if (std::abs(d) < 1e-18) return std::nullopt;
  double c[3];
  for (int k = 0; k < 3; ++k) {
    double mk[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) mk[i][j] = j == k ? t[i] : m[i][j];
    c[k] = det3(mk) / d;
  }
  if (c[2] <= 0) return std::nullopt;
  const double xv = -c[1] / (2 * c[2]);
  return std::pair{xv, c[0] + c[1] * xv + c[2] * xv * xv};
}

}  // namespace detail

/// Projects a point onto the 0.5 coverage crossing along the local contour normal.
inline PointF snap_to_edge(const FloatImage& cov, const std::vector<PointF>& smooth, PointF p, std::size_t near_index) {
  const long n = static_cast<long>(smooth.size());
  const auto at = [&](long i) { return smooth[static_cast<std::size_t>(((i % n) + n) % n)]; };
  const PointF tangent = at(static_cast<long>(near_index) + 3) - at(static_cast<long>(near_index) - 3);
  if (norm(tangent) == 0) return p;
  const PointF normal = perp(normalized(tangent));
  const auto t = detail::nearest(detail::coverage_crossings(cov, p, normal, -2.5, 2.5), 0.0);
  return t ? p + normal * *t : p;
}

/// Closed boundary polyline with arc-length parametrisation.
class EdgePolyline {
 public:
  explicit EdgePolyline(std::vector<PointF> pts) : pts_(std::move(pts)), cum_(pts_.size() + 1, 0.0) {
    for (std::size_t i = 0; i < pts_.size(); ++i) cum_[i + 1] = cum_[i] + distance(pts_[i], pts_[(i + 1) % pts_.size()]);
  }

  std::size_t size() const { return pts_.size(); }
  PointF point(std::size_t i) const { return pts_[i]; }
  double total() const { return cum_.back(); }
  double position(std::size_t i) const { return cum_[i]; }

  /// Arc position of the point of segments near `index` closest to `p`.
  double project(PointF p, std::size_t index, int reach = 6) const {
    const long n = static_cast<long>(pts_.size());
    double best_d = 1e300, best_s = cum_[index];
    for (long k = -reach; k < reach; ++k) {
      const auto i = static_cast<std::size_t>(((static_cast<long>(index) + k) % n + n) % n);
      const PointF a = pts_[i], b = pts_[(i + 1) % pts_.size()];
      const PointF ab = b - a;
      const double len2 = dot(ab, ab);
      const double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
      const double d = distance(p, a + ab * t);
      if (d < best_d) best_d = d, best_s = cum_[i] + t * (cum_[i + 1] - cum_[i]);
    }
    return best_s;
  }

  /// Distance travelled from position a to position b moving in direction dir (+1 / -1).
  double travel(double a, double b, int dir) const {
    const double d = dir > 0 ? b - a : a - b;
    return d >= 0 ? d : d + total();
  }

  PointF at(double s) const {
    s = std::fmod(s, total());
    if (s < 0) s += total();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cum_.begin()) - 1, pts_.size() - 1);
    const double seg = cum_[i + 1] - cum_[i];
    const double t = seg > 0 ? (s - cum_[i]) / seg : 0.0;
    return pts_[i] + (pts_[(i + 1) % pts_.size()] - pts_[i]) * t;
  }

 private:
  std::vector<PointF> pts_;
  std::vector<double> cum_;
};

/// Smoothed contour with every point snapped onto the 0.5 coverage edge.
inline EdgePolyline subpixel_edge(const FloatImage& cov, const std::vector<PointF>& smooth) {
  std::vector<PointF> pts(smooth.size());
  for (std::size_t i = 0; i < smooth.size(); ++i) pts[i] = snap_to_edge(cov, smooth, smooth[i], i);
  return EdgePolyline(std::move(pts));
}

/// Radial extremum about R near contour index `index`, located by a parabola
/// fit of radius against arc length over the points within `band` of the
/// discrete extremum.
inline PointF refine_extremum(const EdgePolyline& edge, PointF R, std::size_t index, bool maximum, int reach = 12,
                              double band = 1.5) {
  const long n = static_cast<long>(edge.size());
  const double s0 = edge.position(index);
  std::vector<std::pair<double, double>> samples;  // (arc offset, signed radius)
  for (long k = -reach; k <= reach; ++k) {
    const auto i = static_cast<std::size_t>(((static_cast<long>(index) + k) % n + n) % n);
    const double off = k >= 0 ? edge.travel(s0, edge.position(i), 1) : -edge.travel(s0, edge.position(i), -1);
    const double r = distance(edge.point(i), R);
    samples.push_back({off, maximum ? -r : r});
  }
  const auto best = *std::min_element(samples.begin(), samples.end(), [](auto a, auto b) { return a.second < b.second; });
  std::vector<std::pair<double, double>> near;
  for (auto smp : samples)
    if (smp.second <= best.second + band) near.push_back(smp);
  auto v = detail::parabola_vertex(near);
  if (!v || v->first < near.front().first || v->first > near.back().first) v = best;
  return edge.at(s0 + v->first);
}

/// Second valley of a finger: walk from the tip away from its first valley
/// until the arc length equals the tip-to-valley arc length.
inline PointF mirror_valley(const RadialContour& rc, const EdgePolyline& edge, std::size_t tip_index, PointF tip,
                            std::size_t valley_index, PointF valley) {
  if (tip_index == valley_index) return tip;
  const auto path = rc.arc(tip_index, valley_index);
  const int toward = path[1] == rc.wrap(static_cast<long>(tip_index) + 1) ? 1 : -1;
  const double s_tip = edge.project(tip, tip_index);
  const double s_valley = edge.project(valley, valley_index);
  const double length = edge.travel(s_tip, s_valley, toward);
  const double to_anchor = edge.travel(s_tip, edge.position(rc.anchor()), -toward);
  if (length >= to_anchor) fail(Errc::LandmarkFailure, "contour exhausted while mirroring a valley");
  return edge.at(s_tip - toward * length);
}

struct GapCheck {
  bool accepted = true;
  std::string reason;
};

/// Rejects silhouettes whose fingers are not separated by proper valleys.
/// Expects canonical left orientation (thumb at small x).
inline GapCheck check_finger_gaps(const LandmarkSet& lm, const LandmarkOptions& opt = {}) {
  const std::array<PointF, 5> tips{lm.B, lm.E, lm.G, lm.I, lm.K};
  for (std::size_t i = 0; i + 1 < tips.size(); ++i) {
    if (!(tips[i].x < tips[i + 1].x)) return {false, "fingertips out of order"};
    if (distance(tips[i], tips[i + 1]) < opt.min_tip_separation) return {false, "fingertips coincide"};
  }
  const std::array<PointF, 4> valleys{lm.C, lm.F, lm.H, lm.J};
  for (std::size_t i = 0; i < valleys.size(); ++i) {
    const auto f1 = static_cast<Finger>(i), f2 = static_cast<Finger>(i + 1);
    const double depth =
        std::min(distance(lm.R, tips[i]), distance(lm.R, tips[i + 1])) - distance(lm.R, valleys[i]);
    const double shorter = std::min(distance(lm.tip(f1), lm.base_mid(f1)), distance(lm.tip(f2), lm.base_mid(f2)));
    if (depth < opt.depth_fraction * shorter)
      return {false, std::string("valley ") + "CFHJ"[i] + " too shallow"};
  }
  return {};
}

inline void require_closed(const HandContour& c) {
  if (c.size() < 3) fail(Errc::ContourBroken, "contour shorter than 3 points");
  const Point a = c.points.front(), b = c.points.back();
  if (std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) > 1) fail(Errc::ContourBroken, "contour is not closed");
}

/// Full landmark search on an upright hand in canonical left orientation.
inline LandmarkSet locate_landmarks_left(const BinaryImage& mask, const FloatImage& coverage, const HandContour& contour,
                                         PointF R, const LandmarkOptions& opt = {}) {
  require_closed(contour);
  const RadialContour rc(contour, R);
  const std::size_t G = locate_middle_tip(rc, opt.tip_band);
  const std::size_t B = locate_thumb_tip(rc, mask, opt.tip_band);
  const LandmarkIndices ix = locate_remaining(rc, mask, G, B, opt);
  const auto smooth = smooth_contour(contour);

  LandmarkSet lm;
  lm.R = R;
  lm.B = rc.point(ix.B), lm.E = rc.point(ix.E), lm.G = rc.point(ix.G), lm.I = rc.point(ix.I), lm.K = rc.point(ix.K);
  lm.C = rc.point(ix.C), lm.F = rc.point(ix.F), lm.H = rc.point(ix.H), lm.J = rc.point(ix.J);
  const EdgePolyline edge = opt.refine ? subpixel_edge(coverage, smooth) : EdgePolyline(smooth);
  if (opt.refine) {
    lm.B = refine_extremum(edge, R, ix.B, true), lm.E = refine_extremum(edge, R, ix.E, true);
    lm.G = refine_extremum(edge, R, ix.G, true), lm.I = refine_extremum(edge, R, ix.I, true);
    lm.K = refine_extremum(edge, R, ix.K, true);
    lm.C = refine_extremum(edge, R, ix.C, false, 12, 1.0), lm.F = refine_extremum(edge, R, ix.F, false, 12, 1.0);
    lm.H = refine_extremum(edge, R, ix.H, false, 12, 1.0), lm.J = refine_extremum(edge, R, ix.J, false, 12, 1.0);
  }
  lm.A = mirror_valley(rc, edge, ix.B, lm.B, ix.C, lm.C);
  lm.D = mirror_valley(rc, edge, ix.E, lm.E, ix.F, lm.F);
  lm.L = mirror_valley(rc, edge, ix.K, lm.K, ix.J, lm.J);
  return lm;
}

/// Landmarks for either hand; a right hand is mirrored into the left-hand
/// procedure and the points mirrored back.
inline LandmarkSet locate_landmarks(const NormalizedHand& hand, HandSide side, const LandmarkOptions& opt = {}) {
  if (side == HandSide::Left) {
    LandmarkSet lm = locate_landmarks_left(hand.mask, hand.coverage, hand.contour, hand.frame.R, opt);
    lm.side = side;
    return lm;
  }
  const int w = hand.mask.width();
  const auto flip = [w](PointF p) { return PointF{w - 1 - p.x, p.y}; };
  const BinaryImage mask = flip_horizontal(hand.mask);
  const FloatImage cov = flip_horizontal(hand.coverage);
  const HandContour contour = trace_contour(mask);
  LandmarkSet lm = locate_landmarks_left(mask, cov, contour, flip(hand.frame.R), opt);
  for (std::size_t i = 0; i < LandmarkSet::kCount; ++i) lm[i] = flip(lm[i]);
  lm.side = side;
  return lm;
}

/// Mirrors a landmark set into canonical left orientation within an image of width `w`.
inline LandmarkSet to_canonical(const LandmarkSet& lm, int width) {
  if (lm.side == HandSide::Left) return lm;
  LandmarkSet out = lm;
  for (std::size_t i = 0; i < LandmarkSet::kCount; ++i) out[i] = {width - 1 - lm[i].x, lm[i].y};
  return out;
}

/// Landmarks followed by the finger-gap sanity check; rejected hands raise
/// LandmarkFailure.
inline LandmarkSet extract_landmarks(const NormalizedHand& hand, HandSide side, const LandmarkOptions& opt = {}) {
  LandmarkSet lm = locate_landmarks(hand, side, opt);
  const GapCheck g = check_finger_gaps(to_canonical(lm, hand.mask.width()), opt);
  if (!g.accepted) fail(Errc::LandmarkFailure, "hand rejected: " + g.reason);
  return lm;
}

/// Silhouette at half intensity with landmarks drawn as white crosses.
inline GrayImage landmark_overlay(const BinaryImage& mask, const LandmarkSet& lm) {
  GrayImage out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out.pixels()[i] = mask.pixels()[i] ? 110 : 0;
  for (PointF p : lm.points()) {
    const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
    for (int k = -2; k <= 2; ++k) {
      if (out.contains(x + k, y)) out(x + k, y) = 255;
      if (out.contains(x, y + k)) out(x, y + k) = 255;
    }
  }
  return out;
}

}  // namespace handfuse
