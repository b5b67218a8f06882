#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "handfuse/error.hpp"
#include "handfuse/geometry.hpp"
#include "handfuse/image.hpp"
#include "handfuse/types.hpp"

namespace handfuse {

inline double finger_length(PointF tip, PointF base_mid) { return distance(tip, base_mid); }

/// Coverage line integral across the silhouette through `center` along
/// `normal`: the chord length with sub-pixel edges. Each half stops once the
/// coverage has fallen to zero.
inline double chord_width(const FloatImage& cov, PointF center, PointF normal, double max_reach = 2000.0) {
  if (sample_bilinear(cov, center) < 0.5) fail(Errc::FeatureFailure, "chord centre lies outside the silhouette");
  constexpr double step = 0.05;
  double total = 0.0;
  for (const PointF dir : {normal, -normal}) {
    double prev = sample_bilinear(cov, center);
    for (double t = step;; t += step) {
      const PointF p = center + dir * t;
      if (t > max_reach || p.x < -1 || p.y < -1 || p.x > cov.width() || p.y > cov.height())
        fail(Errc::FeatureFailure, "chord leaves the image");
      const double v = sample_bilinear(cov, p);
      total += 0.5 * (prev + v) * step;
      if (v <= 0.0) break;
      prev = v;
    }
  }
  return total;
}

/// Widths at one third and two thirds of the finger length, each the mean of
/// five parallel chords one pixel apart, then the baseline length.
inline std::array<double, 3> finger_widths(const FloatImage& cov, PointF tip, PointF base_mid,
                                           const std::array<PointF, 2>& baseline) {
  const double length = distance(tip, base_mid);
  if (length <= 0) fail(Errc::FeatureFailure, "finger axis is degenerate");
  const PointF axis = normalized(tip - base_mid);
  const PointF n = perp(axis);
  std::array<double, 3> w{};
  for (std::size_t k = 0; k < 2; ++k) {
    const PointF c = base_mid + axis * (length * static_cast<double>(k + 1) / 3.0);
    double acc = 0.0;
    for (int o = -2; o <= 2; ++o) acc += chord_width(cov, c + axis * static_cast<double>(o), n);
    w[k] = acc / 5.0;
  }
  w[2] = distance(baseline[0], baseline[1]);
  return w;
}

struct PalmFrame {
  PointF C, S, M;
  std::array<PointF, kFingerCount> base_mids{};
};

struct PalmMeasurements {
  PalmFrame frame;
  double width = 0.0;
  std::array<double, kFingerCount> center_distances{};
};

/// S lies where the ray from C, perpendicular to the hand axis RG and aimed at
/// the little-finger side, leaves the palm.
inline PalmMeasurements palm_measurements(const FloatImage& cov, const LandmarkSet& lm) {
  const double axis_len = distance(lm.R, lm.G);
  if (axis_len <= 0) fail(Errc::FeatureFailure, "hand axis is degenerate");
  const PointF g = (lm.G - lm.R) / axis_len;
  PointF n{g.y, -g.x};
  if (dot(n, lm.K - lm.C) < 0) n = -n;

  constexpr double step = 0.05;
  double t = 2.0;
  double prev = sample_bilinear(cov, lm.C + n * t);
  if (prev < 0.5) fail(Errc::FeatureFailure, "palm ray does not enter the palm");
  for (;;) {
    const PointF p = lm.C + n * (t + step);
    if (p.x < -1 || p.y < -1 || p.x > cov.width() || p.y > cov.height()) fail(Errc::FeatureFailure, "palm ray exits image");
    const double v = sample_bilinear(cov, p);
    if (v < 0.5) {
      t += step * (prev - 0.5) / (prev - v);
      break;
    }
    prev = v;
    t += step;
  }

  PalmMeasurements out;
  out.frame.C = lm.C;
  out.frame.S = lm.C + n * t;
  out.frame.M = midpoint(out.frame.C, out.frame.S);
  out.width = t;
  for (std::size_t f = 0; f < kFingerCount; ++f) {
    out.frame.base_mids[f] = lm.base_mid(static_cast<Finger>(f));
    out.center_distances[f] = distance(out.frame.M, out.frame.base_mids[f]);
  }
  return out;
}

/// The 26 raw features in fixed layout; identical order for both hands.
inline FeatureVector extract_features(const FloatImage& cov, const LandmarkSet& lm) {
  FeatureVector v;
  v.side = lm.side;
  for (std::size_t f = 0; f < kFingerCount; ++f) {
    const auto fi = static_cast<Finger>(f);
    v[feature_index::length(fi)] = finger_length(lm.tip(fi), lm.base_mid(fi));
    const auto w = finger_widths(cov, lm.tip(fi), lm.base_mid(fi), lm.baseline(fi));
    for (std::size_t k = 0; k < 3; ++k) v[feature_index::width(fi, k)] = w[k];
  }
  const PalmMeasurements palm = palm_measurements(cov, lm);
  v[feature_index::palm_width] = palm.width;
  for (std::size_t f = 0; f < kFingerCount; ++f)
    v[feature_index::center_distance(static_cast<Finger>(f))] = palm.center_distances[f];
  for (double x : v.values)
    if (!(x > 0)) fail(Errc::FeatureFailure, "non-positive feature value");
  return v;
}

/// Per-feature enrollment statistics for z-score normalization.
struct FeatureStats {
  FeatureValues mean{};
  FeatureValues sigma{};

  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

/// Column means and sample standard deviations; a single row has zero spread.
inline FeatureStats compute_stats(std::span<const FeatureValues> rows) {
  if (rows.empty()) fail(Errc::StatsDegenerate, "no rows to compute statistics from");
  FeatureStats s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[j] - mean) * (r[j] - mean);
    s.mean[j] = mean;
    s.sigma[j] = rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return s;
}

inline FeatureValues normalize(const FeatureValues& v, const FeatureStats& s) {
  FeatureValues z{};
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (!(s.sigma[j] > 0)) fail(Errc::StatsDegenerate, "zero spread for feature " + feature_name(j));
    z[j] = (v[j] - s.mean[j]) / s.sigma[j];
  }
  return z;
}

inline FeatureValues denormalize(const FeatureValues& z, const FeatureStats& s) {
  FeatureValues v{};
  for (std::size_t j = 0; j < kFeatureCount; ++j) v[j] = z[j] * s.sigma[j] + s.mean[j];
  return v;
}

}  // namespace handfuse
