#pragma once

// Image normalisation: grayscale conversion, Otsu segmentation, median
// filtering, component isolation, principal-axis uprighting, wrist trimming
// and boundary tracing.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "handfuse/error.hpp"
#include "handfuse/geometry.hpp"
#include "handfuse/image.hpp"

namespace handfuse {

using Histogram = std::array<std::uint64_t, 256>;

/// ITU-R 601 luma, rounded to nearest.
inline GrayImage to_grayscale(const RgbImage& img) {
  if (img.empty()) fail(Errc::InvalidInput, "empty image");
  GrayImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double y = 0.299 * src[i].r + 0.587 * src[i].g + 0.114 * src[i].b;
    dst[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(y), 0, 255));
  }
  return out;
}

inline Histogram histogram(const GrayImage& img) {
  Histogram h{};
  for (auto v : img.pixels()) ++h[v];
  return h;
}

/// Otsu's threshold over a 256-bin histogram. Pixels with value > t are
/// foreground. Among equally good thresholds the smallest is returned.
inline int otsu_threshold(const Histogram& hist) {
  std::uint64_t total = 0;
  double sum = 0.0;
  int distinct = 0;
  for (int v = 0; v < 256; ++v) {
    total += hist[v];
    sum += static_cast<double>(v) * static_cast<double>(hist[v]);
    distinct += hist[v] > 0;
  }
  if (distinct < 2) fail(Errc::DegenerateHistogram, "histogram has fewer than two distinct values");

  const double n = static_cast<double>(total);
  double n0 = 0.0, s0 = 0.0;
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += static_cast<double>(hist[t]);
    s0 += static_cast<double>(t) * static_cast<double>(hist[t]);
    const double n1 = n - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    // between-class variance (S0 N - S n0)^2 / (N^2 n0 n1)
    const double diff = s0 * n - sum * n0;
    const double between = diff * diff / (n * n * n0 * n1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

inline int otsu_threshold(const GrayImage& img) { return otsu_threshold(histogram(img)); }

inline BinaryImage binarize(const GrayImage& img, int threshold) {
  BinaryImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > threshold ? 1 : 0;
  return out;
}

/// Median over a (2r+1)^2 window with clamped coordinates.
inline GrayImage median_filter(const GrayImage& img, int radius = 1) {
  if (img.empty()) fail(Errc::InvalidInput, "empty image");
  if (radius < 1) fail(Errc::InvalidInput, "median radius must be >= 1");
  GrayImage out(img.width(), img.height());
  const int side = 2 * radius + 1;
  std::vector<std::uint8_t> window(static_cast<std::size_t>(side * side));
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::size_t k = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = std::clamp(y + dy, 0, img.height() - 1);
        for (int dx = -radius; dx <= radius; ++dx)
          window[k++] = img(std::clamp(x + dx, 0, img.width() - 1), yy);
      }
      std::nth_element(window.begin(), mid, window.end());
      out(x, y) = *mid;
    }
  }
  return out;
}

/// 8-connected component labels; 0 is background, components are numbered
/// 1..n in raster order of their first pixel.
struct ComponentLabels {
  Image<int> labels;
  std::vector<std::size_t> areas;  // areas[k-1] is the area of label k
};

inline ComponentLabels label_components(const BinaryImage& mask) {
  ComponentLabels out{Image<int>(mask.width(), mask.height(), 0), {}};
  std::vector<Point> stack;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || out.labels(x, y)) continue;
      const int label = static_cast<int>(out.areas.size()) + 1;
      std::size_t area = 0;
      stack.push_back({x, y});
      out.labels(x, y) = label;
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        ++area;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int qx = p.x + dx, qy = p.y + dy;
            if (mask.get(qx, qy) && !out.labels(qx, qy)) {
              out.labels(qx, qy) = label;
              stack.push_back({qx, qy});
            }
          }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

/// Keeps the largest 8-connected component; ties go to the component whose
/// first pixel comes first in raster order.
inline BinaryImage largest_component(const BinaryImage& mask) {
  const auto comp = label_components(mask);
  if (comp.areas.empty()) fail(Errc::EmptyMask, "no foreground pixels");
  const auto best = std::max_element(comp.areas.begin(), comp.areas.end());  // first max wins
  const int keep = static_cast<int>(best - comp.areas.begin()) + 1;
  BinaryImage out(mask.width(), mask.height());
  auto lab = comp.labels.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < lab.size(); ++i) dst[i] = lab[i] == keep ? 1 : 0;
  return out;
}

inline BinaryImage dilate(const BinaryImage& mask, int radius) {
  BinaryImage out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          if (out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
    }
  return out;
}

/// Raw image moments up to second order, accumulated exactly in integers.
struct RawMoments {
  std::int64_t m00 = 0, m10 = 0, m01 = 0;
  __int128 m20 = 0, m02 = 0, m11 = 0;
};

inline RawMoments moments(const BinaryImage& mask) {
  RawMoments m;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      ++m.m00;
      m.m10 += x;
      m.m01 += y;
      m.m20 += static_cast<__int128>(x) * x;
      m.m02 += static_cast<__int128>(y) * y;
      m.m11 += static_cast<__int128>(x) * y;
    }
  return m;
}

/// (M10/M00, M01/M00).
inline PointF centroid(const BinaryImage& mask) {
  const auto m = moments(mask);
  if (m.m00 == 0) fail(Errc::EmptyMask, "centroid of empty mask");
  return {static_cast<double>(m.m10) / static_cast<double>(m.m00),
          static_cast<double>(m.m01) / static_cast<double>(m.m00)};
}

/// Unit vector of the principal (major) axis in array coordinates.
inline PointF principal_axis(const RawMoments& m) {
  if (m.m00 == 0) fail(Errc::EmptyMask, "orientation of empty mask");
  // n^2 times the central second moments, exact.
  const __int128 n = m.m00;
  const __int128 a = n * m.m20 - static_cast<__int128>(m.m10) * m.m10;
  const __int128 b = n * m.m02 - static_cast<__int128>(m.m01) * m.m01;
  const __int128 c = n * m.m11 - static_cast<__int128>(m.m10) * m.m01;
  const long double la = static_cast<long double>(a), lb = static_cast<long double>(b);
  const long double lc = static_cast<long double>(c);
  if (a == 0 || b == 0 || std::fabs(la * lb - lc * lc) <= 1e-12L * la * lb)
    fail(Errc::DegenerateShape, "foreground pixels are collinear");
  const double theta = 0.5 * std::atan2(2.0 * static_cast<double>(lc), static_cast<double>(la - lb));
  return {std::cos(theta), std::sin(theta)};
}

/// Bilinear resampling: out(p) = src(dst_to_src(p)); outside reads as 0.
inline FloatImage warp_bilinear(const FloatImage& src, const Affine& dst_to_src, int width, int height) {
  FloatImage out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out(x, y) = static_cast<float>(sample_bilinear(src, dst_to_src(PointF(x, y))));
  return out;
}

inline FloatImage to_float(const BinaryImage& mask) {
  FloatImage out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out.pixels()[i] = mask.pixels()[i] ? 1.0f : 0.0f;
  return out;
}

inline BinaryImage threshold_at(const FloatImage& img, float level) {
  BinaryImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels()[i] = img.pixels()[i] >= level ? 1 : 0;
  return out;
}

/// Rotation that brings the principal axis of a silhouette to vertical with
/// the longer mass extent (the fingers) pointing up, plus the output canvas.
struct UprightPlan {
  Affine transform;  // source pixel -> output pixel
  int width = 0;
  int height = 0;
  double angle_deg = 0.0;  // rotation applied in array coordinates
  PointF centroid;
};

inline UprightPlan plan_upright(const BinaryImage& mask, int margin = 4) {
  const auto m = moments(mask);
  const PointF axis = principal_axis(m);
  const PointF c{static_cast<double>(m.m10) / static_cast<double>(m.m00),
                 static_cast<double>(m.m01) / static_cast<double>(m.m00)};

  double lo = 0.0, hi = 0.0;
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      const double s = dot(PointF(x, y) - c, axis);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
    }
  const PointF up = hi >= -lo ? axis : -axis;
  const double angle = -std::numbers::pi / 2.0 - std::atan2(up.y, up.x);
  const Affine rot = Affine::rotation(angle, c);

  double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
  for (PointF corner : {PointF(x0 - 1, y0 - 1), PointF(x1 + 1, y0 - 1), PointF(x0 - 1, y1 + 1), PointF(x1 + 1, y1 + 1)}) {
    const PointF q = rot(corner);
    minx = std::min(minx, q.x), miny = std::min(miny, q.y), maxx = std::max(maxx, q.x), maxy = std::max(maxy, q.y);
  }
  UprightPlan plan;
  const double ox = margin - std::floor(minx), oy = margin - std::floor(miny);
  plan.transform = Affine::translation(ox, oy).after(rot);
  plan.width = static_cast<int>(std::ceil(maxx + ox)) + margin + 1;
  plan.height = static_cast<int>(std::ceil(maxy + oy)) + margin + 1;
  plan.angle_deg = rad2deg(angle);
  plan.centroid = c;
  return plan;
}

struct UprightHand {
  BinaryImage mask;
  UprightPlan plan;
};

/// Principal-axis alignment with bilinear resampling and re-binarisation at 0.5.
inline UprightHand rotate_upright(const BinaryImage& mask) {
  const UprightPlan plan = plan_upright(mask);
  const FloatImage soft = warp_bilinear(to_float(mask), plan.transform.inverse(), plan.width, plan.height);
  return {threshold_at(soft, 0.5f), plan};
}

/// Wrist reference line UV and the reference point R (its midpoint).
struct ReferenceFrame {
  PointF centroid;
  PointF R;
  Point U;
  Point V;
  int h = 0;       // rows between the bottom of the silhouette and UV
  int uv_row = 0;  // image row of UV
};

struct TrimmedHand {
  BinaryImage mask;
  ReferenceFrame frame;
};

/// Cuts the silhouette at 20% of its row extent above the bottom row.
inline TrimmedHand trim_wrist(const BinaryImage& mask, double fraction = 0.20) {
  int top = -1, bottom = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) {
        if (top < 0) top = y;
        bottom = y;
        break;
      }
  if (top < 0) fail(Errc::EmptyMask, "cannot trim an empty mask");

  ReferenceFrame frame;
  frame.h = static_cast<int>(std::lround(fraction * (bottom - top + 1)));
  frame.uv_row = bottom - frame.h;
  int left = -1, right = -1;
  for (int x = 0; x < mask.width(); ++x)
    if (mask(x, frame.uv_row)) {
      if (left < 0) left = x;
      right = x;
    }
  if (left < 0) fail(Errc::WristNotFound, "reference row " + std::to_string(frame.uv_row) + " is empty");

  frame.U = {left, frame.uv_row};
  frame.V = {right, frame.uv_row};
  frame.R = {(left + right) / 2.0, static_cast<double>(frame.uv_row)};

  BinaryImage out = mask;
  for (int y = frame.uv_row + 1; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(x, y) = 0;
  for (int x = left; x <= right; ++x) out(x, frame.uv_row) = 1;  // flat closure along UV
  frame.centroid = centroid(out);
  return {std::move(out), frame};
}

/// Foreground pixels with nonzero Sobel gradient magnitude.
inline BinaryImage sobel_edges(const BinaryImage& mask) {
  BinaryImage out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      auto v = [&](int dx, int dy) { return static_cast<int>(mask.get(x + dx, y + dy)); };
      const int gx = (v(1, -1) + 2 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2 * v(-1, 0) + v(-1, 1));
      const int gy = (v(-1, 1) + 2 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2 * v(0, -1) + v(1, -1));
      out(x, y) = (gx != 0 || gy != 0) ? 1 : 0;
    }
  return out;
}

/// Ordered closed boundary loop, clockwise on screen.
struct HandContour {
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  const Point& operator[](std::size_t i) const { return points[i]; }
  /// Index i wrapped onto the loop.
  const Point& at_wrapped(long i) const {
    const long n = static_cast<long>(points.size());
    return points[static_cast<std::size_t>(((i % n) + n) % n)];
  }
};

/// Moore-neighbour boundary following from the topmost-leftmost foreground pixel.
inline HandContour trace_contour(const BinaryImage& mask) {
  static constexpr std::array<Point, 8> kDirs{{{-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};
  const auto comp = label_components(mask);
  if (comp.areas.empty()) fail(Errc::EmptyMask, "nothing to trace");
  if (comp.areas.size() > 1)
    fail(Errc::ContourBroken, "mask has " + std::to_string(comp.areas.size()) + " components");

  Point start{-1, -1};
  for (int y = 0; y < mask.height() && start.x < 0; ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) {
        start = {x, y};
        break;
      }

  auto dir_index = [](Point d) {
    for (int i = 0; i < 8; ++i)
      if (kDirs[i] == d) return i;
    return -1;
  };

  HandContour contour;
  contour.points.push_back(start);
  Point p = start;
  Point back{start.x - 1, start.y};
  std::optional<Point> first_move;
  const std::size_t limit = 4 * comp.areas[0] + 16;
  for (std::size_t steps = 0;; ++steps) {
    if (steps > limit) fail(Errc::ContourBroken, "boundary did not close");
    const int k = dir_index({back.x - p.x, back.y - p.y});
    std::optional<Point> next;
    Point next_back{};
    for (int i = 1; i <= 8; ++i) {
      const Point d = kDirs[static_cast<std::size_t>((k + i) % 8)];
      const Point q{p.x + d.x, p.y + d.y};
      if (mask.get(q.x, q.y)) {
        next = q;
        const Point bd = kDirs[static_cast<std::size_t>((k + i - 1) % 8)];
        next_back = {p.x + bd.x, p.y + bd.y};
        break;
      }
    }
    if (!next) return contour;  // single pixel
    if (p == start) {
      if (first_move && *next == *first_move) break;
      if (!first_move) first_move = next;
    }
    back = next_back;
    p = *next;
    contour.points.push_back(p);
  }
  if (contour.points.size() > 1 && contour.points.back() == start) contour.points.pop_back();
  return contour;
}

/// Uniform rescale by `scale` with box-averaged bilinear sampling.
inline GrayImage resize_uniform(const GrayImage& img, double scale) {
  if (!(scale > 0.0)) fail(Errc::InvalidInput, "resize scale must be positive");
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * scale)));
  const int k = std::max(1, static_cast<int>(std::ceil(1.0 / scale)));
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
          const double sx = (x + (i + 0.5) / k) / scale - 0.5;
          const double sy = (y + (j + 0.5) / k) / scale - 0.5;
          acc += sample_bilinear(img, std::clamp(sx, 0.0, img.width() - 1.0), std::clamp(sy, 0.0, img.height() - 1.0));
        }
      out(x, y) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(acc / (k * k)), 0, 255));
    }
  return out;
}

struct Size {
  int width = 0;
  int height = 0;
  friend bool operator==(Size, Size) = default;
};

struct NormalizeOptions {
  int median_radius = 1;
  /// When set, the input is uniformly rescaled to fit inside this box first.
  std::optional<Size> resize;
  double wrist_fraction = 0.20;
  /// Receives (stage name, image) pairs for debug dumps.
  std::function<void(const std::string&, const FloatImage&)> debug_sink;
};

/// Upright, wrist-trimmed hand together with its soft coverage map (the
/// gray-level evidence of how much of each pixel is hand, in [0, 1]).
struct NormalizedHand {
  BinaryImage mask;
  FloatImage coverage;
  ReferenceFrame frame;
  HandContour contour;
  Affine to_normalized;  // input pixel -> normalized pixel
  int threshold = 0;
};

inline NormalizedHand normalize_hand(const GrayImage& input, const NormalizeOptions& opt = {}) {
  auto dump = [&](const std::string& name, const FloatImage& img) {
    if (opt.debug_sink) opt.debug_sink(name, img);
  };
  auto dump_mask = [&](const std::string& name, const BinaryImage& m) {
    if (opt.debug_sink) opt.debug_sink(name, to_float(m));
  };

  Affine to_input = Affine::identity();
  GrayImage gray = input;
  if (opt.resize && (opt.resize->width != input.width() || opt.resize->height != input.height())) {
    const double s = std::min(static_cast<double>(opt.resize->width) / input.width(),
                              static_cast<double>(opt.resize->height) / input.height());
    gray = resize_uniform(input, s);
    to_input = Affine::scaling(s);
  }

  const GrayImage filtered = median_filter(gray, opt.median_radius);
  const int t = otsu_threshold(filtered);
  const BinaryImage hand0 = largest_component(binarize(filtered, t));
  dump_mask("segmented", hand0);

  // Class medians: unaffected by how much plain background surrounds the hand.
  Histogram bg_hist{}, fg_hist{};
  for (std::size_t i = 0; i < gray.size(); ++i) ++(filtered.pixels()[i] > t ? fg_hist : bg_hist)[gray.pixels()[i]];
  auto median_of = [](const Histogram& h) {
    std::uint64_t total = 0;
    for (auto c : h) total += c;
    std::uint64_t seen = 0;
    for (int v = 0; v < 256; ++v)
      if ((seen += h[static_cast<std::size_t>(v)]) * 2 >= total) return static_cast<double>(v);
    return 255.0;
  };
  const double bg = median_of(bg_hist), fg = median_of(fg_hist);
  if (!(fg > bg)) fail(Errc::DegenerateHistogram, "foreground is not brighter than background");
  const BinaryImage support0 = dilate(hand0, 2);
  FloatImage cover0(gray.width(), gray.height());
  for (std::size_t i = 0; i < gray.size(); ++i)
    cover0.pixels()[i] =
        support0.pixels()[i] ? static_cast<float>(std::clamp((gray.pixels()[i] - bg) / (fg - bg), 0.0, 1.0)) : 0.0f;

  const UprightPlan plan = plan_upright(hand0);
  FloatImage cover1 = warp_bilinear(cover0, plan.transform.inverse(), plan.width, plan.height);
  const BinaryImage hand1 = largest_component(threshold_at(cover1, 0.5f));
  dump_mask("upright", hand1);

  TrimmedHand trimmed = trim_wrist(hand1, opt.wrist_fraction);
  BinaryImage hand2 = largest_component(trimmed.mask);
  const BinaryImage support2 = dilate(hand2, 2);
  for (int y = 0; y < cover1.height(); ++y)
    for (int x = 0; x < cover1.width(); ++x) {
      if (y > trimmed.frame.uv_row || !support2(x, y))
        cover1(x, y) = 0.0f;
      else if (y == trimmed.frame.uv_row && x >= trimmed.frame.U.x && x <= trimmed.frame.V.x)
        cover1(x, y) = 1.0f;
    }
  dump_mask("trimmed", hand2);
  dump("coverage", cover1);

  NormalizedHand out;
  out.contour = trace_contour(hand2);
  out.mask = std::move(hand2);
  out.coverage = std::move(cover1);
  out.frame = trimmed.frame;
  out.frame.centroid = plan.transform(plan.centroid);
  out.to_normalized = plan.transform.after(to_input);
  out.threshold = t;
  return out;
}

}  // namespace handfuse
