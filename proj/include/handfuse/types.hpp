#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "handfuse/error.hpp"
#include "handfuse/geometry.hpp"

namespace handfuse {

enum class HandSide { Left, Right };

constexpr char side_code(HandSide s) { return s == HandSide::Left ? 'L' : 'R'; }

inline HandSide parse_side(std::string_view s) {
  if (s == "L" || s == "l" || s == "left") return HandSide::Left;
  if (s == "R" || s == "r" || s == "right") return HandSide::Right;
  fail(Errc::ParseError, "hand side must be L or R, got '" + std::string(s) + "'");
}

enum class Finger { Thumb = 0, Index, Middle, Ring, Little };
inline constexpr std::size_t kFingerCount = 5;
inline constexpr std::array<std::string_view, kFingerCount> kFingerNames{"thumb", "index", "middle", "ring", "little"};

/// Reference point R and the twelve tip/valley points.
///
/// Tips: B thumb, E index, G middle, I ring, K little. First valleys: C
/// (thumb/index), F (index/middle), H (middle/ring), J (ring/little). Second
/// valleys obtained by mirroring along the contour: A (thumb), D (index), L
/// (little).
struct LandmarkSet {
  PointF R, A, B, C, D, E, F, G, H, I, J, K, L;
  HandSide side = HandSide::Left;

  static constexpr std::size_t kCount = 13;
  static constexpr std::array<char, kCount> kNames{'R', 'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L'};

  std::array<PointF, kCount> points() const { return {R, A, B, C, D, E, F, G, H, I, J, K, L}; }

  PointF& operator[](std::size_t i) {
    PointF* all[kCount] = {&R, &A, &B, &C, &D, &E, &F, &G, &H, &I, &J, &K, &L};
    return *all[i];
  }
  PointF operator[](std::size_t i) const { return points()[i]; }

  PointF tip(Finger f) const {
    constexpr std::array<PointF LandmarkSet::*, kFingerCount> tips{&LandmarkSet::B, &LandmarkSet::E, &LandmarkSet::G,
                                                                   &LandmarkSet::I, &LandmarkSet::K};
    return this->*tips[static_cast<std::size_t>(f)];
  }

  /// The two valley points spanning a finger's baseline.
  std::array<PointF, 2> baseline(Finger f) const {
    switch (f) {
      case Finger::Thumb: return {A, C};
      case Finger::Index: return {D, F};
      case Finger::Middle: return {F, H};
      case Finger::Ring: return {H, J};
      case Finger::Little: return {J, L};
    }
    return {};
  }

  PointF base_mid(Finger f) const {
    const auto b = baseline(f);
    return midpoint(b[0], b[1]);
  }
};

/// Feature layout: 5 finger lengths, then (width at 1/3, width at 2/3,
/// baseline length) per finger, then 5 palm-centre-to-baseline distances and
/// the palm width. Fingers always run thumb, index, middle, ring, little.
inline constexpr std::size_t kFeatureCount = 26;

namespace feature_index {
constexpr std::size_t length(Finger f) { return static_cast<std::size_t>(f); }
constexpr std::size_t width(Finger f, std::size_t k) { return 5 + 3 * static_cast<std::size_t>(f) + k; }
constexpr std::size_t center_distance(Finger f) { return 20 + static_cast<std::size_t>(f); }
constexpr std::size_t palm_width = 25;
}  // namespace feature_index

inline std::string feature_name(std::size_t i) {
  if (i >= kFeatureCount) fail(Errc::InvalidInput, "feature index out of range");
  if (i < 5) return "len_" + std::string(kFingerNames[i]);
  if (i < 20) {
    static constexpr std::array<std::string_view, 3> kinds{"w13_", "w23_", "base_"};
    return std::string(kinds[(i - 5) % 3]) + std::string(kFingerNames[(i - 5) / 3]);
  }
  if (i < 25) return "ctr_" + std::string(kFingerNames[i - 20]);
  return "palm_width";
}

using FeatureValues = std::array<double, kFeatureCount>;

struct FeatureVector {
  FeatureValues values{};
  HandSide side = HandSide::Left;

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

}  // namespace handfuse
