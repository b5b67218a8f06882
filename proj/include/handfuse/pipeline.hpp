#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "handfuse/features.hpp"
#include "handfuse/image_io.hpp"
#include "handfuse/imaging.hpp"
#include "handfuse/landmarks.hpp"

namespace handfuse {

struct PipelineOptions {
  NormalizeOptions normalize;
  LandmarkOptions landmarks;
  /// When set, intermediate images are written here as PGM files.
  std::optional<std::filesystem::path> debug_dir;
  std::string debug_prefix = "hand";
};

struct Measurement {
  NormalizedHand hand;
  LandmarkSet landmarks;
  FeatureVector features;
};

/// Silhouette normalization, landmark extraction (with gap rejection) and
/// the 26 features.
inline Measurement measure(const GrayImage& image, HandSide side, const PipelineOptions& opt = {}) {
  NormalizeOptions nopt = opt.normalize;
  if (opt.debug_dir) {
    std::filesystem::create_directories(*opt.debug_dir);
    const auto dir = *opt.debug_dir;
    const std::string prefix = opt.debug_prefix;
    nopt.debug_sink = [dir, prefix](const std::string& stage, const FloatImage& img) {
      io::write_pgm(dir / (prefix + "_" + stage + ".pgm"), img);
    };
  }
  Measurement m;
  m.hand = normalize_hand(image, nopt);
  if (opt.debug_dir) {
    // The overlay is most useful exactly when extraction fails.
    try {
      m.landmarks = locate_landmarks(m.hand, side, opt.landmarks);
      io::write_pgm(*opt.debug_dir / (opt.debug_prefix + "_landmarks.pgm"), landmark_overlay(m.hand.mask, m.landmarks));
    } catch (const Error&) {
    }
  }
  m.landmarks = extract_landmarks(m.hand, side, opt.landmarks);
  m.features = extract_features(m.hand.coverage, m.landmarks);
  return m;
}

inline Measurement measure_file(const std::filesystem::path& path, HandSide side, const PipelineOptions& opt = {}) {
  return measure(to_grayscale(io::read_image(path)), side, opt);
}

}  // namespace handfuse
