#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "handfuse/synthhand.hpp"

namespace handfuse::test_support {

/// A plausible random hand (same shape model as the synthetic population).
inline synth::HandParams random_hand(std::mt19937_64& rng) {
  synth::HandParams p;
  do {
    p = synth::HandParams{};
    synth::detail::perturb(p, 1.0, rng);
  } while (!synth::detail::valid_params(p));
  return p;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("handfuse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Copy of `img` placed at (dx, dy) on a larger canvas filled with `fill`.
inline GrayImage pad(const GrayImage& img, int dx, int dy, int extra_x, int extra_y, std::uint8_t fill) {
  GrayImage out(img.width() + dx + extra_x, img.height() + dy + extra_y, fill);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out(x + dx, y + dy) = img(x, y);
  return out;
}

}  // namespace handfuse::test_support
