#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "handfuse/error.hpp"
#include "handfuse/experiments.hpp"
#include "handfuse/features.hpp"
#include "handfuse/imaging.hpp"
#include "handfuse/landmarks.hpp"
#include "handfuse/matchers.hpp"
#include "handfuse/types.hpp"

namespace handfuse {

namespace detail {

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) fail(Errc::ParseError, where + ": bad number '" + std::string(s) + "'");
  return v;
}

inline long parse_long(std::string_view s, const std::string& where) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) fail(Errc::ParseError, where + ": bad integer '" + std::string(s) + "'");
  return v;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string format17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------- config

struct Config {
  std::size_t d = 3;
  double th = 0.7;
  double alpha_deg = 5.0;
  int scheme = 2;
  double tau = 0.5;
  std::optional<Size> resize;  // off unless configured, e.g. resize=200x300
  bool normalize = true;
  std::uint64_t seed = 1;
  int median_radius = 1;
  double wrist_fraction = 0.20;
  double depth_fraction = 0.15;

  MatchParams match() const { return {parse_scheme(scheme), th, d}; }

  void validate() const {
    if (d < 2) fail(Errc::InvalidInput, "d must be at least 2");
    if (!(th > 0)) fail(Errc::InvalidInput, "th must be positive");
    (void)parse_scheme(scheme);
    if (alpha_deg < 0) fail(Errc::InvalidInput, "alpha must be non-negative");
  }

  void set(const std::string& key, const std::string& value) {
    const std::string where = "config key '" + key + "'";
    if (key == "d") {
      d = static_cast<std::size_t>(detail::parse_long(value, where));
    } else if (key == "th") {
      th = detail::parse_double(value, where);
    } else if (key == "alpha") {
      alpha_deg = detail::parse_double(value, where);
    } else if (key == "scheme") {
      scheme = static_cast<int>(detail::parse_long(value, where));
    } else if (key == "tau") {
      tau = detail::parse_double(value, where);
    } else if (key == "resize") {
      if (value == "off" || value.empty()) {
        resize.reset();
      } else {
        const auto x = value.find('x');
        if (x == std::string::npos) fail(Errc::ParseError, where + ": expected WIDTHxHEIGHT or off");
        resize = Size{static_cast<int>(detail::parse_long(std::string_view(value).substr(0, x), where)),
                      static_cast<int>(detail::parse_long(std::string_view(value).substr(x + 1), where))};
      }
    } else if (key == "normalize") {
      if (value != "on" && value != "off") fail(Errc::ParseError, where + ": expected on or off");
      normalize = value == "on";
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(detail::parse_long(value, where));
    } else if (key == "median_radius") {
      median_radius = static_cast<int>(detail::parse_long(value, where));
    } else if (key == "wrist_fraction") {
      wrist_fraction = detail::parse_double(value, where);
    } else if (key == "depth_fraction") {
      depth_fraction = detail::parse_double(value, where);
    } else {
      fail(Errc::ParseError, "unknown config key '" + key + "'");
    }
  }

  NormalizeOptions normalize_options() const {
    NormalizeOptions o;
    o.median_radius = median_radius;
    o.resize = resize;
    o.wrist_fraction = wrist_fraction;
    return o;
  }

  LandmarkOptions landmark_options() const {
    LandmarkOptions o;
    o.alpha_deg = alpha_deg;
    o.depth_fraction = depth_fraction;
    return o;
  }
};

/// Flat key=value lines; blank lines and '#' comments are ignored.
inline Config parse_config(std::istream& in, Config base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(Errc::ParseError, "config line " + std::to_string(lineno) + ": expected key=value");
    base.set(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  base.validate();
  return base;
}

inline Config load_config(const std::filesystem::path& path, Config base = {}) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open config " + path.string());
  return parse_config(in, base);
}

// ---------------------------------------------------------------- templates

struct StoredTemplate {
  std::string user;
  HandSide side = HandSide::Left;
  int sample = 0;
  FeatureValues raw{};

  friend bool operator==(const StoredTemplate&, const StoredTemplate&) = default;
};

struct HandStats {
  FeatureStats left, right;

  const FeatureStats& of(HandSide s) const { return s == HandSide::Left ? left : right; }
  friend bool operator==(const HandStats&, const HandStats&) = default;
};

/// Statistics used for matching: zero spreads (e.g. a single enrolled sample)
/// fall back to 1 so that normalization stays defined.
inline FeatureStats usable_stats(FeatureStats s) {
  for (double& v : s.sigma)
    if (!(v > 0)) v = 1.0;
  return s;
}

inline FeatureStats identity_stats() {
  FeatureStats s;
  s.sigma.fill(1.0);
  return s;
}

inline std::string stats_path(const std::filesystem::path& db) { return db.string() + ".stats"; }

/// Raw feature rows keyed by (user, hand, sample), plus their statistics.
class TemplateStore {
 public:
  const std::vector<StoredTemplate>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  const HandStats& stats() const { return stats_; }

  bool contains(const std::string& user, HandSide side, int sample) const {
    return std::any_of(rows_.begin(), rows_.end(),
                       [&](const auto& r) { return r.user == user && r.side == side && r.sample == sample; });
  }

  int next_sample(const std::string& user) const {
    int next = 0;
    for (const auto& r : rows_)
      if (r.user == user) next = std::max(next, r.sample + 1);
    return next;
  }

  /// Values are kept at the stored precision so that a save/load cycle is exact.
  void add(StoredTemplate t) {
    if (t.user.empty() || t.user.find_first_of(",\n\r") != std::string::npos)
      fail(Errc::InvalidInput, "user id must be non-empty and free of commas and newlines");
    if (t.sample < 0) fail(Errc::InvalidInput, "sample index must be non-negative");
    if (contains(t.user, t.side, t.sample))
      fail(Errc::DuplicateSample, "user '" + t.user + "' already has sample " + std::to_string(t.sample) + " for hand " +
                                      side_code(t.side));
    for (double& v : t.raw) v = detail::parse_double(detail::format6(v), "template value");
    rows_.push_back(std::move(t));
    recompute_stats();
  }

  void recompute_stats() {
    std::vector<FeatureValues> l, r;
    for (const auto& t : rows_) (t.side == HandSide::Left ? l : r).push_back(t.raw);
    stats_.left = l.empty() ? FeatureStats{} : compute_stats(l);
    stats_.right = r.empty() ? FeatureStats{} : compute_stats(r);
  }

  /// Matching database over (user, sample) keys enrolled with both hands.
  TemplateDatabase database(bool normalized = true) const {
    const FeatureStats sl = normalized ? usable_stats(stats_.left) : identity_stats();
    const FeatureStats sr = normalized ? usable_stats(stats_.right) : identity_stats();
    TemplateDatabase db;
    for (const auto& t : rows_) {
      if (t.side != HandSide::Left) continue;
      const auto it = std::find_if(rows_.begin(), rows_.end(), [&](const auto& r) {
        return r.side == HandSide::Right && r.user == t.user && r.sample == t.sample;
      });
      if (it == rows_.end()) continue;
      db.add(t.user, normalize(t.raw, sl), normalize(it->raw, sr));
    }
    return db;
  }

  /// Normalizes a probe pair with this store's statistics.
  TestPair probe(const FeatureValues& left, const FeatureValues& right, bool normalized = true) const {
    if (!normalized) return {left, right};
    return {normalize(left, usable_stats(stats_.left)), normalize(right, usable_stats(stats_.right))};
  }

  void write_csv(std::ostream& out) const {
    out << "user_id,hand,sample_index";
    for (std::size_t j = 0; j < kFeatureCount; ++j) out << ',' << feature_name(j);
    out << '\n';
    for (const auto& t : rows_) {
      out << t.user << ',' << side_code(t.side) << ',' << t.sample;
      for (double v : t.raw) out << ',' << detail::format6(v);
      out << '\n';
    }
  }

  void write_stats(std::ostream& out) const {
    out << "hand,stat";
    for (std::size_t j = 0; j < kFeatureCount; ++j) out << ',' << feature_name(j);
    out << '\n';
    for (const HandSide side : {HandSide::Left, HandSide::Right}) {
      const FeatureStats& s = stats_.of(side);
      for (const auto& [name, values] : {std::pair{"mean", &s.mean}, std::pair{"sigma", &s.sigma}}) {
        out << side_code(side) << ',' << name;
        for (double v : *values) out << ',' << detail::format17(v);
        out << '\n';
      }
    }
  }

  static TemplateStore read_csv(std::istream& in, const std::string& where = "database") {
    TemplateStore store;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || (lineno == 1 && line.rfind("user_id,", 0) == 0)) continue;
      const std::string at = where + ":" + std::to_string(lineno);
      const auto cells = detail::split_csv(line);
      if (cells.size() != 3 + kFeatureCount)
        fail(Errc::ParseError, at + ": expected " + std::to_string(3 + kFeatureCount) + " fields");
      StoredTemplate t;
      t.user = cells[0];
      t.side = parse_side(cells[1]);
      t.sample = static_cast<int>(detail::parse_long(cells[2], at));
      for (std::size_t j = 0; j < kFeatureCount; ++j) t.raw[j] = detail::parse_double(cells[3 + j], at);
      if (store.contains(t.user, t.side, t.sample)) fail(Errc::DuplicateSample, at + ": duplicate template key");
      store.rows_.push_back(std::move(t));
    }
    store.recompute_stats();
    return store;
  }

  static HandStats read_stats(std::istream& in, const std::string& where = "stats") {
    HandStats s;
    std::string line;
    int lineno = 0, seen = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.rfind("hand,", 0) == 0) continue;
      const std::string at = where + ":" + std::to_string(lineno);
      const auto cells = detail::split_csv(line);
      if (cells.size() != 2 + kFeatureCount) fail(Errc::ParseError, at + ": wrong field count");
      FeatureStats& fs = parse_side(cells[0]) == HandSide::Left ? s.left : s.right;
      FeatureValues* dst = cells[1] == "mean" ? &fs.mean : cells[1] == "sigma" ? &fs.sigma : nullptr;
      if (!dst) fail(Errc::ParseError, at + ": unknown statistic '" + cells[1] + "'");
      for (std::size_t j = 0; j < kFeatureCount; ++j) (*dst)[j] = detail::parse_double(cells[2 + j], at);
      ++seen;
    }
    if (seen != 4) fail(Errc::ParseError, where + ": expected mean and sigma rows for both hands");
    return s;
  }

  /// A missing file is an empty store. Statistics come from the sidecar when
  /// present, otherwise they are recomputed from the rows.
  static TemplateStore load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open " + path.string());
    TemplateStore store = read_csv(in, path.string());
    if (std::ifstream sin(stats_path(path)); sin) store.stats_ = read_stats(sin, stats_path(path));
    return store;
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
      std::ofstream out(path);
      if (!out) fail(Errc::IoError, "cannot write " + path.string());
      write_csv(out);
    }
    std::ofstream out(stats_path(path));
    if (!out) fail(Errc::IoError, "cannot write " + stats_path(path));
    write_stats(out);
  }

  friend bool operator==(const TemplateStore&, const TemplateStore&) = default;

 private:
  std::vector<StoredTemplate> rows_;
  HandStats stats_;
};

}  // namespace handfuse
