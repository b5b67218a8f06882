#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace handfuse {

enum class Errc {
  InvalidInput,
  DegenerateHistogram,
  EmptyMask,
  ContourBroken,
  DegenerateShape,
  WristNotFound,
  LandmarkFailure,
  FeatureFailure,
  StatsDegenerate,
  NoMatches,
  TotalConflict,
  UnknownClass,
  EnrollmentRejected,
  DuplicateSample,
  ParamConflict,
  IoError,
  ParseError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::DegenerateHistogram: return "DegenerateHistogram";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::ContourBroken: return "ContourBroken";
    case Errc::DegenerateShape: return "DegenerateShape";
    case Errc::WristNotFound: return "WristNotFound";
    case Errc::LandmarkFailure: return "LandmarkFailure";
    case Errc::FeatureFailure: return "FeatureFailure";
    case Errc::StatsDegenerate: return "StatsDegenerate";
    case Errc::NoMatches: return "NoMatches";
    case Errc::TotalConflict: return "TotalConflict";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::EnrollmentRejected: return "EnrollmentRejected";
    case Errc::DuplicateSample: return "DuplicateSample";
    case Errc::ParamConflict: return "ParamConflict";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace handfuse
