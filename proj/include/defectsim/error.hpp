#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace defectsim {

enum class ErrorCode {
  InvalidArgument,
  InvalidValue,
  EmptyRaster,
  FileNotFound,
  UnsupportedFormat,
  DimensionMismatch,
  IoError,
  // photometric stereo
  InvalidSlant,
  TooFewLights,
  InvalidLightDirection,
  RankDeficientRig,
  NoValidPixels,
  // texture synthesis
  MapTooSmall,
  EmptyInput,
  EmptyDictionary,
  EmptyQueryMask,
  SeedLargerThanTarget,
  SeedTooSmall,
  // defects
  InvalidParams,
  InvalidRange,
  ResolutionTooLow,
  // rendering
  InvalidMesh,
  EmptyMesh,
  NoLights,
  InvalidScene,
  FootprintOutsideChart,
  SubdivisionBudgetExceeded,
  // dataset
  PlacementFailed,
  EmptyManifest,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::EmptyRaster: return "EmptyRaster";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidSlant: return "InvalidSlant";
    case ErrorCode::TooFewLights: return "TooFewLights";
    case ErrorCode::InvalidLightDirection: return "InvalidLightDirection";
    case ErrorCode::RankDeficientRig: return "RankDeficientRig";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::MapTooSmall: return "MapTooSmall";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyDictionary: return "EmptyDictionary";
    case ErrorCode::EmptyQueryMask: return "EmptyQueryMask";
    case ErrorCode::SeedLargerThanTarget: return "SeedLargerThanTarget";
    case ErrorCode::SeedTooSmall: return "SeedTooSmall";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::ResolutionTooLow: return "ResolutionTooLow";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::NoLights: return "NoLights";
    case ErrorCode::InvalidScene: return "InvalidScene";
    case ErrorCode::FootprintOutsideChart: return "FootprintOutsideChart";
    case ErrorCode::SubdivisionBudgetExceeded: return "SubdivisionBudgetExceeded";
    case ErrorCode::PlacementFailed: return "PlacementFailed";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// what() without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail
}  // namespace defectsim
