#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace styleval {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidImage,
  kBackendCapability,
  kNumerical,
  kFormat,
  kInsufficientSamples,
  kInvalidCovariance,
  kDimension,
  kLayerMismatch,
  kConstraintInfeasible,
  kNoCalibrationData,
  kNoData,
  kDegenerateVariance,
  kStyleMismatch,
  kBootstrapUnstable,
  kManifestIncomplete,
  kCampaignFull,
  kAlreadyEnrolled,
  kOutOfOrder,
  kSessionClosed,
  kNotFound,
  kParse,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Root of every error thrown by the library. `code()` is what callers switch
// on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Distinguishes the ways an embedding file can be malformed.
enum class FormatErrorKind {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kTrailingData,
  kDimMismatch,
  kBadManifest,
};

std::string_view to_string(FormatErrorKind kind);

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& message)
      : Error(ErrorCode::kFormat, std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace styleval
