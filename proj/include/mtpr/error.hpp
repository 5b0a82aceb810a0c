#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtpr {

enum class ErrorCode {
  kSizing,
  kParameter,
  kDimensionMismatch,
  kMatrix,
  kOptimization,
  kConsistency,
  kStructure,
  kInconsistentSystem,
  kRecoveryQuality,
  kInsufficientSamples,
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kChecksum,
  kInternal,
};

std::string_view to_string(ErrorCode code);

/// Base of every exception thrown by the library. The code lets the CLI map
/// failures onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True for codes that describe bad input files or bad parameters, as opposed
/// to a run that executed but failed to recover anything.
bool is_input_error(ErrorCode code);

}  // namespace mtpr
