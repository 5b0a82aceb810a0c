#include "mtpr/error.hpp"

namespace mtpr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSizing: return "sizing";
    case ErrorCode::kParameter: return "parameter";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kMatrix: return "matrix";
    case ErrorCode::kOptimization: return "optimization";
    case ErrorCode::kConsistency: return "consistency";
    case ErrorCode::kStructure: return "structure";
    case ErrorCode::kInconsistentSystem: return "inconsistent-system";
    case ErrorCode::kRecoveryQuality: return "recovery-quality";
    case ErrorCode::kInsufficientSamples: return "insufficient-m";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSizing:
    case ErrorCode::kParameter:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kIo:
    case ErrorCode::kBadMagic:
    case ErrorCode::kUnsupportedVersion:
    case ErrorCode::kTruncated:
    case ErrorCode::kChecksum:
      return true;
    default:
      return false;
  }
}

}  // namespace mtpr
