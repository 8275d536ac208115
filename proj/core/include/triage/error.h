#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace triage {

// Every failure the library reports is an Error carrying one of these codes.
// The enumerator names double as the wire-level error codes of the service.
enum class ErrorCode {
  kInvalidArgument,
  kEmptyAfterStrip,
  kEmbedderUnavailable,
  kInvalidTarget,
  kUnprobedTopic,
  kInfeasiblePlan,
  kQuotaExceedsCluster,
  kSingleClassDataset,
  kNonFiniteLoss,
  kDimensionMismatch,
  kSpanNotFound,
  kAmbiguousSpan,
  kEmptyResidual,
  kSpanLacksSignal,
  kPositionOutOfBounds,
  kDomainMismatch,
  kSingleClass,
  kLeakageDetected,
  kNoDataset,
  kPreviousIncomplete,
  kRatioUnreachable,
  kUnknownRecord,
  kConflictPending,
  kInvalidPhase,
  kQueueIncomplete,
  kBackendUnavailable,
  kNotFound,
  kUnauthorized,
  kInvariantViolation,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace triage
