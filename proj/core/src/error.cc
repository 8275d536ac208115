#include "triage/error.h"

namespace triage {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyAfterStrip: return "EmptyAfterStrip";
    case ErrorCode::kEmbedderUnavailable: return "EmbedderUnavailable";
    case ErrorCode::kInvalidTarget: return "InvalidTarget";
    case ErrorCode::kUnprobedTopic: return "UnprobedTopic";
    case ErrorCode::kInfeasiblePlan: return "InfeasiblePlan";
    case ErrorCode::kQuotaExceedsCluster: return "QuotaExceedsCluster";
    case ErrorCode::kSingleClassDataset: return "SingleClassDataset";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSpanNotFound: return "SpanNotFound";
    case ErrorCode::kAmbiguousSpan: return "AmbiguousSpan";
    case ErrorCode::kEmptyResidual: return "EmptyResidual";
    case ErrorCode::kSpanLacksSignal: return "SpanLacksSignal";
    case ErrorCode::kPositionOutOfBounds: return "PositionOutOfBounds";
    case ErrorCode::kDomainMismatch: return "DomainMismatch";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kLeakageDetected: return "LeakageDetected";
    case ErrorCode::kNoDataset: return "NoDataset";
    case ErrorCode::kPreviousIncomplete: return "PreviousIncomplete";
    case ErrorCode::kRatioUnreachable: return "RatioUnreachable";
    case ErrorCode::kUnknownRecord: return "UnknownRecord";
    case ErrorCode::kConflictPending: return "ConflictPending";
    case ErrorCode::kInvalidPhase: return "InvalidPhase";
    case ErrorCode::kQueueIncomplete: return "QueueIncomplete";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnauthorized: return "Unauthorized";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace triage
