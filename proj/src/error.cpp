#include "featspace/error.hpp"

namespace featspace {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::CollinearPlaneUndefined: return "CollinearPlaneUndefined";
    case ErrorCode::PlaneMismatch: return "PlaneMismatch";
    case ErrorCode::DegenerateHead: return "DegenerateHead";
    case ErrorCode::BoundaryTie: return "BoundaryTie";
    case ErrorCode::TooFewClasses: return "TooFewClasses";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::DegenerateCentroid: return "DegenerateCentroid";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::ClassMismatch: return "ClassMismatch";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EvenK: return "EvenK";
    case ErrorCode::InsufficientInstances: return "InsufficientInstances";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::AlignmentMismatch: return "AlignmentMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::DuplicateClassName: return "DuplicateClassName";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace featspace
