#include "bitalloc/error.hpp"

namespace bitalloc {

ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo:
      return ErrorCategory::kIo;
    case ErrorCode::kMalformedHeader:
    case ErrorCode::kTruncatedBody:
    case ErrorCode::kMissingProperty:
      return ErrorCategory::kParse;
    case ErrorCode::kInfeasibleStart:
    case ErrorCode::kInfeasibleBudget:
      return ErrorCategory::kInfeasible;
    case ErrorCode::kNewtonNonConvergence:
    case ErrorCode::kDomainError:
      return ErrorCategory::kNumerical;
    default:
      return ErrorCategory::kValidation;
  }
}

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformedHeader: return "malformed_header";
    case ErrorCode::kTruncatedBody: return "truncated_body";
    case ErrorCode::kMissingProperty: return "missing_property";
    case ErrorCode::kCoordinateOutOfRange: return "coordinate_out_of_range";
    case ErrorCode::kInvalidCloud: return "invalid_cloud";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kUndefinedScc: return "undefined_scc";
    case ErrorCode::kDegenerateProbes: return "degenerate_probes";
    case ErrorCode::kNonPositiveRate: return "non_positive_rate";
    case ErrorCode::kNonMonotoneRate: return "non_monotone_rate";
    case ErrorCode::kCollinearProbes: return "collinear_probes";
    case ErrorCode::kInvalidModel: return "invalid_model";
    case ErrorCode::kInfeasibleStart: return "infeasible_start";
    case ErrorCode::kInfeasibleBudget: return "infeasible_budget";
    case ErrorCode::kDomainError: return "domain_error";
    case ErrorCode::kNewtonNonConvergence: return "newton_non_convergence";
    case ErrorCode::kDegenerateGrid: return "degenerate_grid";
    case ErrorCode::kNonOverlappingRates: return "non_overlapping_rates";
  }
  return "unknown";
}

std::string_view to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kParse: return "parse";
    case ErrorCategory::kValidation: return "validation";
    case ErrorCategory::kInfeasible: return "infeasible";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kNumerical: return "numerical";
  }
  return "unknown";
}

int exit_code_of(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kParse:
    case ErrorCategory::kValidation:
      return 2;
    case ErrorCategory::kInfeasible:
      return 3;
    case ErrorCategory::kIo:
      return 4;
    case ErrorCategory::kNumerical:
      return 1;
  }
  return 1;
}

}  // namespace bitalloc
