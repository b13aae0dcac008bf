#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bitalloc {

// Every failure raised by the library carries one of these codes. The CLI maps
// the category of a code onto its exit status.
enum class ErrorCode {
  // cloud / PLY
  kIo,
  kMalformedHeader,
  kTruncatedBody,
  kMissingProperty,
  kCoordinateOutOfRange,
  kInvalidCloud,
  // generic argument validation
  kInvalidArgument,
  // metrics
  kUndefinedScc,
  // models
  kDegenerateProbes,
  kNonPositiveRate,
  kNonMonotoneRate,
  kCollinearProbes,
  // allocator
  kInvalidModel,
  kInfeasibleStart,
  kInfeasibleBudget,
  kDomainError,
  kNewtonNonConvergence,
  // simcodec
  kDegenerateGrid,
  // eval
  kNonOverlappingRates,
};

enum class ErrorCategory { kParse, kValidation, kInfeasible, kIo, kNumerical };

ErrorCategory category_of(ErrorCode code) noexcept;
std::string_view to_string(ErrorCode code) noexcept;
std::string_view to_string(ErrorCategory category) noexcept;

// Process exit status: 2 validation/parse, 3 infeasible, 4 I/O, 1 numerical.
int exit_code_of(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace bitalloc
