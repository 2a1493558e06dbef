#pragma once

#include <stdexcept>
#include <string>

namespace evarport {

enum class ErrorCode {
    InvalidArgument,
    ExponentOverflow,
    SingularCovariance,
    TruncationBudgetExceeded,
    EmptySample,
    NegativeQuadraticForm,
    NoInteriorMinimum,
    InfeasibleTarget,
    SolverStall,
    SingularG,
    AllStartsFailed,
    ParseError,
    NonPositivePrice,
    EmptyIntersection,
    TooFewRows,
};

const char* error_code_name(ErrorCode code);

/// Library-wide exception carrying a machine-readable code.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace evarport
