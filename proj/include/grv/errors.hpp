#pragma once

#include <stdexcept>
#include <string>

namespace grv {

// Error taxonomy maps onto the CLI exit codes:
//   ValidationError / BudgetError -> 2, NumericError (and subclasses) -> 3, IoError -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad inputs: wrong shapes, out-of-domain values, malformed configs.
struct ValidationError : Error {
    using Error::Error;
};

// A precondition on problem size was exceeded (e.g. exhaustive enumeration for N > 9).
struct BudgetError : ValidationError {
    using ValidationError::ValidationError;
};

// Numerical failure: singular covariance, eigensolver breakdown, inconsistent statistic.
struct NumericError : Error {
    using Error::Error;
};

// Structurally degenerate input: zero-norm Gram, constant vector under a correlation
// distance, vanishing permutation variance. Callers may fall back to permutation tests.
struct DegenerateInputError : NumericError {
    using NumericError::NumericError;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace grv
