#pragma once

#include <stdexcept>
#include <string>

namespace affinelab {

// Input outside the documented domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Numerical procedure failed to reach its accuracy target.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QuadratureError : NumericError {
    using NumericError::NumericError;
};

}  // namespace affinelab
