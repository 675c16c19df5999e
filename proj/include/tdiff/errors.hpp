#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tdiff {

/// Bad parameters or inputs that violate a documented precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A requested computation would exceed a configured resource cap.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical breakdown (zero pivot, non-finite likelihood, ...).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, std::ptrdiff_t step = -1)
        : std::runtime_error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what),
          step_(step) {}

    std::ptrdiff_t step() const noexcept { return step_; }

private:
    std::ptrdiff_t step_;
};

/// Euler–Maruyama produced a non-finite state.
class SimulationDiverged : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace tdiff
