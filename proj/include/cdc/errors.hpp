#pragma once

#include <stdexcept>
#include <string>

namespace cdc {

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DenoiserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a trajectory aborts mid-chain; carries the reverse step.
struct TrajectoryError : std::runtime_error {
    int step;
    TrajectoryError(int step_, const std::string& what_)
        : std::runtime_error("step " + std::to_string(step_) + ": " + what_), step(step_) {}
};

}  // namespace cdc
