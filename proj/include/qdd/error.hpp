#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qdd {

enum class ErrorKind {
    invalid_argument,
    singular_matrix,
    domain_error,
    no_convergence,
    positivity_violation,
    degenerate_shift,
    neutrality_violation,
    step_failure,
    missing_channel,
    nonpositive_value,
    insufficient_samples,
    config_invalid,
    io_error,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::singular_matrix: return "singular-matrix";
        case ErrorKind::domain_error: return "domain-error";
        case ErrorKind::no_convergence: return "no-convergence";
        case ErrorKind::positivity_violation: return "positivity-violation";
        case ErrorKind::degenerate_shift: return "degenerate-shift";
        case ErrorKind::neutrality_violation: return "neutrality-violation";
        case ErrorKind::step_failure: return "step-failure";
        case ErrorKind::missing_channel: return "missing-channel";
        case ErrorKind::nonpositive_value: return "nonpositive-value";
        case ErrorKind::insufficient_samples: return "insufficient-samples";
        case ErrorKind::config_invalid: return "config-invalid";
        case ErrorKind::io_error: return "io-error";
    }
    return "unknown";
}

/// Exception carrying a machine-readable error kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

/// Step failure with the simulation time at which it happened.
class StepFailure : public Error {
public:
    StepFailure(double time, const std::string& message)
        : Error(ErrorKind::step_failure, message + " (t = " + std::to_string(time) + ")"), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace qdd
