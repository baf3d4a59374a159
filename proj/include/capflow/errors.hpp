#pragma once

#include <stdexcept>
#include <string>

namespace capflow {

enum class ErrorKind {
    InvalidArgument,
    NoStationaryCap,
    OffsetOutOfChart,
    DegenerateMetric,
    ContactNotPlanar,
    AngleDegenerate,
    InvalidMode,
    SolverFailure,
    ComplexSpectrum,
    NotHalfsphere,
    StepRejected,
    DegenerateFit,
    InsufficientDecay,
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` is the machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), reason_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    ErrorKind kind_;
    std::string reason_;
};

}  // namespace capflow
