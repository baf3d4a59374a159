#include "capflow/errors.hpp"

namespace capflow {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NoStationaryCap: return "NoStationaryCap";
        case ErrorKind::OffsetOutOfChart: return "OffsetOutOfChart";
        case ErrorKind::DegenerateMetric: return "DegenerateMetric";
        case ErrorKind::ContactNotPlanar: return "ContactNotPlanar";
        case ErrorKind::AngleDegenerate: return "AngleDegenerate";
        case ErrorKind::InvalidMode: return "InvalidMode";
        case ErrorKind::SolverFailure: return "SolverFailure";
        case ErrorKind::ComplexSpectrum: return "ComplexSpectrum";
        case ErrorKind::NotHalfsphere: return "NotHalfsphere";
        case ErrorKind::StepRejected: return "StepRejected";
        case ErrorKind::DegenerateFit: return "DegenerateFit";
        case ErrorKind::InsufficientDecay: return "InsufficientDecay";
    }
    return "Unknown";
}

}  // namespace capflow
