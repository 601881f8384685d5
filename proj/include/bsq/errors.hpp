#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bsq {

enum class ErrorKind {
    DegenerateLattice,
    NonSolvable,
    SmallDivisor,
    NotElliptic,
    NoConvergence,
    InvalidModel,
    NoContraction,
    MaxIterations,
    ResolutionTooLow,
    InsufficientSamples,
    NewtonDiverged,
    JacobianSingular,
    FDStepTooLarge,
    ZeroOnContour,
    PhaseJump,
    DegenerateCoupling,
    NonInjective,
    OpenLevelSet,
    OutOfRange,
    ConfigInvalid,
    IoError,
};

constexpr std::string_view error_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DegenerateLattice: return "DegenerateLattice";
        case ErrorKind::NonSolvable: return "NonSolvable";
        case ErrorKind::SmallDivisor: return "SmallDivisor";
        case ErrorKind::NotElliptic: return "NotElliptic";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::InvalidModel: return "InvalidModel";
        case ErrorKind::NoContraction: return "NoContraction";
        case ErrorKind::MaxIterations: return "MaxIterations";
        case ErrorKind::ResolutionTooLow: return "ResolutionTooLow";
        case ErrorKind::InsufficientSamples: return "InsufficientSamples";
        case ErrorKind::NewtonDiverged: return "NewtonDiverged";
        case ErrorKind::JacobianSingular: return "JacobianSingular";
        case ErrorKind::FDStepTooLarge: return "FDStepTooLarge";
        case ErrorKind::ZeroOnContour: return "ZeroOnContour";
        case ErrorKind::PhaseJump: return "PhaseJump";
        case ErrorKind::DegenerateCoupling: return "DegenerateCoupling";
        case ErrorKind::NonInjective: return "NonInjective";
        case ErrorKind::OpenLevelSet: return "OpenLevelSet";
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Short scientific notation for error messages.
inline std::string format_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

/// Every failure raised by the library carries a kind so callers (and the CLI
/// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_name(kind)) + ": " + message), kind_(kind), message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace bsq
