#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace poisson_embed {

enum class ErrorCode {
    InvalidArgument,
    NonSpdMetric,
    NonPositiveConformalFactor,
    DependentInputs,
    SingularJacobian,
    DegenerateMesh,
    DegenerateArc,
    InvertedTriangle,
    NotBoundaryFixing,
    FactorizationFailed,
    BoundaryNodeRequested,
    IllConditioned,
    InfeasibleTrace,
    XInsideW,
    RankDeficientGradients,
    RankDeficientStencil,
    NullspaceNotOneDim,
    NotPositiveDefinite,
    LargeCurlResidual,
    DegenerateGradient,
    NotConformalAtTolerance,
    DegenerateTangent,
    NewtonDiverged,
    SingularLinearization,
    AmplitudeCap,
    ProbeOutsideSmallData,
    CutoffOverlap,
    ConfigError,
    MissingBaseline,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can branch on the failure kind.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace poisson_embed
