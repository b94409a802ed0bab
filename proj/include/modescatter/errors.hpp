#pragma once

#include <stdexcept>
#include <string>

namespace modescatter {

/// Base class for every error raised by the library. Each subclass maps to a
/// distinct process exit code so the CLI can surface failures to CI.
class Error : public std::runtime_error {
public:
    Error(const std::string& what, int exit_code)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

#define MODESCATTER_DEFINE_ERROR(Name, Code)                                   \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name ": " + what, Code) {} \
    };

MODESCATTER_DEFINE_ERROR(ParseError, 2)
MODESCATTER_DEFINE_ERROR(ThresholdCollisionError, 3)
MODESCATTER_DEFINE_ERROR(ThresholdError, 10)
MODESCATTER_DEFINE_ERROR(ConvergenceError, 11)
MODESCATTER_DEFINE_ERROR(ModeCutoffError, 12)
MODESCATTER_DEFINE_ERROR(BasisMismatchError, 13)
MODESCATTER_DEFINE_ERROR(PositivityError, 15)
MODESCATTER_DEFINE_ERROR(NoBoundStateError, 16)
MODESCATTER_DEFINE_ERROR(IncompleteDataError, 17)
MODESCATTER_DEFINE_ERROR(InsufficientSamplesError, 18)
MODESCATTER_DEFINE_ERROR(PoleInWindowError, 19)
MODESCATTER_DEFINE_ERROR(ExtrapolationRangeError, 20)
MODESCATTER_DEFINE_ERROR(IllConditionedSpanError, 22)
MODESCATTER_DEFINE_ERROR(BandCoverageError, 23)
MODESCATTER_DEFINE_ERROR(CFLViolationError, 24)
MODESCATTER_DEFINE_ERROR(InvalidScenarioError, 25)

#undef MODESCATTER_DEFINE_ERROR

/// Raised when the factorized operator is numerically singular. Carries the
/// condition estimate that triggered the abort.
class SingularSystemError : public Error {
public:
    SingularSystemError(const std::string& what, double condition)
        : Error("SingularSystemError: " + what, 14), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Lower-domain Dirichlet problem is near an eigenvalue (k^2 in S_T).
class STConditionError : public Error {
public:
    STConditionError(const std::string& what, double condition)
        : Error("STConditionError: " + what, 21), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Exit code used by the CLI when an audit exceeds its tolerance.
inline constexpr int kAuditFailureExitCode = 1;

}  // namespace modescatter
