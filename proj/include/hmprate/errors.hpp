#pragma once

#include <stdexcept>
#include <string>

namespace hmprate {

/// Base class for all library errors. `category()` returns a stable,
/// machine-readable name used by the CLI for exit reporting.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual const char* category() const noexcept { return "Error"; }
};

#define HMPRATE_DEFINE_ERROR(Name)                                  \
    struct Name : Error {                                           \
        using Error::Error;                                         \
        const char* category() const noexcept override { return #Name; } \
    }

HMPRATE_DEFINE_ERROR(NonPrimitiveChain);
HMPRATE_DEFINE_ERROR(NonPositiveVector);
HMPRATE_DEFINE_ERROR(ZeroEntry);
HMPRATE_DEFINE_ERROR(NotPrimitiveWithin);
HMPRATE_DEFINE_ERROR(ZeroObservationProbability);
HMPRATE_DEFINE_ERROR(DegenerateBelief);
HMPRATE_DEFINE_ERROR(PathTooShort);
HMPRATE_DEFINE_ERROR(AlphabetTooLarge);
HMPRATE_DEFINE_ERROR(NotPrimitive);
HMPRATE_DEFINE_ERROR(DegenerateSpectrum);
HMPRATE_DEFINE_ERROR(PiNotConstant);
HMPRATE_DEFINE_ERROR(NotFactorized);
HMPRATE_DEFINE_ERROR(InvalidPerturbation);
HMPRATE_DEFINE_ERROR(NotHighNoise);
HMPRATE_DEFINE_ERROR(NotStronglyConnected);
HMPRATE_DEFINE_ERROR(NonConvergence);
HMPRATE_DEFINE_ERROR(NoCycle);
HMPRATE_DEFINE_ERROR(ConfigError);

#undef HMPRATE_DEFINE_ERROR

/// Thrown when a model or channel description is malformed. The message
/// always starts with the path of the offending field, e.g. "P[0]".
struct ModelValidationError : Error {
    ModelValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const char* category() const noexcept override { return "ModelValidationError"; }
    const std::string& field() const noexcept { return field_; }

  private:
    std::string field_;
};

}  // namespace hmprate
