#ifndef PSC_ERRORS_HPP
#define PSC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace psc {

// A ferroelectric/internal capacitance pair that violates |C_ferro| > C_internal
// cannot implement hysteresis-free logic; device operations refuse it.
struct HysteresisViolation : std::domain_error {
    using std::domain_error::domain_error;
};

struct TooFewSamples : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LengthMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ZeroSpan : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DigestMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Noise calibration could not bracket or reach the requested crossing.
struct Unachievable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace psc

#endif
