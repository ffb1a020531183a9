#ifndef PSC_DEVICE_HPP
#define PSC_DEVICE_HPP

#include <filesystem>
#include <utility>
#include <vector>

namespace psc::device {

// Ferroelectric + internal gate capacitance of an NCFET, in farads.
// c_ferro is negative by convention; c_internal positive.
struct CapacitancePair {
    double c_ferro;
    double c_internal;
};

// Tabulated internal-node voltage against gate voltage, volts. Grid must be
// strictly increasing and start at 0.
struct GainCurve {
    std::vector<double> v_gate;
    std::vector<double> v_internal;

    void validate() const; // throws TooFewSamples / ConfigError

    static GainCurve from_csv(const std::filesystem::path& file);
    void to_csv(const std::filesystem::path& file) const;
};

// Series capacitance of the ferro/internal stack. Exceeds c_internal whenever
// the hysteresis-free condition |c_ferro| > c_internal holds; throws
// HysteresisViolation otherwise.
double series_capacitance(const CapacitancePair& pair);

// Internal voltage amplification |C_ferro| / (|C_ferro| - C_internal), > 1 for
// any hysteresis-free pair.
double voltage_gain(const CapacitancePair& pair);

// dV_internal/dV_gate on the curve's own grid: central differences at interior
// points, one-sided at the ends.
std::vector<std::pair<double, double>> differential_gain(const GainCurve& curve);

// Trapezoidal mean of the differential gain over [0, V_G]. On a uniform grid
// this telescopes to the endpoint slope exactly.
double average_gain(const GainCurve& curve);

} // namespace psc::device

#endif
