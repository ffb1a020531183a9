#include "psc/device.hpp"

#include "psc/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace psc::device {

namespace {

void require_valid(const CapacitancePair& pair) {
    if (!(pair.c_internal > 0.0))
        throw std::invalid_argument("c_internal must be positive");
    if (!(pair.c_ferro < 0.0))
        throw std::invalid_argument("c_ferro must be negative");
    if (!(std::abs(pair.c_ferro) > pair.c_internal))
        throw HysteresisViolation("hysteresis-free operation requires |c_ferro| > c_internal "
                                  "(got |" +
                                  std::to_string(pair.c_ferro) + "| <= " +
                                  std::to_string(pair.c_internal) + ")");
}

} // namespace

double series_capacitance(const CapacitancePair& pair) {
    require_valid(pair);
    return (pair.c_ferro * pair.c_internal) / (pair.c_ferro + pair.c_internal);
}

double voltage_gain(const CapacitancePair& pair) {
    require_valid(pair);
    const double cf = std::abs(pair.c_ferro);
    return cf / (cf - pair.c_internal);
}

void GainCurve::validate() const {
    if (v_gate.size() != v_internal.size())
        throw LengthMismatch("gain curve columns differ in length");
    if (v_gate.size() < 2)
        throw TooFewSamples("gain curve needs at least 2 samples, got " +
                            std::to_string(v_gate.size()));
    if (v_gate.front() != 0.0)
        throw ConfigError("gain curve must start at v_gate = 0");
    for (std::size_t i = 1; i < v_gate.size(); ++i)
        if (!(v_gate[i] > v_gate[i - 1]))
            throw ConfigError("gain curve v_gate not strictly increasing at sample " +
                              std::to_string(i));
}

std::vector<std::pair<double, double>> differential_gain(const GainCurve& curve) {
    curve.validate();
    const auto& x = curve.v_gate;
    const auto& y = curve.v_internal;
    const std::size_t n = x.size();

    std::vector<std::pair<double, double>> out(n);
    out[0] = {x[0], (y[1] - y[0]) / (x[1] - x[0])};
    out[n - 1] = {x[n - 1], (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])};
    for (std::size_t i = 1; i + 1 < n; ++i) {
        // three-point central difference on a possibly non-uniform grid;
        // exact for quadratics
        const double hl = x[i] - x[i - 1];
        const double hr = x[i + 1] - x[i];
        const double d = (y[i + 1] * hl * hl - y[i - 1] * hr * hr +
                          y[i] * (hr * hr - hl * hl)) /
                         (hl * hr * (hl + hr));
        out[i] = {x[i], d};
    }
    return out;
}

double average_gain(const GainCurve& curve) {
    const auto gain = differential_gain(curve); // validates
    const double span = curve.v_gate.back();
    if (span == 0.0)
        throw ZeroSpan("gain curve spans zero gate voltage");

    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < gain.size(); ++i) {
        const double h = gain[i + 1].first - gain[i].first;
        integral += 0.5 * (gain[i].second + gain[i + 1].second) * h;
    }
    return integral / span;
}

GainCurve GainCurve::from_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot open gain curve file: " + file.string());

    GainCurve curve;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        if (first) { // one-line header
            first = false;
            continue;
        }
        std::istringstream ls(line);
        std::string a, b;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b))
            throw IoError("bad gain curve row at line " + std::to_string(lineno) + " of " +
                          file.string());
        try {
            curve.v_gate.push_back(std::stod(a));
            curve.v_internal.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw IoError("non-numeric gain curve value at line " + std::to_string(lineno) +
                          " of " + file.string());
        }
    }
    curve.validate();
    return curve;
}

void GainCurve::to_csv(const std::filesystem::path& file) const {
    validate();
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write gain curve file: " + file.string());
    out << "v_gate,v_internal\n";
    char buf[64];
    for (std::size_t i = 0; i < v_gate.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", v_gate[i], v_internal[i]);
        out << buf;
    }
}

} // namespace psc::device
