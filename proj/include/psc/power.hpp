#ifndef PSC_POWER_HPP
#define PSC_POWER_HPP

#include "psc/aes.hpp"
#include "psc/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace psc::power {

// Per-register-bit power parameters of one technology setup, watts. The
// t01:t10:t_clk ratios are what drives attack outcomes; absolute scale cancels
// in the Pearson correlation.
struct TechnologyProfile {
    std::string name;
    double t01_total = 0.0; // power per 0->1 bit, clock edge included
    double t10_total = 0.0; // power per 1->0 bit
    double t_clk = 0.0;     // clock-rise power per stable bit
    double p_static = 0.0;  // static/leakage power
    double vdd = 0.0;       // volts, metadata
    double freq = 0.0;      // hertz, metadata

    // Switching-only component of a rising bit (the Table-style "Switching"
    // row); the harness scales synthetic noise by this.
    double rise_switching() const { return t01_total - t_clk; }

    void validate() const; // throws ConfigError listing the failing invariant

    // Every parameter multiplied by lambda; rankings downstream are invariant.
    TechnologyProfile scaled(double lambda, const std::string& new_name) const;
};

// The five built-in setups: FinFET baseline plus TFE1..TFE4. FinFET and TFE4
// carry the characterized register power values; TFE1-TFE3 are synthesized by
// quadratic interpolation in layer thickness (unpublished; overridable via
// profile files).
const std::vector<TechnologyProfile>& builtin_profiles();

// Lookup by case-sensitive name ("finfet", "tfe1", ... "tfe4").
const TechnologyProfile& builtin_profile(const std::string& name);

struct NoiseConfig {
    double gaussian_sigma = 0.0; // W, std-dev of the additive term
    std::uint64_t seed_slot = 0; // distinguishes independent noise streams
};

struct TraceEntry {
    aes::Block plaintext{};
    aes::Block ciphertext{};
    double peak_power = 0.0;
};

// Aligned (plaintext, ciphertext, clock-edge peak power) triples for one key
// under one technology.
struct TraceSet {
    std::string profile_name;
    aes::Key key{};
    std::vector<TraceEntry> entries;
    std::size_t clamped = 0; // noisy samples clamped up to p_static
};

struct PeakSample {
    double watts = 0.0;
    bool clamped = false;
};

// Zero-delay clock-edge peak power for one encryption:
//   n01*t01_total + n10*t10_total + n_stable*t_clk + p_static + eps
// with eps ~ Normal(0, sigma) drawn from rng; non-positive noisy values clamp
// to p_static.
PeakSample simulate_peak_power(const aes::TransitionCount& tc, const TechnologyProfile& profile,
                               const NoiseConfig& noise, rng::Stream& rng);

// Encrypts every text and records its last-round peak power. Noise for entry i
// comes from a stream keyed (seed, seed_slot, i), so results do not depend on
// evaluation order or thread count.
TraceSet simulate_trace_set(const aes::Key& key, std::span<const aes::Block> texts,
                            const TechnologyProfile& profile, const NoiseConfig& noise,
                            std::uint64_t seed);

// CSV with header index,plaintext_hex,ciphertext_hex,power_watts; power at 9
// significant digits. Leading '#' lines carry profile name and key.
void write_trace_csv(const TraceSet& traces, const std::filesystem::path& file);
TraceSet read_trace_csv(const std::filesystem::path& file);

// JSON profile files (the six fields plus name).
void write_profile_json(const TechnologyProfile& profile, const std::filesystem::path& file);
TechnologyProfile read_profile_json(const std::filesystem::path& file);

} // namespace psc::power

#endif
