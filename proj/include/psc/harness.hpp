#ifndef PSC_HARNESS_HPP
#define PSC_HARNESS_HPP

#include "psc/aes.hpp"
#include "psc/power.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace psc::harness {

// Full experiment description. Set size at step s (1-based) is 2*step_stride*s,
// so step_stride=1 reproduces the 2,4,...,2N scheme and step_stride=10 the desk
// preset's 20,40,...,2000.
struct ExperimentConfig {
    std::string preset = "custom"; // desk | paper | custom
    std::size_t key_count = 0;
    std::size_t text_count = 0;
    std::size_t step_count = 0;
    std::size_t sets_per_step = 0;
    std::size_t trial_count = 0;
    std::size_t step_stride = 1;
    std::vector<std::string> profiles;
    // Noise std-dev interpreted at built-in FinFET scale; each profile gets
    // sigma * rise_switching(profile) / rise_switching(finfet), i.e. synthetic
    // residual-activity noise scales with the technology's 0->1 switching power.
    power::NoiseConfig noise;
    std::uint64_t master_seed = 0;
    std::vector<double> thresholds = {0.5, 0.9, 0.999};
    int workers = 0; // OpenMP thread cap; 0 keeps the runtime default
    // Optional non-builtin profiles, matched by name against `profiles`.
    std::vector<power::TechnologyProfile> profile_overrides;

    std::size_t set_size(std::size_t step) const { return 2 * step_stride * step; }
    void validate() const; // throws ConfigError naming the failing invariant

    const power::TechnologyProfile& resolve_profile(const std::string& name) const;

    static ExperimentConfig desk(std::uint64_t master_seed);
    static ExperimentConfig paper(std::uint64_t master_seed);
};

std::vector<aes::Key> generate_keys(std::uint64_t master_seed, std::size_t count);
std::vector<aes::Block> generate_texts(std::uint64_t master_seed, std::size_t count);

// One trial's family of random trace-index sets of increasing size. Sets are
// regenerated on demand from hierarchical stream keys, so nothing is stored
// and every rerun (any profile, any worker count) sees identical sets.
class PermutationBatch {
  public:
    PermutationBatch(std::uint64_t master_seed, std::size_t batch_id, std::size_t text_count,
                     std::size_t step_count, std::size_t sets_per_step, std::size_t step_stride);

    std::size_t batch_id() const { return batch_id_; }
    std::size_t step_count() const { return step_count_; }
    std::size_t sets_per_step() const { return sets_per_step_; }
    std::size_t text_count() const { return text_count_; }
    std::size_t set_size(std::size_t step) const { return 2 * step_stride_ * step; }

    // Indices of one set; step is 1-based, set 0-based. Sampling is without
    // replacement. The scratch overload avoids allocation in hot loops.
    std::vector<std::uint32_t> set_indices(std::size_t step, std::size_t set) const;
    void set_indices(std::size_t step, std::size_t set, std::vector<std::uint32_t>& out,
                     std::vector<std::uint32_t>& scratch) const;

    // FNV-1a over the full index stream; equality across reruns/profiles is
    // the cross-technology fairness check.
    std::uint64_t digest() const;

    // Text listing: header records the master seed and dimensions, then one
    // space-separated set per line. Intended for inspection at small scales.
    void write_file(const std::filesystem::path& file) const;

  private:
    std::uint64_t master_seed_;
    std::size_t batch_id_;
    std::size_t text_count_;
    std::size_t step_count_;
    std::size_t sets_per_step_;
    std::size_t step_stride_;
};

std::vector<PermutationBatch> generate_batches(std::uint64_t master_seed,
                                               const ExperimentConfig& config);

struct SuccessCurve {
    std::string profile_name;
    std::vector<std::size_t> set_size; // per step
    std::vector<double> rate;          // pooled over keys and trials
};

// Traces at the first step whose success rate reaches threshold; nullopt when
// the curve never gets there.
std::optional<std::size_t> threshold_crossing(const SuccessCurve& curve, double threshold);

struct ThresholdRow {
    std::string profile;
    double threshold = 0.0;
    std::string trial; // "1", "2", ... or "pooled"
    double avg_traces = 0.0;
    double std_traces = 0.0;  // sample std-dev (n-1) over keys
    std::size_t reached = 0;  // keys whose per-key curve reached the threshold
    std::size_t keys = 0;
};

struct ProfileOutcome {
    std::string profile_name;
    double applied_sigma = 0.0;
    SuccessCurve curve;
    // successes[trial][key][step] out of sets_per_step runs each
    std::vector<std::vector<std::vector<std::uint32_t>>> successes;
    std::uint64_t batch_digest = 0;
    std::size_t clamped = 0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ProfileOutcome> profiles;
    std::vector<ThresholdRow> stats;

    const ProfileOutcome& outcome(const std::string& profile_name) const;
    // Mean over keys of per-key crossings (pooled across trials) at one
    // threshold; nullopt if no key reached it.
    std::optional<double> mean_crossing(const std::string& profile_name,
                                        double threshold) const;
};

// Runs the full protocol: simulate traces per (key, profile), replay every
// batch index set through the CPA attack, aggregate success curves and
// Table-style crossing statistics. Deterministic for a fixed config,
// independent of worker count.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_curve_csv(const SuccessCurve& curve, const std::filesystem::path& file);
void write_stats_csv(const std::vector<ThresholdRow>& rows, const std::filesystem::path& file);

struct CalibrationConfig {
    std::size_t key_count = 2;
    std::size_t text_count = 2000;
    std::size_t step_count = 100;
    std::size_t sets_per_step = 24;
    std::size_t step_stride = 10;
    std::size_t trial_count = 1;
    std::size_t max_iterations = 26;
};

struct CalibrationPoint {
    double sigma = 0.0;
    std::optional<std::size_t> crossing;
};

struct CalibrationResult {
    double sigma = 0.0;
    std::size_t achieved_crossing = 0;
    bool monotone = true; // crossing nondecreasing along the sigma trajectory
    std::vector<CalibrationPoint> trajectory;
};

// Bisects the noise level until `profile`'s threshold crossing lands within
// +-10% of target_crossing at the reduced-scale calibration config. Throws
// Unachievable when no sigma in the bracket can reach the target.
CalibrationResult calibrate_noise(const power::TechnologyProfile& profile,
                                  std::size_t target_crossing, double threshold,
                                  std::uint64_t master_seed,
                                  const CalibrationConfig& cal = {});

} // namespace psc::harness

#endif
