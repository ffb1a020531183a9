#include "psc/harness.hpp"

#include "psc/cpa.hpp"
#include "psc/errors.hpp"
#include "psc/manifest.hpp"
#include "psc/rng.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace psc::harness {

void ExperimentConfig::validate() const {
    if (key_count < 1)
        throw ConfigError("config: key_count must be >= 1");
    if (text_count < 2)
        throw ConfigError("config: text_count must be >= 2");
    if (step_count < 1)
        throw ConfigError("config: step_count must be >= 1");
    if (sets_per_step < 1)
        throw ConfigError("config: sets_per_step must be >= 1");
    if (trial_count < 1)
        throw ConfigError("config: trial_count must be >= 1");
    if (step_stride < 1)
        throw ConfigError("config: step_stride must be >= 1");
    if (2 * step_stride * step_count > text_count)
        throw ConfigError("config: largest set size 2*step_stride*step_count = " +
                          std::to_string(2 * step_stride * step_count) +
                          " exceeds text_count = " + std::to_string(text_count));
    if (profiles.empty())
        throw ConfigError("config: profile list is empty");
    for (const auto& name : profiles)
        resolve_profile(name); // throws if unknown
    if (thresholds.empty())
        throw ConfigError("config: thresholds list is empty");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0))
            throw ConfigError("config: thresholds must lie in (0,1]");
        if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
            throw ConfigError("config: thresholds must be strictly increasing");
    }
    if (!(noise.gaussian_sigma >= 0.0))
        throw ConfigError("config: noise sigma must be >= 0");
    if (workers < 0)
        throw ConfigError("config: workers must be >= 0");
}

const power::TechnologyProfile&
ExperimentConfig::resolve_profile(const std::string& name) const {
    for (const auto& p : profile_overrides)
        if (p.name == name)
            return p;
    return power::builtin_profile(name);
}

ExperimentConfig ExperimentConfig::desk(std::uint64_t master_seed) {
    ExperimentConfig c;
    c.preset = "desk";
    c.key_count = 3;
    c.text_count = 2000;
    c.step_count = 100;
    c.sets_per_step = 50;
    c.trial_count = 1;
    c.step_stride = 10;
    c.profiles = {"finfet", "tfe1", "tfe2", "tfe3", "tfe4"};
    c.noise.gaussian_sigma = 6.5e-6; // lands the finfet 90% crossing near 700 traces
    c.master_seed = master_seed;
    return c;
}

ExperimentConfig ExperimentConfig::paper(std::uint64_t master_seed) {
    ExperimentConfig c;
    c.preset = "paper";
    c.key_count = 10;
    c.text_count = 2000;
    c.step_count = 1000;
    c.sets_per_step = 1000;
    c.trial_count = 3;
    c.step_stride = 1;
    c.profiles = {"finfet", "tfe1", "tfe2", "tfe3", "tfe4"};
    c.noise.gaussian_sigma = 6.5e-6;
    c.master_seed = master_seed;
    return c;
}

std::vector<aes::Key> generate_keys(std::uint64_t master_seed, std::size_t count) {
    if (count < 1)
        throw ConfigError("generate_keys: count must be >= 1");
    std::vector<aes::Key> keys(count);
    for (std::size_t i = 0; i < count; ++i) {
        rng::Stream s(rng::derive(master_seed, {rng::TAG_KEYS, i}));
        for (std::size_t w = 0; w < 2; ++w) {
            std::uint64_t v = s.next_u64();
            for (std::size_t b = 0; b < 8; ++b) {
                keys[i][8 * w + b] = static_cast<std::uint8_t>(v & 0xff);
                v >>= 8;
            }
        }
    }
    return keys;
}

std::vector<aes::Block> generate_texts(std::uint64_t master_seed, std::size_t count) {
    if (count < 1)
        throw ConfigError("generate_texts: count must be >= 1");
    std::vector<aes::Block> texts(count);
    for (std::size_t i = 0; i < count; ++i) {
        rng::Stream s(rng::derive(master_seed, {rng::TAG_TEXTS, i}));
        for (std::size_t w = 0; w < 2; ++w) {
            std::uint64_t v = s.next_u64();
            for (std::size_t b = 0; b < 8; ++b) {
                texts[i][8 * w + b] = static_cast<std::uint8_t>(v & 0xff);
                v >>= 8;
            }
        }
    }
    return texts;
}

PermutationBatch::PermutationBatch(std::uint64_t master_seed, std::size_t batch_id,
                                   std::size_t text_count, std::size_t step_count,
                                   std::size_t sets_per_step, std::size_t step_stride)
    : master_seed_(master_seed), batch_id_(batch_id), text_count_(text_count),
      step_count_(step_count), sets_per_step_(sets_per_step), step_stride_(step_stride) {}

void PermutationBatch::set_indices(std::size_t step, std::size_t set,
                                   std::vector<std::uint32_t>& out,
                                   std::vector<std::uint32_t>& scratch) const {
    if (step < 1 || step > step_count_)
        throw std::out_of_range("batch step " + std::to_string(step) + " outside 1.." +
                                std::to_string(step_count_));
    if (set >= sets_per_step_)
        throw std::out_of_range("batch set " + std::to_string(set) + " outside 0.." +
                                std::to_string(sets_per_step_ - 1));
    const std::size_t k = set_size(step);

    scratch.resize(text_count_);
    std::iota(scratch.begin(), scratch.end(), 0u);
    rng::Stream s(rng::derive(master_seed_, {rng::TAG_PERM, batch_id_, step, set}));

    // partial Fisher-Yates: first k entries are a uniform sample without
    // replacement
    out.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t r = j + static_cast<std::size_t>(s.next_below(text_count_ - j));
        std::swap(scratch[j], scratch[r]);
        out[j] = scratch[j];
    }
}

std::vector<std::uint32_t> PermutationBatch::set_indices(std::size_t step,
                                                         std::size_t set) const {
    std::vector<std::uint32_t> out, scratch;
    set_indices(step, set, out, scratch);
    return out;
}

std::uint64_t PermutationBatch::digest() const {
    std::uint64_t h = io::FNV_BASIS;
    std::vector<std::uint32_t> out, scratch;
    for (std::size_t step = 1; step <= step_count_; ++step) {
        for (std::size_t set = 0; set < sets_per_step_; ++set) {
            set_indices(step, set, out, scratch);
            for (const std::uint32_t v : out)
                h = io::fnv1a64_step(h, v);
        }
    }
    return h;
}

void PermutationBatch::write_file(const std::filesystem::path& file) const {
    std::ofstream outf(file);
    if (!outf)
        throw IoError("cannot write batch file: " + file.string());
    outf << "# psc-batch v1\n";
    outf << "# master_seed," << master_seed_ << "\n";
    outf << "# batch_id," << batch_id_ << "\n";
    outf << "# text_count," << text_count_ << "\n";
    outf << "# step_count," << step_count_ << "\n";
    outf << "# sets_per_step," << sets_per_step_ << "\n";
    outf << "# step_stride," << step_stride_ << "\n";
    std::vector<std::uint32_t> out, scratch;
    for (std::size_t step = 1; step <= step_count_; ++step) {
        for (std::size_t set = 0; set < sets_per_step_; ++set) {
            set_indices(step, set, out, scratch);
            for (std::size_t j = 0; j < out.size(); ++j)
                outf << out[j] << (j + 1 < out.size() ? ' ' : '\n');
        }
    }
    if (!outf)
        throw IoError("write failed: " + file.string());
}

std::vector<PermutationBatch> generate_batches(std::uint64_t master_seed,
                                               const ExperimentConfig& config) {
    config.validate();
    std::vector<PermutationBatch> batches;
    batches.reserve(config.trial_count);
    for (std::size_t t = 0; t < config.trial_count; ++t)
        batches.emplace_back(master_seed, t, config.text_count, config.step_count,
                             config.sets_per_step, config.step_stride);
    return batches;
}

std::optional<std::size_t> threshold_crossing(const SuccessCurve& curve, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw ConfigError("threshold must lie in (0,1]");
    for (std::size_t i = 0; i < curve.rate.size(); ++i)
        if (curve.rate[i] >= threshold)
            return curve.set_size[i];
    return std::nullopt;
}

namespace {

struct KeyCrossings {
    std::vector<double> traces; // per-key crossings that were reached
    std::size_t keys = 0;
};

// avg/std (sample, n-1) over reached crossings
std::pair<double, double> avg_std(const std::vector<double>& v) {
    if (v.empty())
        return {0.0, 0.0};
    const double avg = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2)
        return {avg, 0.0};
    double ss = 0.0;
    for (const double x : v)
        ss += (x - avg) * (x - avg);
    return {avg, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<ThresholdRow> build_stats(const ExperimentConfig& cfg,
                                      const std::vector<ProfileOutcome>& outcomes) {
    std::vector<ThresholdRow> rows;
    for (const auto& oc : outcomes) {
        for (const double thr : cfg.thresholds) {
            std::vector<double> trial_avgs, trial_stds;
            std::size_t reached_total = 0;
            for (std::size_t t = 0; t < cfg.trial_count; ++t) {
                std::vector<double> crossings;
                for (std::size_t k = 0; k < cfg.key_count; ++k) {
                    const auto& per_step = oc.successes[t][k];
                    for (std::size_t s = 0; s < cfg.step_count; ++s) {
                        const double rate = static_cast<double>(per_step[s]) /
                                            static_cast<double>(cfg.sets_per_step);
                        if (rate >= thr) {
                            crossings.push_back(
                                static_cast<double>(cfg.set_size(s + 1)));
                            break;
                        }
                    }
                }
                const auto [avg, sd] = avg_std(crossings);
                ThresholdRow row;
                row.profile = oc.profile_name;
                row.threshold = thr;
                row.trial = std::to_string(t + 1);
                row.avg_traces = avg;
                row.std_traces = sd;
                row.reached = crossings.size();
                row.keys = cfg.key_count;
                rows.push_back(row);
                if (!crossings.empty()) {
                    trial_avgs.push_back(avg);
                    trial_stds.push_back(sd);
                }
                reached_total += crossings.size();
            }
            ThresholdRow pooled;
            pooled.profile = oc.profile_name;
            pooled.threshold = thr;
            pooled.trial = "pooled";
            pooled.avg_traces = trial_avgs.empty()
                                    ? 0.0
                                    : std::accumulate(trial_avgs.begin(), trial_avgs.end(), 0.0) /
                                          static_cast<double>(trial_avgs.size());
            pooled.std_traces = trial_stds.empty()
                                    ? 0.0
                                    : std::accumulate(trial_stds.begin(), trial_stds.end(), 0.0) /
                                          static_cast<double>(trial_stds.size());
            pooled.reached = reached_total;
            pooled.keys = cfg.key_count * cfg.trial_count;
            rows.push_back(pooled);
        }
    }
    return rows;
}

} // namespace

const ProfileOutcome& ExperimentResult::outcome(const std::string& profile_name) const {
    for (const auto& oc : profiles)
        if (oc.profile_name == profile_name)
            return oc;
    throw ConfigError("no outcome for profile " + profile_name);
}

std::optional<double> ExperimentResult::mean_crossing(const std::string& profile_name,
                                                      double threshold) const {
    const auto& oc = outcome(profile_name);
    std::vector<double> crossings;
    for (std::size_t t = 0; t < config.trial_count; ++t) {
        for (std::size_t k = 0; k < config.key_count; ++k) {
            for (std::size_t s = 0; s < config.step_count; ++s) {
                const double rate = static_cast<double>(oc.successes[t][k][s]) /
                                    static_cast<double>(config.sets_per_step);
                if (rate >= threshold) {
                    crossings.push_back(static_cast<double>(config.set_size(s + 1)));
                    break;
                }
            }
        }
    }
    if (crossings.empty())
        return std::nullopt;
    return std::accumulate(crossings.begin(), crossings.end(), 0.0) /
           static_cast<double>(crossings.size());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.workers > 0)
        omp_set_num_threads(config.workers);

    const auto keys = generate_keys(config.master_seed, config.key_count);
    const auto texts = generate_texts(config.master_seed, config.text_count);
    const auto batches = generate_batches(config.master_seed, config);

    const double sigma_ref = power::builtin_profile("finfet").rise_switching();

    ExperimentResult result;
    result.config = config;
    result.profiles.resize(config.profiles.size());
    for (std::size_t pi = 0; pi < config.profiles.size(); ++pi) {
        auto& oc = result.profiles[pi];
        oc.profile_name = config.profiles[pi];
        const auto& prof = config.resolve_profile(oc.profile_name);
        oc.applied_sigma = config.noise.gaussian_sigma * prof.rise_switching() / sigma_ref;
        oc.successes.assign(config.trial_count,
                            std::vector<std::vector<std::uint32_t>>(
                                config.key_count,
                                std::vector<std::uint32_t>(config.step_count, 0)));
    }

    const std::int64_t tasks_per_trial =
        static_cast<std::int64_t>(config.step_count * config.sets_per_step);

    for (std::size_t ki = 0; ki < config.key_count; ++ki) {
        const auto& key = keys[ki];
        const auto round_key_10 = aes::expand_key(key)[10];

        // Ciphertexts are profile-independent; the hypothesis tensor is built
        // once per key and shared across profiles.
        const std::uint64_t key_seed = rng::derive(config.master_seed, {rng::TAG_NOISE, ki});
        std::vector<aes::Block> cts(texts.size());
        const std::int64_t ntexts = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < ntexts; ++i)
            cts[static_cast<std::size_t>(i)] =
                aes::encrypt(key, texts[static_cast<std::size_t>(i)]).ciphertext;
        const cpa::HypothesisSet hyp(cts);

        for (std::size_t pi = 0; pi < config.profiles.size(); ++pi) {
            auto& oc = result.profiles[pi];
            const auto& prof = config.resolve_profile(oc.profile_name);
            const power::NoiseConfig noise{oc.applied_sigma, config.noise.seed_slot};
            const auto traces = power::simulate_trace_set(key, texts, prof, noise, key_seed);
            oc.clamped += traces.clamped;

            std::vector<double> pw(traces.entries.size());
            for (std::size_t i = 0; i < pw.size(); ++i)
                pw[i] = traces.entries[i].peak_power;

            for (std::size_t trial = 0; trial < config.trial_count; ++trial) {
                const auto& batch = batches[trial];
                auto& succ = oc.successes[trial][ki];
                std::atomic<std::uint64_t> digest_acc{0};

#pragma omp parallel
                {
                    std::vector<std::uint32_t> idx, scratch;
                    std::uint64_t local_digest = 0;
#pragma omp for schedule(dynamic, 8)
                    for (std::int64_t task = 0; task < tasks_per_trial; ++task) {
                        const std::size_t step =
                            1 + static_cast<std::size_t>(task) / config.sets_per_step;
                        const std::size_t set =
                            static_cast<std::size_t>(task) % config.sets_per_step;
                        batch.set_indices(step, set, idx, scratch);

                        std::uint64_t h = io::FNV_BASIS;
                        h = io::fnv1a64_step(h, static_cast<std::uint64_t>(step));
                        h = io::fnv1a64_step(h, static_cast<std::uint64_t>(set));
                        for (const std::uint32_t v : idx)
                            h = io::fnv1a64_step(h, v);
                        local_digest ^= h;

                        if (cpa::attack_recovers(hyp, pw, idx, round_key_10)) {
                            std::atomic_ref<std::uint32_t> cell(succ[step - 1]);
                            cell.fetch_add(1, std::memory_order_relaxed);
                        }
                    }
                    digest_acc.fetch_xor(local_digest, std::memory_order_relaxed);
                }

                // XOR-combined per-set digests; order-independent, so equal
                // across worker counts and, crucially, across profiles.
                if (ki == 0) {
                    if (trial == 0)
                        oc.batch_digest = digest_acc.load();
                    else
                        oc.batch_digest =
                            rng::mix(oc.batch_digest) ^ rng::mix(digest_acc.load());
                }
            }
        }
    }

    for (std::size_t pi = 1; pi < result.profiles.size(); ++pi)
        if (result.profiles[pi].batch_digest != result.profiles[0].batch_digest)
            throw DigestMismatch("internal: batch index streams diverged between profiles " +
                                 result.profiles[0].profile_name + " and " +
                                 result.profiles[pi].profile_name);

    const double runs_per_step =
        static_cast<double>(config.key_count * config.trial_count * config.sets_per_step);
    for (auto& oc : result.profiles) {
        oc.curve.profile_name = oc.profile_name;
        oc.curve.set_size.resize(config.step_count);
        oc.curve.rate.resize(config.step_count);
        for (std::size_t s = 0; s < config.step_count; ++s) {
            std::uint64_t wins = 0;
            for (std::size_t t = 0; t < config.trial_count; ++t)
                for (std::size_t k = 0; k < config.key_count; ++k)
                    wins += oc.successes[t][k][s];
            oc.curve.set_size[s] = config.set_size(s + 1);
            oc.curve.rate[s] = static_cast<double>(wins) / runs_per_step;
        }
    }

    result.stats = build_stats(config, result.profiles);
    return result;
}

void write_curve_csv(const SuccessCurve& curve, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write curve file: " + file.string());
    out << "# profile," << curve.profile_name << "\n";
    out << "step,set_size,success_rate\n";
    char buf[64];
    for (std::size_t s = 0; s < curve.rate.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g\n", s + 1, curve.set_size[s],
                      curve.rate[s]);
        out << buf;
    }
    if (!out)
        throw IoError("write failed: " + file.string());
}

void write_stats_csv(const std::vector<ThresholdRow>& rows,
                     const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write stats file: " + file.string());
    out << "profile,threshold,trial,avg_traces,std_traces,reached,keys\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.9g,%s,%.9g,%.9g,%zu,%zu\n", r.profile.c_str(),
                      r.threshold, r.trial.c_str(), r.avg_traces, r.std_traces, r.reached,
                      r.keys);
        out << buf;
    }
    if (!out)
        throw IoError("write failed: " + file.string());
}

CalibrationResult calibrate_noise(const power::TechnologyProfile& profile,
                                  std::size_t target_crossing, double threshold,
                                  std::uint64_t master_seed, const CalibrationConfig& cal) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw ConfigError("calibrate_noise: threshold must lie in (0,1]");
    if (target_crossing > cal.text_count)
        throw Unachievable("calibrate_noise: target crossing " +
                           std::to_string(target_crossing) + " exceeds text count " +
                           std::to_string(cal.text_count));
    if (target_crossing < 2 * cal.step_stride)
        throw Unachievable("calibrate_noise: target crossing below the smallest set size");

    ExperimentConfig cfg;
    cfg.preset = "calibration";
    cfg.key_count = cal.key_count;
    cfg.text_count = cal.text_count;
    cfg.step_count = cal.step_count;
    cfg.sets_per_step = cal.sets_per_step;
    cfg.trial_count = cal.trial_count;
    cfg.step_stride = cal.step_stride;
    cfg.profiles = {profile.name};
    cfg.profile_overrides = {profile};
    cfg.master_seed = master_seed;
    cfg.thresholds = {threshold};

    CalibrationResult res;
    auto eval = [&](double sigma) -> std::optional<std::size_t> {
        cfg.noise.gaussian_sigma = sigma;
        const auto r = run_experiment(cfg);
        const auto c = threshold_crossing(r.profiles[0].curve, threshold);
        res.trajectory.push_back({sigma, c});
        return c;
    };
    auto finish = [&](double sigma, std::size_t crossing) {
        res.sigma = sigma;
        res.achieved_crossing = crossing;
        std::vector<CalibrationPoint> traj = res.trajectory;
        std::sort(traj.begin(), traj.end(),
                  [](const CalibrationPoint& a, const CalibrationPoint& b) {
                      return a.sigma < b.sigma;
                  });
        for (std::size_t i = 1; i < traj.size(); ++i) {
            const auto prev = traj[i - 1].crossing;
            const auto cur = traj[i].crossing;
            // NotReached counts as larger than any crossing
            const double pv = prev ? static_cast<double>(*prev) : 1e300;
            const double cv = cur ? static_cast<double>(*cur) : 1e300;
            if (cv < pv)
                res.monotone = false;
        }
        return res;
    };
    const auto within = [&](std::size_t c) {
        const double t = static_cast<double>(target_crossing);
        return static_cast<double>(c) >= 0.9 * t && static_cast<double>(c) <= 1.1 * t;
    };

    const auto c0 = eval(0.0);
    if (!c0)
        throw Unachievable("calibrate_noise: threshold unreachable even without noise");
    if (within(*c0))
        return finish(0.0, *c0);
    if (*c0 > target_crossing)
        throw Unachievable("calibrate_noise: crossing at sigma=0 is " + std::to_string(*c0) +
                           ", already above target " + std::to_string(target_crossing));

    // grow the upper bracket until the crossing passes the target
    double lo = 0.0;
    double hi = 0.5 * (profile.t01_total + profile.t10_total) - profile.t_clk;
    std::size_t used = 0;
    for (;; ++used) {
        if (used >= cal.max_iterations)
            throw Unachievable("calibrate_noise: could not bracket target within iteration "
                               "budget");
        const auto c = eval(hi);
        if (c && within(*c))
            return finish(hi, *c);
        if (!c || *c > target_crossing)
            break;
        lo = hi;
        hi *= 2.0;
    }

    for (; used < cal.max_iterations; ++used) {
        const double mid = 0.5 * (lo + hi);
        const auto c = eval(mid);
        if (c && within(*c))
            return finish(mid, *c);
        if (c && *c < target_crossing)
            lo = mid;
        else
            hi = mid;
    }
    throw Unachievable("calibrate_noise: bisection did not land within +-10% of " +
                       std::to_string(target_crossing) + " traces in " +
                       std::to_string(cal.max_iterations) + " evaluations");
}

} // namespace psc::harness
