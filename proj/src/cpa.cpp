#include "psc/cpa.hpp"

#include "psc/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace psc::cpa {

namespace {

inline std::uint8_t hd8(std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::popcount(static_cast<unsigned>(a ^ b)));
}

void check_indices(std::span<const std::uint32_t> indices, std::size_t n) {
    if (indices.size() < 2)
        throw TooFewSamples("attack needs at least 2 trace indices, got " +
                            std::to_string(indices.size()));
    for (const std::uint32_t i : indices)
        if (i >= n)
            throw std::out_of_range("trace index " + std::to_string(i) + " outside 0.." +
                                    std::to_string(n - 1));
}

std::vector<double> power_column(const power::TraceSet& traces) {
    std::vector<double> p(traces.entries.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = traces.entries[i].peak_power;
    return p;
}

// Sorted candidate list from raw coefficients; ties broken by smaller guess so
// rankings are total and platform-independent.
std::vector<Candidate> rank(const std::array<double, 256>& corr) {
    std::vector<Candidate> out(256);
    for (unsigned g = 0; g < 256; ++g)
        out[g] = {static_cast<std::uint8_t>(g), corr[g]};
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.coefficient != b.coefficient)
            return a.coefficient > b.coefficient;
        return a.guess < b.guess;
    });
    return out;
}

} // namespace

std::vector<std::uint8_t> hypothetical_hd(std::span<const aes::Block> ciphertexts,
                                          std::size_t byte_position, unsigned guess) {
    if (byte_position >= 16)
        throw std::out_of_range("byte position " + std::to_string(byte_position) +
                                " outside 0..15");
    if (guess >= 256)
        throw std::out_of_range("key guess " + std::to_string(guess) + " outside 0..255");

    const std::size_t src = aes::shiftrows_source(byte_position);
    std::vector<std::uint8_t> out(ciphertexts.size());
    for (std::size_t i = 0; i < ciphertexts.size(); ++i) {
        const auto& ct = ciphertexts[i];
        const std::uint8_t predicted =
            aes::inv_sbox(static_cast<std::uint8_t>(ct[byte_position] ^ guess));
        out[i] = hd8(predicted, ct[src]);
    }
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw LengthMismatch("pearson: lengths " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    if (x.size() < 2)
        throw TooFewSamples("pearson needs at least 2 samples");

    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        return 0.0; // zero-variance convention
    return sxy / std::sqrt(sxx * syy);
}

HypothesisSet::HypothesisSet(std::span<const aes::Block> ciphertexts)
    : n_(ciphertexts.size()), data_(16 * ciphertexts.size() * 256) {
    const auto& isb = aes::inv_sbox_table();
    const std::int64_t n = static_cast<std::int64_t>(n_);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < 16; ++b) {
        const std::size_t byte = static_cast<std::size_t>(b);
        const std::size_t src = aes::shiftrows_source(byte);
        for (std::int64_t i = 0; i < n; ++i) {
            const auto& ct = ciphertexts[static_cast<std::size_t>(i)];
            const std::uint8_t u = ct[byte];
            const std::uint8_t w = ct[src];
            std::uint8_t* out = data_.data() + (byte * n_ + static_cast<std::size_t>(i)) * 256;
            for (unsigned g = 0; g < 256; ++g)
                out[g] = hd8(isb[u ^ g], w);
        }
    }
}

std::array<double, 256> correlate_guesses(const HypothesisSet& hyp, std::size_t byte,
                                          std::span<const double> power,
                                          std::span<const std::uint32_t> indices) {
    const std::size_t n = indices.size();
    if (byte >= 16)
        throw std::out_of_range("byte position outside 0..15");
    check_indices(indices, hyp.trace_count());
    if (power.size() != hyp.trace_count())
        throw LengthMismatch("power column does not match hypothesis trace count");

    double mean = 0.0;
    for (const std::uint32_t i : indices)
        mean += power[i];
    mean /= static_cast<double>(n);

    alignas(64) std::array<std::uint32_t, 256> sh{};
    alignas(64) std::array<std::uint32_t, 256> sh2{};
    alignas(64) std::array<double, 256> shp{};
    double sp = 0.0, sp2 = 0.0;

    for (const std::uint32_t i : indices) {
        const std::uint8_t* __restrict__ row = hyp.row(byte, i);
        const double pc = power[i] - mean;
        sp += pc;
        sp2 += pc * pc;
        for (unsigned g = 0; g < 256; ++g) {
            const std::uint32_t h = row[g];
            sh[g] += h;
            sh2[g] += h * h;
            shp[g] += static_cast<double>(h) * pc;
        }
    }

    const double dn = static_cast<double>(n);
    const double den_p = dn * sp2 - sp * sp;
    std::array<double, 256> corr{};
    for (unsigned g = 0; g < 256; ++g) {
        const std::int64_t den_h = static_cast<std::int64_t>(dn) * sh2[g] -
                                   static_cast<std::int64_t>(sh[g]) * sh[g];
        if (den_h <= 0 || den_p <= 0.0) {
            corr[g] = 0.0;
            continue;
        }
        const double num = dn * shp[g] - static_cast<double>(sh[g]) * sp;
        corr[g] = num / std::sqrt(static_cast<double>(den_h) * den_p);
    }
    return corr;
}

bool attack_recovers(const HypothesisSet& hyp, std::span<const double> power,
                     std::span<const std::uint32_t> indices, const aes::Block& round_key_10) {
    for (std::size_t b = 0; b < 16; ++b) {
        const auto corr = correlate_guesses(hyp, b, power, indices);
        unsigned best = 0;
        double best_r = corr[0];
        for (unsigned g = 1; g < 256; ++g) {
            if (corr[g] > best_r) { // first maximum wins ties, i.e. smaller guess
                best_r = corr[g];
                best = g;
            }
        }
        if (best != round_key_10[b])
            return false;
    }
    return true;
}

CpaResult attack(const power::TraceSet& traces, std::span<const std::uint32_t> indices) {
    check_indices(indices, traces.entries.size());

    std::vector<aes::Block> cts(traces.entries.size());
    for (std::size_t i = 0; i < cts.size(); ++i)
        cts[i] = traces.entries[i].ciphertext;
    const HypothesisSet hyp(cts);
    const auto power = power_column(traces);

    CpaResult result;
    result.trace_count = indices.size();
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < 16; ++b) {
        const auto corr =
            correlate_guesses(hyp, static_cast<std::size_t>(b), power, indices);
        result.per_byte[static_cast<std::size_t>(b)] = rank(corr);
    }
    for (std::size_t b = 0; b < 16; ++b)
        result.recovered_round10_key[b] = result.per_byte[b].front().guess;
    result.recovered_master_key = round10_to_master_key(result.recovered_round10_key);
    return result;
}

CpaResult attack_reference(const power::TraceSet& traces,
                           std::span<const std::uint32_t> indices) {
    check_indices(indices, traces.entries.size());

    std::vector<aes::Block> cts(indices.size());
    std::vector<double> p(indices.size());
    for (std::size_t t = 0; t < indices.size(); ++t) {
        cts[t] = traces.entries[indices[t]].ciphertext;
        p[t] = traces.entries[indices[t]].peak_power;
    }

    CpaResult result;
    result.trace_count = indices.size();
    for (std::size_t b = 0; b < 16; ++b) {
        std::array<double, 256> corr{};
        for (unsigned g = 0; g < 256; ++g) {
            const auto hd = hypothetical_hd(cts, b, g);
            std::vector<double> h(hd.begin(), hd.end());
            corr[g] = pearson(h, p);
        }
        result.per_byte[b] = rank(corr);
        result.recovered_round10_key[b] = result.per_byte[b].front().guess;
    }
    result.recovered_master_key = round10_to_master_key(result.recovered_round10_key);
    return result;
}

aes::Key round10_to_master_key(const aes::Block& round_key_10) {
    return aes::invert_key_schedule(round_key_10);
}

void write_result_json(const CpaResult& result, const std::filesystem::path& file) {
    nlohmann::ordered_json j;
    j["trace_count"] = result.trace_count;
    j["recovered_round10_key"] = aes::to_hex(result.recovered_round10_key);
    j["recovered_master_key"] = aes::to_hex(result.recovered_master_key);
    auto& bytes = j["per_byte"];
    bytes = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < 16; ++b) {
        nlohmann::ordered_json e;
        e["byte"] = b;
        auto& top = e["top"];
        top = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < 5 && k < result.per_byte[b].size(); ++k) {
            const auto& c = result.per_byte[b][k];
            top.push_back({{"guess", c.guess}, {"pcc", c.coefficient}});
        }
        bytes.push_back(std::move(e));
    }
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write result file: " + file.string());
    out << j.dump(2) << '\n';
}

} // namespace psc::cpa
