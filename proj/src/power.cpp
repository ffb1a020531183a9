#include "psc/power.hpp"

#include "psc/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace psc::power {

void TechnologyProfile::validate() const {
    if (name.empty())
        throw ConfigError("profile name must not be empty");
    if (!(t_clk > 0.0))
        throw ConfigError("profile " + name + ": t_clk must be > 0");
    if (!(t01_total >= t_clk))
        throw ConfigError("profile " + name + ": t01_total must be >= t_clk");
    if (!(t10_total >= t_clk))
        throw ConfigError("profile " + name + ": t10_total must be >= t_clk");
    if (!(p_static >= 0.0))
        throw ConfigError("profile " + name + ": p_static must be >= 0");
}

TechnologyProfile TechnologyProfile::scaled(double lambda, const std::string& new_name) const {
    TechnologyProfile p = *this;
    p.name = new_name;
    p.t01_total *= lambda;
    p.t10_total *= lambda;
    p.t_clk *= lambda;
    p.p_static *= lambda;
    return p;
}

const std::vector<TechnologyProfile>& builtin_profiles() {
    static const std::vector<TechnologyProfile> profiles = [] {
        // Characterized register power values, 7nm FinFET baseline and the
        // 4nm ferroelectric-layer setup. 0.7 V, 100 MHz operating point.
        const TechnologyProfile finfet{"finfet", 2.19e-6, 2.04e-6, 4.89e-7, 3.45e-10,
                                       0.7,      1.0e8};
        const TechnologyProfile tfe4{"tfe4", 4.59e-6, 3.86e-6, 6.94e-7, 3.17e-10, 0.7, 1.0e8};

        std::vector<TechnologyProfile> out;
        out.push_back(finfet);
        for (int t = 1; t <= 3; ++t) {
            // Thickness interpolation: the capacitance increase is superlinear
            // in layer thickness, most pronounced toward 4nm, so intermediate
            // setups follow finfet + (tfe4-finfet)*(t/4)^2.
            const double f = (t / 4.0) * (t / 4.0);
            TechnologyProfile p;
            p.name = "tfe" + std::to_string(t);
            p.t01_total = finfet.t01_total + (tfe4.t01_total - finfet.t01_total) * f;
            p.t10_total = finfet.t10_total + (tfe4.t10_total - finfet.t10_total) * f;
            p.t_clk = finfet.t_clk + (tfe4.t_clk - finfet.t_clk) * f;
            p.p_static = finfet.p_static + (tfe4.p_static - finfet.p_static) * f;
            p.vdd = finfet.vdd;
            p.freq = finfet.freq;
            out.push_back(p);
        }
        out.push_back(tfe4);
        for (const auto& p : out)
            p.validate();
        return out;
    }();
    return profiles;
}

const TechnologyProfile& builtin_profile(const std::string& name) {
    for (const auto& p : builtin_profiles())
        if (p.name == name)
            return p;
    throw ConfigError("unknown built-in profile: " + name +
                      " (expected finfet, tfe1, tfe2, tfe3 or tfe4)");
}

PeakSample simulate_peak_power(const aes::TransitionCount& tc, const TechnologyProfile& profile,
                               const NoiseConfig& noise, rng::Stream& rng) {
    double watts = tc.n01 * profile.t01_total + tc.n10 * profile.t10_total +
                   tc.n_stable * profile.t_clk + profile.p_static;
    if (noise.gaussian_sigma > 0.0)
        watts += noise.gaussian_sigma * rng.next_normal();
    if (watts <= 0.0)
        return {profile.p_static, true};
    return {watts, false};
}

TraceSet simulate_trace_set(const aes::Key& key, std::span<const aes::Block> texts,
                            const TechnologyProfile& profile, const NoiseConfig& noise,
                            std::uint64_t seed) {
    if (texts.empty())
        throw TooFewSamples("simulate_trace_set: text list is empty");
    profile.validate();

    TraceSet ts;
    ts.profile_name = profile.name;
    ts.key = key;
    ts.entries.resize(texts.size());

    std::size_t clamped = 0;
    const std::int64_t n = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(static) reduction(+ : clamped)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto rec = aes::encrypt(key, texts[idx]);
        const auto tc = aes::register_transitions(rec.round9_state, rec.ciphertext);
        rng::Stream rng(
            rng::derive(seed, {rng::TAG_NOISE, noise.seed_slot, static_cast<std::uint64_t>(i)}));
        const auto sample = simulate_peak_power(tc, profile, noise, rng);
        ts.entries[idx] = {rec.plaintext, rec.ciphertext, sample.watts};
        if (sample.clamped)
            ++clamped;
    }
    ts.clamped = clamped;
    return ts;
}

namespace {

std::string format_power(double watts) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.8e", watts); // 9 significant digits
    return buf;
}

} // namespace

void write_trace_csv(const TraceSet& traces, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write trace file: " + file.string());
    out << "# psc-traceset v1\n";
    out << "# profile," << traces.profile_name << "\n";
    out << "# key," << aes::to_hex(traces.key) << "\n";
    out << "# clamped," << traces.clamped << "\n";
    out << "index,plaintext_hex,ciphertext_hex,power_watts\n";
    for (std::size_t i = 0; i < traces.entries.size(); ++i) {
        const auto& e = traces.entries[i];
        out << i << ',' << aes::to_hex(e.plaintext) << ',' << aes::to_hex(e.ciphertext) << ','
            << format_power(e.peak_power) << '\n';
    }
    if (!out)
        throw IoError("write failed: " + file.string());
}

TraceSet read_trace_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot open trace file: " + file.string());

    TraceSet ts;
    std::string line;
    bool saw_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                continue;
            const std::string tag = line.substr(2, comma - 2);
            const std::string val = line.substr(comma + 1);
            if (tag == "profile")
                ts.profile_name = val;
            else if (tag == "key")
                ts.key = aes::block_from_hex(val);
            else if (tag == "clamped")
                ts.clamped = std::stoull(val);
            continue;
        }
        if (!saw_header) {
            if (line != "index,plaintext_hex,ciphertext_hex,power_watts")
                throw IoError("unexpected trace header at line " + std::to_string(lineno) +
                              " of " + file.string());
            saw_header = true;
            continue;
        }
        std::istringstream ls(line);
        std::string idx, pt, ct, pw;
        if (!std::getline(ls, idx, ',') || !std::getline(ls, pt, ',') ||
            !std::getline(ls, ct, ',') || !std::getline(ls, pw))
            throw IoError("bad trace row at line " + std::to_string(lineno) + " of " +
                          file.string());
        TraceEntry e;
        e.plaintext = aes::block_from_hex(pt);
        e.ciphertext = aes::block_from_hex(ct);
        try {
            e.peak_power = std::stod(pw);
        } catch (const std::exception&) {
            throw IoError("bad power value at line " + std::to_string(lineno) + " of " +
                          file.string());
        }
        if (!(e.peak_power > 0.0))
            throw IoError("non-positive power at line " + std::to_string(lineno) + " of " +
                          file.string());
        ts.entries.push_back(e);
    }
    if (!saw_header)
        throw IoError("trace file has no header: " + file.string());
    return ts;
}

void write_profile_json(const TechnologyProfile& profile, const std::filesystem::path& file) {
    profile.validate();
    nlohmann::ordered_json j;
    j["name"] = profile.name;
    j["t01_total"] = profile.t01_total;
    j["t10_total"] = profile.t10_total;
    j["t_clk"] = profile.t_clk;
    j["p_static"] = profile.p_static;
    j["vdd"] = profile.vdd;
    j["freq"] = profile.freq;
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write profile file: " + file.string());
    out << j.dump(2) << '\n';
}

TechnologyProfile read_profile_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot open profile file: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed profile JSON in " + file.string() + ": " + e.what());
    }
    static const char* fields[] = {"name", "t01_total", "t10_total", "t_clk",
                                   "p_static", "vdd", "freq"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* f : fields)
            known = known || it.key() == f;
        if (!known)
            throw ConfigError("unknown field in profile file " + file.string() + ": " + it.key());
    }
    TechnologyProfile p;
    try {
        p.name = j.at("name").get<std::string>();
        p.t01_total = j.at("t01_total").get<double>();
        p.t10_total = j.at("t10_total").get<double>();
        p.t_clk = j.at("t_clk").get<double>();
        p.p_static = j.at("p_static").get<double>();
        p.vdd = j.value("vdd", 0.0);
        p.freq = j.value("freq", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("profile file " + file.string() + " missing field: " + e.what());
    }
    p.validate();
    return p;
}

} // namespace psc::power
