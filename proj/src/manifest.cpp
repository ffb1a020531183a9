#include "psc/manifest.hpp"

#include "psc/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

namespace psc::io {

std::uint64_t fnv1a64(std::span<const std::byte> data) {
    std::uint64_t h = FNV_BASIS;
    for (const std::byte b : data)
        h = (h ^ static_cast<std::uint64_t>(b)) * FNV_PRIME;
    return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw IoError("cannot open for digest: " + file.string());
    std::uint64_t h = FNV_BASIS;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i)
            h = (h ^ static_cast<std::uint8_t>(buf[i])) * FNV_PRIME;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void RunManifest::add_output(const std::filesystem::path& base,
                             const std::filesystem::path& file) {
    outputs.push_back({std::filesystem::relative(file, base).generic_string(),
                       fnv1a64_file(file)});
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& file) {
    nlohmann::ordered_json j;
    j["tool_version"] = manifest.tool_version;
    j["command"] = manifest.command;
    j["master_seed"] = manifest.master_seed;
    j["config_hash"] = manifest.config_hash;
    auto& outs = j["outputs"];
    outs = nlohmann::ordered_json::array();
    for (const auto& o : manifest.outputs)
        outs.push_back({{"path", o.path}, {"digest", hex64(o.digest)}});
    auto& times = j["timings"];
    times = nlohmann::ordered_json::array();
    for (const auto& t : manifest.timings)
        times.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write manifest: " + file.string());
    out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot open manifest: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest JSON in " + file.string() + ": " + e.what());
    }
    RunManifest m;
    try {
        m.tool_version = j.at("tool_version").get<std::string>();
        m.command = j.value("command", "");
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.config_hash = j.at("config_hash").get<std::string>();
        for (const auto& o : j.at("outputs")) {
            RunManifest::Output out;
            out.path = o.at("path").get<std::string>();
            out.digest = std::stoull(o.at("digest").get<std::string>(), nullptr, 16);
            m.outputs.push_back(out);
        }
        if (j.contains("timings"))
            for (const auto& t : j.at("timings"))
                m.timings.push_back({t.at("stage").get<std::string>(),
                                     t.at("seconds").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw IoError("manifest " + file.string() + " missing field: " + e.what());
    }
    return m;
}

void verify_manifest(const std::filesystem::path& manifest_file) {
    const auto m = read_manifest(manifest_file);
    const auto base = manifest_file.parent_path();
    for (const auto& o : m.outputs) {
        const auto path = base / o.path;
        if (!std::filesystem::exists(path))
            throw DigestMismatch("manifest output missing: " + path.string());
        const auto got = fnv1a64_file(path);
        if (got != o.digest)
            throw DigestMismatch("digest mismatch for " + path.string() + ": manifest " +
                                 hex64(o.digest) + ", file " + hex64(got));
    }
}

namespace {

harness::ExperimentConfig preset_config(const std::string& preset, std::uint64_t seed) {
    if (preset == "desk")
        return harness::ExperimentConfig::desk(seed);
    if (preset == "paper")
        return harness::ExperimentConfig::paper(seed);
    if (preset == "custom")
        return harness::ExperimentConfig{};
    throw ConfigError("unknown preset: " + preset + " (expected desk, paper or custom)");
}

} // namespace

harness::ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot open config: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config JSON in " + file.string() + ": " + e.what());
    }

    static const char* known[] = {"preset",       "master_seed", "key_count",
                                  "text_count",   "step_count",  "sets_per_step",
                                  "trial_count",  "step_stride", "profiles",
                                  "noise_sigma",  "noise_slot",  "thresholds",
                                  "workers"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            ok = ok || it.key() == k;
        if (!ok)
            throw ConfigError("unknown field in config " + file.string() + ": " + it.key());
    }

    try {
        const std::string preset = j.value("preset", std::string("custom"));
        const std::uint64_t seed = j.value("master_seed", 0ULL);
        auto cfg = preset_config(preset, seed);
        cfg.master_seed = seed;
        if (j.contains("key_count"))
            cfg.key_count = j.at("key_count").get<std::size_t>();
        if (j.contains("text_count"))
            cfg.text_count = j.at("text_count").get<std::size_t>();
        if (j.contains("step_count"))
            cfg.step_count = j.at("step_count").get<std::size_t>();
        if (j.contains("sets_per_step"))
            cfg.sets_per_step = j.at("sets_per_step").get<std::size_t>();
        if (j.contains("trial_count"))
            cfg.trial_count = j.at("trial_count").get<std::size_t>();
        if (j.contains("step_stride"))
            cfg.step_stride = j.at("step_stride").get<std::size_t>();
        if (j.contains("profiles"))
            cfg.profiles = j.at("profiles").get<std::vector<std::string>>();
        if (j.contains("noise_sigma"))
            cfg.noise.gaussian_sigma = j.at("noise_sigma").get<double>();
        if (j.contains("noise_slot"))
            cfg.noise.seed_slot = j.at("noise_slot").get<std::uint64_t>();
        if (j.contains("thresholds"))
            cfg.thresholds = j.at("thresholds").get<std::vector<double>>();
        if (j.contains("workers"))
            cfg.workers = j.at("workers").get<int>();
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value in config " + file.string() + ": " + e.what());
    }
}

std::string config_json(const harness::ExperimentConfig& config) {
    nlohmann::ordered_json j;
    j["preset"] = config.preset;
    j["master_seed"] = config.master_seed;
    j["key_count"] = config.key_count;
    j["text_count"] = config.text_count;
    j["step_count"] = config.step_count;
    j["sets_per_step"] = config.sets_per_step;
    j["trial_count"] = config.trial_count;
    j["step_stride"] = config.step_stride;
    j["profiles"] = config.profiles;
    j["noise_sigma"] = config.noise.gaussian_sigma;
    j["noise_slot"] = config.noise.seed_slot;
    j["thresholds"] = config.thresholds;
    return j.dump(2);
}

std::string config_hash(const harness::ExperimentConfig& config) {
    const std::string s = config_json(config);
    return hex64(fnv1a64(std::as_bytes(std::span(s.data(), s.size()))));
}

} // namespace psc::io
