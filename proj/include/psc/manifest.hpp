#ifndef PSC_MANIFEST_HPP
#define PSC_MANIFEST_HPP

#include "psc/harness.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace psc::io {

inline constexpr const char* TOOL_VERSION = "0.1.0";

inline constexpr std::uint64_t FNV_BASIS = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t FNV_PRIME = 0x00000100000001b3ULL;

// Feeds an integer into an FNV-1a chain byte by byte. Each step is injective
// in the running state, so any same-length corruption changes the digest.
constexpr std::uint64_t fnv1a64_step(std::uint64_t h, std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        h = (h ^ (value & 0xff)) * FNV_PRIME;
        value >>= 8;
    }
    return h;
}

std::uint64_t fnv1a64(std::span<const std::byte> data);
std::uint64_t fnv1a64_file(const std::filesystem::path& file); // throws IoError
std::string hex64(std::uint64_t v);

// Ties a run's outputs together: resolved config hash, per-file digests and
// stage timings. Timings are informational; digests are the integrity check.
struct RunManifest {
    std::string tool_version = TOOL_VERSION;
    std::string command;
    std::uint64_t master_seed = 0;
    std::string config_hash;

    struct Output {
        std::string path; // relative to the manifest's directory
        std::uint64_t digest = 0;
    };
    std::vector<Output> outputs;

    struct Timing {
        std::string stage;
        double seconds = 0.0;
    };
    std::vector<Timing> timings;

    void add_output(const std::filesystem::path& base, const std::filesystem::path& file);
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& file);
RunManifest read_manifest(const std::filesystem::path& file);

// Recomputes every output digest relative to the manifest's directory.
// Throws DigestMismatch naming the first corrupted or missing file.
void verify_manifest(const std::filesystem::path& manifest_file);

// Experiment config file: JSON holding a preset name plus overrides. Unknown
// fields are rejected; the preset expands before overrides apply, so the
// returned config is fully resolved.
harness::ExperimentConfig load_config(const std::filesystem::path& file);
std::string config_json(const harness::ExperimentConfig& config); // canonical form
std::string config_hash(const harness::ExperimentConfig& config);

} // namespace psc::io

#endif
