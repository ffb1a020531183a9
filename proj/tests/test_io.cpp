#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "psc/errors.hpp"
#include "psc/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace psc;

namespace {

std::filesystem::path test_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "psc_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
}

} // namespace

TEST_CASE("fnv1a64 known values and collision behavior") {
    CHECK(io::fnv1a64({}) == 0xcbf29ce484222325ULL);
    const std::string a = "a";
    CHECK(io::fnv1a64(std::as_bytes(std::span(a.data(), a.size()))) == 0xaf63dc4c8601ec8cULL);

    // any single-byte corruption of a fixed-length payload changes the digest
    std::string payload = "step,set_size,success_rate\n1,20,0.25\n";
    const auto base = io::fnv1a64(std::as_bytes(std::span(payload.data(), payload.size())));
    for (std::size_t i = 0; i < payload.size(); ++i) {
        std::string corrupted = payload;
        corrupted[i] = static_cast<char>(corrupted[i] ^ 0x01);
        const auto got =
            io::fnv1a64(std::as_bytes(std::span(corrupted.data(), corrupted.size())));
        REQUIRE(got != base);
    }
}

TEST_CASE("file digests match in-memory digests") {
    const auto dir = test_dir();
    const std::string body = "some\nbinary-ish\0content", full(body.data(), body.size());
    write_file(dir / "digest.bin", full);
    CHECK(io::fnv1a64_file(dir / "digest.bin") ==
          io::fnv1a64(std::as_bytes(std::span(full.data(), full.size()))));
    CHECK_THROWS_AS(io::fnv1a64_file(dir / "absent.bin"), IoError);
}

TEST_CASE("manifest round-trip, verification, and corruption detection") {
    const auto dir = test_dir();
    write_file(dir / "out_a.csv", "step,set_size,success_rate\n1,20,0.25\n");
    write_file(dir / "out_b.json", "{\"x\":1}\n");

    io::RunManifest m;
    m.command = "experiment --preset desk";
    m.master_seed = 42;
    m.config_hash = "00ff";
    m.add_output(dir, dir / "out_a.csv");
    m.add_output(dir, dir / "out_b.json");
    m.timings.push_back({"simulate", 1.25});

    const auto mf = dir / "manifest.json";
    io::write_manifest(m, mf);

    const auto back = io::read_manifest(mf);
    CHECK(back.tool_version == io::TOOL_VERSION);
    CHECK(back.command == m.command);
    CHECK(back.master_seed == 42);
    REQUIRE(back.outputs.size() == 2);
    CHECK(back.outputs[0].path == "out_a.csv");
    CHECK(back.outputs[0].digest == io::fnv1a64_file(dir / "out_a.csv"));

    CHECK_NOTHROW(io::verify_manifest(mf));

    // flip one byte of an output
    auto body = std::string("step,set_size,success_rate\n1,20,0.35\n");
    write_file(dir / "out_a.csv", body);
    CHECK_THROWS_AS(io::verify_manifest(mf), DigestMismatch);

    write_file(dir / "out_a.csv", "step,set_size,success_rate\n1,20,0.25\n");
    CHECK_NOTHROW(io::verify_manifest(mf));
    std::filesystem::remove(dir / "out_b.json");
    CHECK_THROWS_AS(io::verify_manifest(mf), DigestMismatch);
}

TEST_CASE("config files expand presets, apply overrides, reject junk") {
    const auto dir = test_dir();
    const auto file = dir / "config.json";

    write_file(file, R"({"preset":"desk","master_seed":7})");
    const auto desk = io::load_config(file);
    CHECK(desk.preset == "desk");
    CHECK(desk.key_count == 3);
    CHECK(desk.sets_per_step == 50);
    CHECK(desk.master_seed == 7);

    write_file(file, R"({"preset":"desk","master_seed":7,"key_count":1,"sets_per_step":5,)"
                     R"("profiles":["finfet","tfe4"],"noise_sigma":1e-6})");
    const auto tweaked = io::load_config(file);
    CHECK(tweaked.key_count == 1);
    CHECK(tweaked.sets_per_step == 5);
    CHECK(tweaked.profiles == std::vector<std::string>{"finfet", "tfe4"});
    CHECK(tweaked.noise.gaussian_sigma == 1e-6);

    write_file(file, R"({"preset":"desk","master_seed":7,"frobnicate":true})");
    CHECK_THROWS_AS(io::load_config(file), ConfigError);

    write_file(file, R"({"preset":"galaxy"})");
    CHECK_THROWS_AS(io::load_config(file), ConfigError);

    write_file(file, R"({"preset":"desk","thresholds":[0.9,0.5]})");
    CHECK_THROWS_AS(io::load_config(file), ConfigError);

    write_file(file, "{nope");
    CHECK_THROWS_AS(io::load_config(file), ConfigError);

    CHECK_THROWS_AS(io::load_config(dir / "absent.json"), IoError);
}

TEST_CASE("config hash is stable across serialization round-trips") {
    const auto dir = test_dir();
    const auto file = dir / "config.json";
    const auto desk = harness::ExperimentConfig::desk(11);

    write_file(file, io::config_json(desk));
    const auto back = io::load_config(file);
    CHECK(io::config_hash(back) == io::config_hash(desk));
    CHECK(io::config_json(back) == io::config_json(desk));

    auto other = desk;
    other.master_seed = 12;
    CHECK(io::config_hash(other) != io::config_hash(desk));
}
