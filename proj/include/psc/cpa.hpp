#ifndef PSC_CPA_HPP
#define PSC_CPA_HPP

#include "psc/aes.hpp"
#include "psc/power.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace psc::cpa {

// Last-round HD hypothesis for one key-byte guess: for each ciphertext,
// HD(inv_sbox(ct[byte_position] ^ guess), ct[shiftrows_source(byte_position)]),
// i.e. the predicted round-9 byte against the ciphertext byte in the same
// register position. Values in 0..8.
std::vector<std::uint8_t> hypothetical_hd(std::span<const aes::Block> ciphertexts,
                                          std::size_t byte_position, unsigned guess);

// Sample Pearson correlation coefficient. Zero-variance inputs yield 0 by
// convention so degenerate hypotheses rank last, not error out.
double pearson(std::span<const double> x, std::span<const double> y);

struct Candidate {
    std::uint8_t guess = 0;
    double coefficient = 0.0;
};

struct CpaResult {
    // 256 candidates per byte position, sorted by coefficient descending,
    // ties broken by smaller guess value.
    std::array<std::vector<Candidate>, 16> per_byte;
    aes::Block recovered_round10_key{};
    aes::Key recovered_master_key{};
    std::size_t trace_count = 0;
};

// All 16x256 hypothesis rows for a ciphertext list, precomputed once and
// reused across trace subsets. Layout is [byte][trace][guess] so the per-set
// kernel streams 256 contiguous bytes per selected trace.
class HypothesisSet {
  public:
    explicit HypothesisSet(std::span<const aes::Block> ciphertexts);

    std::size_t trace_count() const { return n_; }

    const std::uint8_t* row(std::size_t byte, std::size_t trace) const {
        return data_.data() + (byte * n_ + trace) * 256;
    }

  private:
    std::size_t n_;
    std::vector<std::uint8_t> data_;
};

// Correlations of all 256 guesses of one byte position against the selected
// power samples. Integer hypothesis sums are exact; the power column is
// centered once for stability.
std::array<double, 256> correlate_guesses(const HypothesisSet& hyp, std::size_t byte,
                                          std::span<const double> power,
                                          std::span<const std::uint32_t> indices);

// Full CPA over the selected traces: ranks all candidates per byte, assembles
// the round-10 key from the rank-1 candidates and inverts the key schedule.
// Parallelized over byte positions.
CpaResult attack(const power::TraceSet& traces, std::span<const std::uint32_t> indices);

// Serial reference: same contract, computed through hypothetical_hd() and
// pearson() per candidate. Kept for testing the optimized kernel against.
CpaResult attack_reference(const power::TraceSet& traces,
                           std::span<const std::uint32_t> indices);

// Success-only fast path for the experiment harness: true iff the rank-1
// candidate matches round_key_10 at every byte position. Bails out at the
// first wrong byte.
bool attack_recovers(const HypothesisSet& hyp, std::span<const double> power,
                     std::span<const std::uint32_t> indices, const aes::Block& round_key_10);

aes::Key round10_to_master_key(const aes::Block& round_key_10);

// JSON export: per-byte top-5 candidates with coefficients, recovered keys in hex.
void write_result_json(const CpaResult& result, const std::filesystem::path& file);

} // namespace psc::cpa

#endif
