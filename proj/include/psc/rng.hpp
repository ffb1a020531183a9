#ifndef PSC_RNG_HPP
#define PSC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace psc::rng {

// splitmix64 finalizer (Steele/Lea/Flood). Used both as the stream generator
// and to fold hierarchical stream keys, so any (seed, path...) tuple maps to
// an independent, platform-stable stream.
constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a child seed from a parent seed and a key path, e.g.
// derive(master, {PERM_TAG, trial, step, set}). Order-sensitive.
constexpr std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix(seed);
    for (std::uint64_t p : path)
        h = mix(h ^ mix(p));
    return h;
}

// Small deterministic stream. Not cryptographic; statistical quality is that
// of splitmix64, which is ample for Monte-Carlo sampling here.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Unbiased uniform integer in [0, bound). bound must be nonzero.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold)
                return r % bound;
        }
    }

    // Standard normal via Box-Muller. The spare draw is cached, so a stream
    // yields the same sequence regardless of interleaving with other streams.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = next_unit();
        } while (u1 <= 0.0);
        const double u2 = next_unit();
        const double m = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = m * std::sin(a);
        have_spare_ = true;
        return m * std::cos(a);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Purpose tags for derive(); kept in one place so stream layouts are stable.
inline constexpr std::uint64_t TAG_KEYS = 0x6b657973;   // "keys"
inline constexpr std::uint64_t TAG_TEXTS = 0x74657874;  // "text"
inline constexpr std::uint64_t TAG_PERM = 0x7065726d;   // "perm"
inline constexpr std::uint64_t TAG_NOISE = 0x6e6f6973;  // "nois"

} // namespace psc::rng

#endif
