#pragma once

#include <cstdint>

namespace wsipat {

// splitmix64. Used everywhere randomness is needed so results do not depend
// on the platform's library implementation. Streams derived from
// (seed, draw_index) are independent enough for test doubles and
// augmentation draws, and identical inputs always replay identical draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Independent stream for one draw index; safe to evaluate in parallel.
    static Rng stream(std::uint64_t seed, std::uint64_t draw_index) {
        Rng r(seed ^ (0x9E3779B97F4A7C15ULL * (draw_index + 1)));
        r.next(); // decouple from the raw xor
        return r;
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_in(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Uniform integer in [0, n). n must be nonzero.
    std::uint64_t next_below(std::uint64_t n) {
        // Multiply-shift; bias is negligible for the small n used here.
        unsigned __int128 wide = static_cast<unsigned __int128>(next()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    bool next_coin(double p_true) {
        return next_unit() < p_true;
    }

private:
    std::uint64_t state_;
};

} // namespace wsipat
