// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cua {

/// Seedable, splittable pseudo-random generator (xoshiro256** seeded through
/// splitmix64). All stochastic code in the project draws from this generator
/// so that runs are bit-reproducible across platforms; std::random
/// distributions are avoided on purpose (their output is
/// implementation-defined).
///
/// Independent streams are derived by hashing (seed, stream, substream),
/// which makes per-slice / per-task randomness independent of scheduling
/// order.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    static Rng derive(uint64_t seed, uint64_t stream, uint64_t substream = 0) {
        uint64_t h = 0x9e3779b97f4a7c15ULL ^ seed;
        h = mix(h ^ stream);
        h = mix(h ^ substream);
        return Rng(h);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    uint64_t below(uint64_t n) {
        uint64_t x, r;
        do {
            x = next_u64();
            r = x % n;
        } while (x - r > UINT64_MAX - n + 1);
        return r;
    }

    /// Standard normal via Box-Muller (deterministic, no libm distribution).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        return mix(x);
    }

    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cua
