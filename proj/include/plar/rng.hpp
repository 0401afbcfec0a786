#pragma once

#include <cstdint>

namespace plar {

// 64-bit mixing finalizer used for seeding and stream derivation.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ generator. Seedable and splittable into independent
/// streams; every draw is a pure function of (seed, stream, call index),
/// which is what makes parallel experiment runs reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // Expand the seed through splitmix64 so near-equal seeds give
        // unrelated states; an all-zero state is unreachable this way.
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x = splitmix64_mix(x);
            word = x;
        }
    }

    // Stream derivation rule: state is expanded from
    // splitmix64_mix(seed) ^ splitmix64_mix(stream_index).
    static Rng stream(std::uint64_t seed, std::uint64_t stream_index) {
        return Rng(splitmix64_mix(seed) ^ splitmix64_mix(~stream_index));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Rejection sampling keeps it exactly
    /// uniform for every n.
    std::uint64_t below(std::uint64_t n) {
        using u128 = unsigned __int128;
        u128 m = static_cast<u128>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<u128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace plar
