#pragma once

#include <cstdint>

#include "focalfuse/math.hpp"

namespace focalfuse {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic xoshiro256** generator. The standard distributions are not
/// pinned across library versions, so all draws go through explicit
/// conversions here.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
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

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi); returns lo when the interval is degenerate.
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    Vec3 uniform_in_box(const Aabb& box) {
        return {uniform(box.lo.x, box.hi.x), uniform(box.lo.y, box.hi.y),
                uniform(box.lo.z, box.hi.z)};
    }

    Vec3 uniform_in_cube(double half_extent) {
        return {uniform(-half_extent, half_extent), uniform(-half_extent, half_extent),
                uniform(-half_extent, half_extent)};
    }

    Vec3 unit_vector() {
        // Rejection-free: z uniform, azimuth uniform.
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 6.283185307179586476925286766559);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

    /// Derives an independent stream; does not advance this generator.
    Rng fork(uint64_t tag) const {
        uint64_t s = state_[0] ^ (state_[3] + 0x9e3779b97f4a7c15ULL * (tag + 1));
        return Rng(s);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

/// Stateless hash of a 3D point into a 64-bit stream seed. Used where
/// per-query randomness must be reproducible and order-independent.
inline uint64_t hash_point(const Vec3& p) {
    static_assert(sizeof(double) == sizeof(uint64_t));
    uint64_t s = 0x7fb5d329728ea185ULL;
    for (double v : {p.x, p.y, p.z}) {
        uint64_t bits;
        __builtin_memcpy(&bits, &v, 8);
        s ^= bits;
        s = splitmix64(s);
    }
    return s;
}

}  // namespace focalfuse
