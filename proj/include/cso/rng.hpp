#pragma once

// Seedable, platform-independent random number generation.
//
// Everything that needs reproducible draws (scene sampling, sprite picks,
// weight init, shuffles) goes through Rng below instead of <random>
// distributions, whose output is implementation-defined. The engine is
// xoshiro256**, seeded through splitmix64, and every helper consumes a
// documented number of raw u64 draws:
//
//   next_u64()            1 draw
//   uniform_int(lo, hi)   1 draw, inclusive bounds (also when lo == hi)
//   uniform_real()        1 draw, [0, 1)
//   normal()              2 draws per generated pair (second value cached)

#include <cstdint>
#include <cmath>

namespace cso {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from a parent seed and a stream index.
inline uint64_t hash_seed(uint64_t seed, uint64_t stream) {
    uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL + (stream << 6) + (stream >> 2));
    uint64_t t = s + stream;
    return splitmix64(t);
}

inline uint64_t hash_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return hash_seed(hash_seed(seed, a), b);
}

inline uint64_t hash_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    return hash_seed(hash_seed(seed, a, b), c);
}

// FNV-1a, used to fold strings (config digests, stream tags) into seeds.
inline uint64_t fnv1a(const char* s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (; *s; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline uint64_t fnv1a_bytes(const void* data, size_t n) {
    uint64_t h = 0xCBF29CE484222325ULL;
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Inclusive-range integer via the 128-bit multiply-shift reduction.
    // The bias is < range/2^64, which is irrelevant here; what matters is
    // that the mapping is fixed and consumes exactly one draw.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        const uint64_t r = next_u64();
        const uint64_t v = static_cast<uint64_t>(
            (static_cast<unsigned __int128>(r) * range) >> 64);
        return lo + static_cast<int64_t>(v);
    }

    // 53-bit mantissa uniform in [0, 1).
    double uniform_real() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal, Box-Muller. Generates values in pairs; the spare is
    // cached so consecutive calls consume 2, 0, 2, 0, ... raw draws.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform_real();
        double u2 = uniform_real();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cso
