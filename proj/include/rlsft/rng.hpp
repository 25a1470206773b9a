#pragma once
#include <cstdint>
#include <string_view>
#include <vector>

namespace rlsft {

// Deterministic, platform-independent RNG (splitmix64). std::mt19937 plus the
// standard distributions would be implementation-defined across libstdc++/libc++,
// which breaks the byte-identical-artifacts guarantee, so everything derives
// from this generator.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n); n > 0
    int uniform_int(int n) {
        int v = int(next_double() * n);
        return v < n ? v : n - 1;
    }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(uniform_int(int(i)));
            std::swap(v[i - 1], v[j]);
        }
    }
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

// Documented sub-seed derivation: every parallel or phase-local stream is
// seeded as derive_seed(parent_seed, tag) where the tag names the purpose,
// e.g. "collect:ph2:ep5:q0042". Results are therefore independent of worker
// count and schedule.
inline uint64_t derive_seed(uint64_t parent, std::string_view tag) {
    uint64_t z = parent ^ fnv1a64(tag);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace rlsft
