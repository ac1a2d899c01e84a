#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gdn {

// All randomness in the project flows from one user seed through named
// substreams, so each component (init, shuffle, synth channel, ...) is
// independently reproducible. Streams are mt19937_64 seeded with an
// FNV-1a hash of (seed, name, indices...); draws below avoid
// std::uniform_*_distribution, whose output is implementation-defined.

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a64_mix(uint64_t v, uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    static Rng substream(uint64_t seed, std::string_view name, std::initializer_list<uint64_t> indices = {}) {
        uint64_t h = fnv1a64_mix(seed, fnv1a64(name));
        for (uint64_t ix : indices) h = fnv1a64_mix(ix, h);
        return Rng(h);
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Unbiased integer in [0, n); n >= 1.
    uint64_t below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace gdn
