#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>
#include <vector>

namespace bplab {

// Deterministic PRNG used everywhere in the project. SplitMix64 core with
// explicit integer derivations so that streams are reproducible bit-for-bit
// across platforms and compilers (no std::random distributions anywhere).
class Rng {
public:
    Rng() : state_(0x9E3779B97F4A7C15ull) {}
    explicit Rng(uint64_t seed) : state_(seed) { next_u64(); }

    // Derives an independent stream from (seed, tag, ids...). Used for
    // per-house, per-episode and per-batch streams.
    static Rng stream(uint64_t seed, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
        uint64_t s = seed;
        for (char c : tag) { s = mix(s ^ static_cast<uint64_t>(static_cast<unsigned char>(c))); }
        s = mix(s ^ (a * 0xD1B54A32D192ED03ull));
        s = mix(s ^ (b * 0x8CB92BA72F3D8DD7ull));
        return Rng(s);
    }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Unbiased integer in [0, n) via 128-bit multiply (Lemire).
    uint64_t below(uint64_t n) {
        if (n <= 1) { return 0; }
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < n) {
            uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // Inclusive range [lo, hi].
    int64_t range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Uniform in [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller. Not required to be cross-platform bit-exact (libm); only
    // same-binary reproducibility matters for weight init.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) { u1 = 1e-300; }
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    uint64_t state_;
};

} // namespace bplab
