#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace softseg {

// Deterministic, portable PRNG (splitmix64). The standard <random> engines are
// portable but the distributions are not specified bit-for-bit, so everything
// that must reproduce across builds goes through this class instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n), n >= 1.
    uint64_t below(uint64_t n) {
        const uint64_t limit = n * ((~uint64_t{0}) / n);
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller; caches the spare draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a path of tags,
// e.g. derive_seed(base, {iteration, kStreamAugment}). Each concern in the
// pipeline (init, shuffle, augment, dropout, data) owns one tag so paired
// runs can share every stream they are supposed to share.
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
    Rng r(base);
    uint64_t h = r.next_u64();
    for (uint64_t p : path) {
        Rng s(h ^ (p + 0x9e3779b97f4a7c15ull));
        h = s.next_u64();
    }
    return h;
}

// Stream tags.
inline constexpr uint64_t kStreamInit = 0x01;
inline constexpr uint64_t kStreamShuffle = 0x02;
inline constexpr uint64_t kStreamAugment = 0x03;
inline constexpr uint64_t kStreamDropout = 0x04;
inline constexpr uint64_t kStreamData = 0x05;
inline constexpr uint64_t kStreamSplit = 0x06;

}  // namespace softseg
