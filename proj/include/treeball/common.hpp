#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treeball {

inline constexpr const char* kVersion = "0.1.0";

using Vec = std::vector<double>;

// FNV-1a, used for prompt hashes, config fingerprints and seed derivation.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic RNG with order-independent derivation: derived streams depend
// only on (base seed, tag), never on how much of this stream was consumed.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, n), rejection-sampled so results do not depend on the
    // standard library's distribution implementation.
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<int>(x % un);
    }

    size_t uniform_index(size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::uniform_index: empty range");
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<size_t>(x % n);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Symmetric uniform in [-b, b].
    double uniform_sym(double b) { return (2.0 * uniform() - 1.0) * b; }

    Rng derive(uint64_t tag) const {
        return Rng(splitmix64(seed_ ^ (0x9E3779B97F4A7C15ULL * (tag + 1))));
    }

    Rng derive(std::string_view tag) const { return derive(fnv1a64(tag)); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    std::mt19937_64 eng_;
};

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace treeball
