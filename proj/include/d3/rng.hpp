#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace d3 {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}
}  // namespace detail

// Counter-based generator with splittable streams. Outputs are a pure
// function of (key, counter), so identical seeds and call sequences give
// identical values on every platform.
struct Rng {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;

    static Rng from_seed(std::uint64_t seed) {
        Rng r;
        r.key = detail::mix64(seed + 0x9E3779B97F4A7C15ULL);
        return r;
    }

    // Derive an independent stream; the parent is left untouched.
    Rng stream(std::uint64_t tag) const {
        Rng r;
        r.key = detail::mix64(key ^ detail::mix64(tag + 0xD1B54A32D192ED03ULL));
        return r;
    }
    Rng stream(std::string_view name) const { return stream(detail::fnv1a64(name)); }

    std::uint64_t next_u64() {
        ++counter;
        return detail::mix64(key + counter * 0x9E3779B97F4A7C15ULL);
    }

    // Uniform in [0,1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    float next_float() { return static_cast<float>(next_double()); }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; consumes exactly two uniforms per call.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        u1 = u1 < 1e-300 ? 1e-300 : u1;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Uniform integer in [0, n), rejection-sampled so every value is equally likely.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    int next_sign() { return (next_u64() & 1) ? 1 : -1; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }
};

}  // namespace d3
