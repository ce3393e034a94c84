#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace rffsei {

// Deterministic RNG used for everything random in the workbench. The standard
// <random> distributions are implementation-defined, so datasets would not be
// byte-stable across toolchains; this generator and its distributions are
// fully specified here instead.
//
// Stream derivation: derive() folds arbitrary components (indices, tags) into
// the seed, so each (seed, emitter, scheme, frame) tuple gets an independent
// stream and parallel generation reproduces serial output exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix64 expansion of the seed into xoshiro256++ state
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t hash_str(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
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

    // Uniform in [0, 1) with 53 bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n), n > 0. Fixed-point multiply, bias < 2^-64.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller; generates pairs, caches the second.
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Mixes seed with any number of u64 / string components into a child seed.
inline std::uint64_t derive_seed(std::uint64_t seed) { return seed; }

template <typename First, typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, First first, Rest... rest) {
    std::uint64_t component;
    if constexpr (std::is_convertible_v<First, std::string_view>) {
        component = Rng::hash_str(first);
    } else {
        component = static_cast<std::uint64_t>(first);
    }
    std::uint64_t x = seed ^ (component + 0x9e3779b97f4a7c15ULL);
    return derive_seed(Rng::splitmix64(x), rest...);
}

template <typename... Parts>
Rng derive_rng(std::uint64_t seed, Parts... parts) {
    return Rng(derive_seed(seed, parts...));
}

}  // namespace rffsei
