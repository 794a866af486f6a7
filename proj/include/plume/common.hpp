#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace plume {

// Thrown on bad user input (files, CLI parameters, out-of-range values).
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when an internal invariant is violated. Maps to exit code 3.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Pixel {
    int x = 0;
    int y = 0;

    bool operator==(const Pixel&) const = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline int chebyshev(Pixel a, Pixel b) {
    return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

inline std::uint64_t splitMix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable derivation of per-stream seeds (per scene, per tree, per fold).
inline std::uint64_t deriveSeed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t state = base ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    splitMix64(state);
    return splitMix64(state);
}

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// distribution transforms live here because the std ones are
// implementation-defined and would break byte-identical reruns.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased draw from [0, n).
    std::uint64_t uniformInt(std::uint64_t n) {
        if (n == 0) throw ContractError("uniformInt: n must be positive");
        const std::uint64_t rem = std::numeric_limits<std::uint64_t>::max() % n;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v > limit);
        return v % n;
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (hasSpare_) {
            hasSpare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        hasSpare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    bool hasSpare_ = false;
    double spare_ = 0.0;
};

// Fisher-Yates permutation of 0..count-1.
inline std::vector<int> shuffledIndices(int count, Rng& rng) {
    std::vector<int> idx(count);
    for (int i = 0; i < count; ++i) idx[i] = i;
    for (int i = count - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.uniformInt(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

// Shortest decimal representation that round-trips the exact double.
inline std::string formatDouble(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

}  // namespace plume
