#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "poisonlab/errors.hpp"

// Counter-based pseudorandom streams (splitmix64). Every stochastic operation
// in the library draws from its own substream keyed by (seed, operation name,
// call index), so streams are reproducible across platforms and independent of
// evaluation order. All distribution transforms below are fixed algorithms
// (no libc/libstdc++ dependence), so identical keys give identical draws
// everywhere.

namespace poisonlab {

// Name recorded in configs and manifests.
inline constexpr const char* kRngName = "splitmix64";

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// splitmix64 output mix (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Substream key for (seed, operation, call index).
constexpr std::uint64_t derive_key(std::uint64_t seed, std::string_view op,
                                   std::uint64_t index = 0) {
    std::uint64_t k = mix64(seed + kGoldenGamma);
    k = mix64(k ^ fnv1a64(op));
    k = mix64(k + index * kGoldenGamma);
    return k;
}

class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    RngStream(std::uint64_t seed, std::string_view op, std::uint64_t index = 0)
        : state_(derive_key(seed, op, index)) {}

    std::uint64_t next_u64() {
        state_ += kGoldenGamma;
        return mix64(state_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). Multiply-shift; bias is < bound / 2^64.
    std::uint64_t uniform_int(std::uint64_t bound) {
        if (bound == 0) throw validation_error("uniform_int: bound must be positive");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int_range(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw validation_error("uniform_int_range: empty interval");
        return lo + static_cast<std::int64_t>(
                        uniform_int(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from [0, n), in selection order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw validation_error("sample_without_replacement: k > n");
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + static_cast<std::size_t>(uniform_int(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Categorical sampling by inverse CDF over fixed weights.
class CategoricalSampler {
public:
    explicit CategoricalSampler(const std::vector<double>& weights) {
        if (weights.empty()) throw validation_error("categorical: no weights");
        cumulative_.reserve(weights.size());
        double acc = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw validation_error("categorical: negative weight");
            acc += w;
            cumulative_.push_back(acc);
        }
        if (acc <= 0.0) throw validation_error("categorical: weights sum to zero");
        total_ = acc;
    }

    int draw(RngStream& rng) const {
        double u = rng.uniform01() * total_;
        // first index with cumulative > u
        std::size_t lo = 0, hi = cumulative_.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (cumulative_[mid] > u)
                hi = mid;
            else
                lo = mid + 1;
        }
        return static_cast<int>(lo);
    }

private:
    std::vector<double> cumulative_;
    double total_ = 0.0;
};

}  // namespace poisonlab
