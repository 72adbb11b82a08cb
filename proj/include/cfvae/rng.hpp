#ifndef CFVAE_RNG_HPP_
#define CFVAE_RNG_HPP_

#include "cfvae/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace cfvae {

// FNV-1a over a label, used to derive named sub-seeds from one root seed.
inline std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Every random draw in a run flows from one root seed; components ask for
// a sub-seed by name so reordering one consumer never perturbs another.
inline std::uint64_t subseed(std::uint64_t root, std::string_view label) {
    return splitmix64(root ^ hash_label(label));
}

// Deterministic generator: xoshiro-free, stdlib-free draws so streams are
// identical across standard libraries. Normal variates use Box-Muller.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc908ull)) {
        if (state_ == 0) state_ = 0x9e3779b97f4a7c15ull;
    }

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n) by rejection, bias-free.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    Matrix normal_matrix(Index rows, Index cols) {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = normal();
        return m;
    }

    Matrix uniform_matrix(Index rows, Index cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
        return m;
    }

    // Fisher-Yates; deterministic for a given seed on every platform.
    template <typename T>
    void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace cfvae

#endif
