#ifndef CFVAE_SIMULATE_HPP_
#define CFVAE_SIMULATE_HPP_

#include "cfvae/types.hpp"

#include <cstdint>
#include <string>

namespace cfvae {

// Deterministic stand-ins for the two survey files, written in their raw
// source layouts so they flow through the same loaders as real data. The
// generating equations are linear-Gaussian with demographic effects sized
// to land the downstream accuracy/unfairness metrics in realistic ranges.

struct LawLikeOptions {
    Index n = 21790;
    std::uint64_t seed = 7;
};

void write_law_like_csv(const std::string &path, const LawLikeOptions &opt = {});

struct AdultLikeOptions {
    Index n_raw = 48842; // pre-cleaning row count; ~7% carry a missing field
    std::uint64_t seed = 11;
};

void write_adult_like_csv(const std::string &path, const AdultLikeOptions &opt = {});

} // namespace cfvae

#endif
