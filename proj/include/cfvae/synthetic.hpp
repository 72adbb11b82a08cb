#ifndef CFVAE_SYNTHETIC_HPP_
#define CFVAE_SYNTHETIC_HPP_

#include "cfvae/dataset.hpp"
#include "cfvae/graph.hpp"

#include <cstdint>

namespace cfvae {

struct SyntheticSpec {
    Index n_samples = 0;
    ConceptGraph graph;
    double noise_scale = 1.0;
    double sensitive_effect = 1.0;
    std::uint64_t seed = 0;
};

// Linear-Gaussian SCM sample with a known generating graph:
//   a        ~ Bernoulli(0.5)
//   k_j      = sum_parents lambda_pj * k_p + noise_scale * eps
//   <c>_dep  = k_j + sensitive_effect * a + 0.5 * noise_scale * eps
//   <c>_ind  = k_j + 0.5 * noise_scale * eps            (non-descendant of a)
//   y        = sum_j k_j + sensitive_effect * a + 0.5 * noise_scale * eps
// Ground-truth concept values ride along for oracle checks.
struct SyntheticData {
    TabularDataset dataset;
    Matrix concepts;          // n_samples x graph.n
    Vector concept_y_weights; // all ones; the y-regression ground truth
};

SyntheticData generate_synthetic(const SyntheticSpec &spec);

} // namespace cfvae

#endif
