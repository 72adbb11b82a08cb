#include "cfvae/synthetic.hpp"

#include "cfvae/rng.hpp"

#include <string>
#include <vector>

namespace cfvae {

SyntheticData generate_synthetic(const SyntheticSpec &spec) {
    if (spec.n_samples <= 0) throw ConfigError("synthetic: n_samples must be positive");
    if (!(spec.noise_scale > 0.0)) throw ConfigError("synthetic: noise_scale must be positive");
    if (spec.graph.n <= 0) throw ConfigError("synthetic: graph has no concepts");
    const Matrix C = spec.graph.adjacency();
    validate_dag(C);
    const auto order = topological_order(C);

    Rng rng(subseed(spec.seed, "synthetic"));
    const Index n = spec.n_samples;
    const Index k = spec.graph.n;

    Vector a(n);
    for (Index r = 0; r < n; ++r) a(r) = rng.bernoulli(0.5) ? 1.0 : 0.0;

    Matrix concepts = Matrix::Zero(n, k);
    for (int j : order) {
        Vector v = spec.noise_scale * rng.normal_matrix(n, 1).col(0);
        for (int p = 0; p < k; ++p)
            if (C(p, j) != 0.0) v += C(p, j) * concepts.col(p);
        concepts.col(j) = v;
    }

    const double readout_sd = 0.5 * spec.noise_scale;
    std::vector<Vector> columns;
    Schema schema;

    schema.columns.push_back({"a", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    columns.push_back(a);

    auto label = [&](int j) {
        return j < static_cast<int>(spec.graph.labels.size()) ? spec.graph.labels[j]
                                                              : "z" + std::to_string(j);
    };
    for (Index j = 0; j < k; ++j) {
        Vector dep = concepts.col(j) + spec.sensitive_effect * a +
                     readout_sd * rng.normal_matrix(n, 1).col(0);
        Vector ind = concepts.col(j) + readout_sd * rng.normal_matrix(n, 1).col(0);
        schema.columns.push_back(
            {label(static_cast<int>(j)) + "_dep", ColumnKind::Continuous, ColumnRole::Covariate, {}, false});
        columns.push_back(dep);
        schema.columns.push_back(
            {label(static_cast<int>(j)) + "_ind", ColumnKind::Continuous, ColumnRole::Covariate, {}, true});
        columns.push_back(ind);
    }

    Vector y = concepts.rowwise().sum() + spec.sensitive_effect * a +
               readout_sd * rng.normal_matrix(n, 1).col(0);
    schema.columns.push_back({"y", ColumnKind::Continuous, ColumnRole::Target, {}, false});
    columns.push_back(y);

    SyntheticData out;
    out.dataset = TabularDataset::from_columns(std::move(schema), columns);
    out.concepts = std::move(concepts);
    out.concept_y_weights = Vector::Ones(k);
    return out;
}

} // namespace cfvae
