#ifndef CFVAE_TESTS_HELPERS_HPP_
#define CFVAE_TESTS_HELPERS_HPP_

#include <cfvae/dataset.hpp>
#include <cfvae/graph.hpp>
#include <cfvae/model.hpp>
#include <cfvae/rng.hpp>
#include <cfvae/types.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace testutil {

using cfvae::Index;
using cfvae::Matrix;
using cfvae::Vector;

// Scratch directory under the system temp root, removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "cfvae-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    std::string str(const std::string &rel = "") const {
        return rel.empty() ? path.string() : (path / rel).string();
    }
};

// |a - b| against a mixed relative/absolute bound; the absolute floor keeps
// genuinely-zero pairs from failing the relative part.
inline bool close(double a, double b, double rel, double abs_floor) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

inline double gap(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Random DAG: edges only point forward along a shuffled node order.
inline cfvae::ConceptGraph random_dag(cfvae::Rng &rng, int n, double edge_prob = 0.5) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    cfvae::ConceptGraph g;
    g.n = n;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(edge_prob))
                g.edges.push_back({order[static_cast<std::size_t>(i)],
                                   order[static_cast<std::size_t>(j)], rng.uniform(-1.0, 1.0)});
    return g;
}

// (I - C)^{-1} as the finite Neumann sum; exact for DAGs since C is
// nilpotent. Row-vector batches transform as Z * M.
inline Matrix neumann_series(const Matrix &C) {
    const Index n = C.rows();
    Matrix sum = Matrix::Identity(n, n);
    Matrix power = Matrix::Identity(n, n);
    for (Index k = 1; k <= n; ++k) {
        power = power * C;
        sum += power;
    }
    return sum;
}

// Mixed-kind schema exercising every head: binary sensitive, two
// continuous + one binary + one 3-category covariate, continuous target.
inline cfvae::Schema tiny_schema() {
    using cfvae::ColumnKind;
    using cfvae::ColumnRole;
    cfvae::Schema s;
    s.columns.push_back({"a", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    s.columns.push_back({"x1", ColumnKind::Continuous, ColumnRole::Covariate, {}, false});
    s.columns.push_back({"x2", ColumnKind::Continuous, ColumnRole::Covariate, {}, false});
    s.columns.push_back({"x3", ColumnKind::Binary, ColumnRole::Covariate, {}, false});
    s.columns.push_back(
        {"c", ColumnKind::Categorical, ColumnRole::Covariate, {"p", "q", "r"}, false});
    s.columns.push_back({"y", ColumnKind::Continuous, ColumnRole::Target, {}, false});
    return s;
}

// Encoded (a, x) blocks matching tiny_schema: a is B x 1, x is B x 6
// (x1, x2, x3, one-hot c).
inline std::pair<Matrix, Matrix> tiny_batch(Index b, cfvae::Rng &rng) {
    Matrix a(b, 1), x(b, 6);
    for (Index i = 0; i < b; ++i) {
        a(i, 0) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        x(i, 2) = rng.bernoulli(0.4) ? 1.0 : 0.0;
        const auto cat = rng.below(3);
        x(i, 3) = cat == 0 ? 1.0 : 0.0;
        x(i, 4) = cat == 1 ? 1.0 : 0.0;
        x(i, 5) = cat == 2 ? 1.0 : 0.0;
    }
    return {a, x};
}

// 3-concept chain with a shortcut, the default graph for model fixtures.
inline Matrix chain_c() {
    Matrix c = Matrix::Zero(3, 3);
    c(0, 1) = 0.6;
    c(1, 2) = -0.8;
    c(0, 2) = 0.35;
    return c;
}

inline cfvae::CfvaeConfig tiny_model_config(std::uint64_t seed = 3,
                                            double gamma = 1.3,
                                            double opr_weight = 0.7) {
    cfvae::CfvaeConfig cfg;
    cfg.d_za = 3;
    cfg.d_zx = 3;
    cfg.gamma = gamma;
    cfg.opr_weight = opr_weight;
    cfg.use_causal_constraints = true;
    cfg.C = chain_c();
    cfg.encoder_hidden = {8};
    cfg.decoder_hidden = {8};
    cfg.seed = seed;
    return cfg;
}

inline cfvae::CfvaeModel tiny_model(const cfvae::CfvaeConfig &cfg) {
    const cfvae::Schema schema = tiny_schema();
    return cfvae::CfvaeModel(
        cfg, cfvae::BlockLayout::from_schema(schema, cfvae::ColumnRole::Sensitive),
        cfvae::BlockLayout::from_schema(schema, cfvae::ColumnRole::Covariate));
}

inline double weighted_objective(const cfvae::LossBreakdown &b, const cfvae::TermWeights &w) {
    return w.recon_a * b.recon_a + w.recon_x * b.recon_x + w.kl_a * b.kl_a + w.kl_x * b.kl_x +
           w.tcr * b.tcr + w.opr * b.opr;
}

struct GradCheckResult {
    double max_err = 0.0; // worst |analytic - fd| / max(|analytic|, |fd|, 1e-3)
    long entries = 0;
};

// Central finite differences over every parameter entry of the model against
// the analytic gradients of sum_i weights_i * term_i, with a fixed posterior
// draw so the objective is deterministic.
inline GradCheckResult model_grad_check(cfvae::CfvaeModel &model, const Matrix &a,
                                        const Matrix &x, const Matrix &eps_a,
                                        const Matrix &eps_x, double dataset_size,
                                        const cfvae::TermWeights &weights, double h = 1e-5) {
    model.zero_grad();
    model.loss_and_grad(a, x, &eps_a, &eps_x, dataset_size, weights);

    // Snapshot the analytic gradients before the probe evaluations.
    std::vector<Matrix> analytic;
    for (const auto &p : model.params()) analytic.push_back(*p.grad);

    auto objective = [&]() {
        const cfvae::LatentBatch latent = model.encode(a, x, &eps_a, &eps_x);
        return weighted_objective(model.loss(a, x, latent, dataset_size), weights);
    };

    GradCheckResult res;
    const auto params = model.params();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Matrix &param = *params[pi].param;
        for (Index r = 0; r < param.rows(); ++r) {
            for (Index c = 0; c < param.cols(); ++c) {
                const double saved = param(r, c);
                param(r, c) = saved + h;
                const double plus = objective();
                param(r, c) = saved - h;
                const double minus = objective();
                param(r, c) = saved;
                const double fd = (plus - minus) / (2.0 * h);
                const double an = analytic[pi](r, c);
                const double err =
                    std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3});
                res.max_err = std::max(res.max_err, err);
                ++res.entries;
            }
        }
    }
    return res;
}

} // namespace testutil

#endif
