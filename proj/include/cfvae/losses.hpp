#ifndef CFVAE_LOSSES_HPP_
#define CFVAE_LOSSES_HPP_

#include "cfvae/types.hpp"

#include <cmath>
#include <numbers>

namespace cfvae {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112353; // log(2*pi)

inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log N(x; mean, 1), the continuous reconstruction head with fixed unit
// variance on standardized data.
inline double gaussian_loglik_unit(double x, double mean) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + d * d);
}

// log Bernoulli(x; sigmoid(logit)) for x in {0,1}.
inline double bernoulli_loglik_logit(double x, double logit) {
    return x * logit - softplus(logit);
}

// KL[ N(mu, diag exp(logvar)) || N(0, I) ], averaged over batch rows.
template <typename DerivedM, typename DerivedV>
double kl_standard_normal(const Eigen::MatrixBase<DerivedM> &mu,
                          const Eigen::MatrixBase<DerivedV> &logvar) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
        throw NumericError("kl_standard_normal: mu/logvar shape mismatch");
    if (!mu.allFinite() || !logvar.allFinite())
        throw NumericError("kl_standard_normal: non-finite input");
    const double total =
        0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
    return total / static_cast<double>(mu.rows());
}

// Accumulates coeff * d KL / d(mu, logvar) into the gradient buffers.
inline void kl_standard_normal_backward(const Matrix &mu, const Matrix &logvar, double coeff,
                                        Matrix &g_mu, Matrix &g_logvar) {
    const double inv_b = coeff / static_cast<double>(mu.rows());
    g_mu.array() += inv_b * mu.array();
    g_logvar.array() += 0.5 * inv_b * (logvar.array().exp() - 1.0);
}

struct TcGrads {
    Matrix z;      // d TC / d z       (B x D)
    Matrix mu;     // d TC / d mu      (B x D)
    Matrix logvar; // d TC / d logvar  (B x D)
};

// Minibatch-weighted-sampling estimate of the total correlation
// KL[ q(Z) || prod_i q(Z_i) ], where q is the aggregate posterior of the
// diagonal Gaussians (mu, logvar) and z holds one sample per batch row.
// log q(z_m) is estimated by logsumexp_j log q(z_m | x_j) - log(N*B), and
// each marginal the same way per dimension; N is the dataset size behind
// the aggregate. Exactly zero when D == 1.
double total_correlation_mws(const Matrix &z, const Matrix &mu, const Matrix &logvar,
                             double dataset_size, TcGrads *grads = nullptr);

// gamma-weighted total correlation term. Throws NumericError when the batch
// has fewer than two rows (the estimator needs cross-sample densities).
double tcr_loss(const Matrix &z, const Matrix &mu, const Matrix &logvar, double gamma,
                double dataset_size, TcGrads *grads = nullptr);

// Mean pairwise cosine similarity between matched rows of z_a and the
// structured z'_x; the denominators carry a 1e-8 guard. Result is in [-1, 1].
// When given, gradient buffers receive coeff * d OPR / d(row).
double opr_loss(const Matrix &z_a, const Matrix &z_x_structured, Matrix *g_za = nullptr,
                Matrix *g_zx = nullptr, double coeff = 1.0);

// Root-mean-square gap between matched predictions (regression situation test).
template <typename D1, typename D2>
double ufs_regression(const Eigen::MatrixBase<D1> &original,
                      const Eigen::MatrixBase<D2> &matched) {
    if (original.size() != matched.size())
        throw NumericError("ufs_regression: length mismatch");
    if (original.size() == 0) throw NumericError("ufs_regression: empty input");
    return std::sqrt((original - matched).array().square().mean());
}

// Fraction of matched pairs whose binary predictions differ.
template <typename D1, typename D2>
double ufs_classification(const Eigen::MatrixBase<D1> &original,
                          const Eigen::MatrixBase<D2> &matched) {
    if (original.size() != matched.size())
        throw NumericError("ufs_classification: length mismatch");
    if (original.size() == 0) throw NumericError("ufs_classification: empty input");
    double changed = 0.0;
    for (Index i = 0; i < original.size(); ++i) {
        const double a = original(i);
        const double b = matched(i);
        if ((a != 0.0 && a != 1.0) || (b != 0.0 && b != 1.0))
            throw NumericError("ufs_classification: non-binary prediction at index " +
                               std::to_string(i));
        changed += (a != b) ? 1.0 : 0.0;
    }
    return changed / static_cast<double>(original.size());
}

} // namespace cfvae

#endif
