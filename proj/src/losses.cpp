#include "cfvae/losses.hpp"

namespace cfvae {

namespace {

// Per-dimension Gaussian log density of sample row m under component row j.
inline double log_density(double z, double mu, double logvar) {
    const double d = z - mu;
    return -0.5 * (kLog2Pi + logvar + d * d * std::exp(-logvar));
}

} // namespace

double total_correlation_mws(const Matrix &z, const Matrix &mu, const Matrix &logvar,
                             double dataset_size, TcGrads *grads) {
    const Index B = z.rows();
    const Index D = z.cols();
    if (mu.rows() != B || mu.cols() != D || logvar.rows() != B || logvar.cols() != D)
        throw NumericError("total_correlation_mws: shape mismatch");
    if (dataset_size < static_cast<double>(B))
        dataset_size = static_cast<double>(B);
    const double log_nb = std::log(dataset_size * static_cast<double>(B));

    // l(m,j,i) = log N(z_mi; mu_ji, exp(logvar_ji)); S(m,j) = sum_i l(m,j,i).
    std::vector<Matrix> l(static_cast<std::size_t>(D));
    Matrix S = Matrix::Zero(B, B);
    for (Index i = 0; i < D; ++i) {
        Matrix &li = l[static_cast<std::size_t>(i)];
        li.resize(B, B);
        for (Index m = 0; m < B; ++m)
            for (Index j = 0; j < B; ++j)
                li(m, j) = log_density(z(m, i), mu(j, i), logvar(j, i));
        S += li;
    }

    auto row_lse = [](const Matrix &M, Index m) {
        const double mx = M.row(m).maxCoeff();
        return mx + std::log((M.row(m).array() - mx).exp().sum());
    };

    double tc = 0.0;
    for (Index m = 0; m < B; ++m) {
        double t = row_lse(S, m) - log_nb;
        for (Index i = 0; i < D; ++i)
            t -= row_lse(l[static_cast<std::size_t>(i)], m) - log_nb;
        tc += t;
    }
    tc /= static_cast<double>(B);

    if (grads) {
        grads->z = Matrix::Zero(B, D);
        grads->mu = Matrix::Zero(B, D);
        grads->logvar = Matrix::Zero(B, D);
        const double inv_b = 1.0 / static_cast<double>(B);
        // softmax responsibilities over j for the joint and each marginal
        Matrix P(B, B);
        for (Index m = 0; m < B; ++m) {
            const double mx = S.row(m).maxCoeff();
            Eigen::RowVectorXd e = (S.row(m).array() - mx).exp();
            P.row(m) = e / e.sum();
        }
        for (Index i = 0; i < D; ++i) {
            const Matrix &li = l[static_cast<std::size_t>(i)];
            for (Index m = 0; m < B; ++m) {
                const double mx = li.row(m).maxCoeff();
                Eigen::RowVectorXd e = (li.row(m).array() - mx).exp();
                const Eigen::RowVectorXd Q = e / e.sum();
                for (Index j = 0; j < B; ++j) {
                    const double w = inv_b * (P(m, j) - Q(j)); // d TC / d l(m,j,i)
                    if (w == 0.0) continue;
                    const double inv_var = std::exp(-logvar(j, i));
                    const double diff = (z(m, i) - mu(j, i)) * inv_var;
                    grads->z(m, i) += w * (-diff);
                    grads->mu(j, i) += w * diff;
                    grads->logvar(j, i) += w * (-0.5) * (1.0 - (z(m, i) - mu(j, i)) * diff);
                }
            }
        }
    }
    return tc;
}

double tcr_loss(const Matrix &z, const Matrix &mu, const Matrix &logvar, double gamma,
                double dataset_size, TcGrads *grads) {
    if (gamma == 0.0) {
        if (grads) {
            grads->z = Matrix::Zero(z.rows(), z.cols());
            grads->mu = Matrix::Zero(z.rows(), z.cols());
            grads->logvar = Matrix::Zero(z.rows(), z.cols());
        }
        return 0.0;
    }
    if (z.rows() < 2)
        throw NumericError("tcr_loss: the minibatch estimator needs at least two rows");
    const double tc = total_correlation_mws(z, mu, logvar, dataset_size, grads);
    if (grads) {
        grads->z *= gamma;
        grads->mu *= gamma;
        grads->logvar *= gamma;
    }
    return gamma * tc;
}

double opr_loss(const Matrix &z_a, const Matrix &z_x_structured, Matrix *g_za, Matrix *g_zx,
                double coeff) {
    const Index B = z_a.rows();
    const Index D = z_a.cols();
    if (z_x_structured.rows() != B)
        throw NumericError("opr_loss: batch size mismatch");
    if (z_x_structured.cols() != D)
        throw ConfigError("opr_loss: cosine similarity needs equal latent dimensions (" +
                          std::to_string(D) + " vs " + std::to_string(z_x_structured.cols()) +
                          ")");
    constexpr double kGuard = 1e-8;
    const double inv_b = 1.0 / static_cast<double>(B);
    if (g_za && g_za->size() == 0) *g_za = Matrix::Zero(B, D);
    if (g_zx && g_zx->size() == 0) *g_zx = Matrix::Zero(B, D);

    double total = 0.0;
    for (Index m = 0; m < B; ++m) {
        const auto a = z_a.row(m);
        const auto b = z_x_structured.row(m);
        const double dot = a.dot(b);
        const double na = a.norm();
        const double nb = b.norm();
        const double den = na * nb + kGuard;
        total += dot / den;
        if (g_za || g_zx) {
            const double c = coeff * inv_b;
            const double dd = dot / (den * den);
            const double scale_a = na > 0.0 ? dd * nb / na : 0.0;
            const double scale_b = nb > 0.0 ? dd * na / nb : 0.0;
            if (g_za) g_za->row(m) += c * (b / den - scale_a * a);
            if (g_zx) g_zx->row(m) += c * (a / den - scale_b * b);
        }
    }
    return total * inv_b;
}

} // namespace cfvae
