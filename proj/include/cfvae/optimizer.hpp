#ifndef CFVAE_OPTIMIZER_HPP_
#define CFVAE_OPTIMIZER_HPP_

#include "cfvae/types.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace cfvae {

struct ParamRef {
    Matrix *param;
    Matrix *grad;
};

class SgdOptimizer {
public:
    explicit SgdOptimizer(double lr) : lr_(lr) {}

    void step(const std::vector<ParamRef> &params) {
        for (const auto &p : params) *p.param -= lr_ * *p.grad;
    }

private:
    double lr_;
};

class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<ParamRef> &params) {
        if (m_.empty()) {
            for (const auto &p : params) {
                m_.emplace_back(Matrix::Zero(p.param->rows(), p.param->cols()));
                v_.emplace_back(Matrix::Zero(p.param->rows(), p.param->cols()));
            }
        }
        if (m_.size() != params.size())
            throw NumericError("adam: parameter list changed size");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Matrix &g = *params[i].grad;
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            const Matrix mhat = m_[i] / bc1;
            const Matrix vhat = v_[i] / bc2;
            params[i].param->array() -=
                lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
        }
    }

private:
    double lr_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Matrix> m_, v_;
};

// Small dispatcher so training code can hold either by name.
class Optimizer {
public:
    Optimizer(const std::string &kind, double lr) : kind_(kind) {
        if (kind == "sgd")
            sgd_.emplace(lr);
        else if (kind == "adam")
            adam_.emplace(lr);
        else
            throw ConfigError("unknown optimizer: " + kind);
    }

    void step(const std::vector<ParamRef> &params) {
        if (sgd_)
            sgd_->step(params);
        else
            adam_->step(params);
    }

    const std::string &kind() const { return kind_; }

private:
    std::string kind_;
    std::optional<SgdOptimizer> sgd_;
    std::optional<AdamOptimizer> adam_;
};

} // namespace cfvae

#endif
