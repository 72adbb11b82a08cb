#ifndef CFVAE_MLP_HPP_
#define CFVAE_MLP_HPP_

#include "cfvae/rng.hpp"
#include "cfvae/types.hpp"

#include <cmath>
#include <vector>

namespace cfvae {

// Feed-forward net with ReLU hidden layers and a linear output layer.
// Weights are (in x out); activations flow as row-major batches:
// H_{l+1} = act(H_l * W_l + b_l). Gradients are accumulated explicitly so
// one backward pass can serve several loss terms.
struct Mlp {
    std::vector<Matrix> W;
    std::vector<Matrix> b; // 1 x out rows
    std::vector<Matrix> gW;
    std::vector<Matrix> gb;

    static Mlp make(Index in, const std::vector<int> &hidden, Index out, Rng &rng) {
        Mlp net;
        std::vector<Index> widths{in};
        for (int h : hidden) widths.push_back(h);
        widths.push_back(out);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            const Index fan_in = widths[l];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            net.W.push_back(rng.uniform_matrix(fan_in, widths[l + 1], -bound, bound));
            net.b.push_back(rng.uniform_matrix(1, widths[l + 1], -bound, bound));
            net.gW.emplace_back(Matrix::Zero(fan_in, widths[l + 1]));
            net.gb.emplace_back(Matrix::Zero(1, widths[l + 1]));
        }
        return net;
    }

    Index in_width() const { return W.front().rows(); }
    Index out_width() const { return W.back().cols(); }
    std::size_t layers() const { return W.size(); }

    // cache[l] holds the input of layer l (cache[0] is X); filled when given.
    Matrix forward(const Matrix &x, std::vector<Matrix> *cache = nullptr) const {
        if (x.cols() != in_width())
            throw NumericError("mlp: input width " + std::to_string(x.cols()) + " != " +
                               std::to_string(in_width()));
        Matrix h = x;
        if (cache) {
            cache->clear();
            cache->push_back(h);
        }
        for (std::size_t l = 0; l < W.size(); ++l) {
            h = (h * W[l]).rowwise() + b[l].row(0);
            if (l + 1 < W.size()) h = h.cwiseMax(0.0);
            if (cache && l + 1 < W.size()) cache->push_back(h);
        }
        return h;
    }

    // Accumulates parameter gradients from d(loss)/d(output) and returns
    // d(loss)/d(input). Requires the cache of the forward pass.
    Matrix backward(const std::vector<Matrix> &cache, const Matrix &grad_out) {
        Matrix g = grad_out;
        for (std::size_t l = W.size(); l-- > 0;) {
            gW[l] += cache[l].transpose() * g;
            gb[l] += g.colwise().sum();
            g = g * W[l].transpose();
            if (l > 0) g = g.cwiseProduct((cache[l].array() > 0.0).cast<double>().matrix());
        }
        return g;
    }

    void zero_grad() {
        for (auto &m : gW) m.setZero();
        for (auto &m : gb) m.setZero();
    }

    template <typename Fn>
    void visit_params(Fn &&fn) {
        for (std::size_t l = 0; l < W.size(); ++l) {
            fn(W[l], gW[l]);
            fn(b[l], gb[l]);
        }
    }
};

} // namespace cfvae

#endif
