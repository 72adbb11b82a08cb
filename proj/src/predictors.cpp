#include "cfvae/predictors.hpp"

#include "cfvae/rng.hpp"

#include <Eigen/QR>

#include <cmath>
#include <iostream>

namespace cfvae {

namespace {

Matrix with_intercept(const Matrix &x) {
    Matrix out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

Vector linear_predict(const Vector &w, const Matrix &x) {
    return Vector(w(0) + (x * w.tail(w.size() - 1)).array());
}

Vector labels_from_logits(const Vector &logits) {
    Vector out(logits.size());
    for (Index i = 0; i < logits.size(); ++i) out(i) = logits(i) > 0.0 ? 1.0 : 0.0;
    return out;
}

Vector closed_form_regression(const Matrix &x, const Vector &y) {
    const Matrix design = with_intercept(x);
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < design.cols()) {
        std::cerr << "warning: singular least-squares system, ridge fallback (1e-6)\n";
        return normal_equations_fit(x, y, 1e-6);
    }
    return qr.solve(y);
}

// Ridge-damped Newton iterations on the logistic log-likelihood; the tiny
// lambda keeps the Hessian invertible on separable data.
Vector newton_logistic(const Matrix &x, const Vector &y, double lambda = 1e-6,
                       int max_iter = 50) {
    const Matrix design = with_intercept(x);
    const Index d = design.cols();
    Vector w = Vector::Zero(d);
    for (int it = 0; it < max_iter; ++it) {
        const Vector logits = design * w;
        Vector p(logits.size());
        for (Index i = 0; i < p.size(); ++i) p(i) = sigmoid(logits(i));
        Vector grad = design.transpose() * (p - y) + lambda * w;
        Matrix h = Matrix::Zero(d, d);
        for (Index i = 0; i < design.rows(); ++i) {
            const double s = std::max(p(i) * (1.0 - p(i)), 1e-12);
            h.noalias() += s * design.row(i).transpose() * design.row(i);
        }
        h.diagonal().array() += lambda;
        const Vector step = h.ldlt().solve(grad);
        w -= step;
        if (grad.norm() < 1e-10) break;
    }
    return w;
}

// One SGD fit of a linear model; squared loss or logistic loss.
Vector sgd_linear(const PredictorSpec &spec, const Matrix &x, const Vector &y, Rng &rng) {
    const Index n = x.rows();
    const Index d = x.cols() + 1;
    Vector w = 0.01 * rng.normal_matrix(d, 1).col(0);
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    const Index bsz = std::min<Index>(spec.batch_size, n);
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        rng.shuffle(order);
        for (Index start = 0; start < n; start += bsz) {
            const Index b = std::min(bsz, n - start);
            Vector grad = Vector::Zero(d);
            for (Index i = 0; i < b; ++i) {
                const Index r = order[static_cast<std::size_t>(start + i)];
                const double raw = w(0) + x.row(r).dot(w.tail(d - 1));
                double err;
                if (spec.task == PredictorTask::Regression)
                    err = raw - y(r);
                else
                    err = sigmoid(raw) - y(r);
                grad(0) += err;
                grad.tail(d - 1) += err * x.row(r).transpose();
            }
            w -= (spec.learning_rate / static_cast<double>(b)) * grad;
        }
    }
    return w;
}

// One SGD fit of a small MLP with a single scalar output.
Mlp mlp_fit(const PredictorSpec &spec, const Matrix &x, const Vector &y, Rng &rng) {
    Mlp net = Mlp::make(x.cols(), spec.mlp_hidden, 1, rng);
    const Index n = x.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    const Index bsz = std::min<Index>(spec.batch_size, n);
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        rng.shuffle(order);
        for (Index start = 0; start < n; start += bsz) {
            const Index b = std::min(bsz, n - start);
            Matrix xb(b, x.cols());
            Vector yb(b);
            for (Index i = 0; i < b; ++i) {
                const Index r = order[static_cast<std::size_t>(start + i)];
                xb.row(i) = x.row(r);
                yb(i) = y(r);
            }
            std::vector<Matrix> cache;
            const Matrix raw = net.forward(xb, &cache);
            Matrix g(b, 1);
            for (Index i = 0; i < b; ++i) {
                const double out = raw(i, 0);
                g(i, 0) = spec.task == PredictorTask::Regression ? out - yb(i)
                                                                 : sigmoid(out) - yb(i);
            }
            g /= static_cast<double>(b);
            net.zero_grad();
            net.backward(cache, g);
            net.visit_params([&](Matrix &p, Matrix &grad) { p -= spec.learning_rate * grad; });
        }
    }
    return net;
}

} // namespace

void PredictorSpec::validate() const {
    if (repeats < 1) throw ConfigError("predictor repeats must be >= 1");
    if (epochs <= 0) throw ConfigError("predictor epochs must be positive");
    if (learning_rate <= 0.0) throw ConfigError("predictor learning rate must be positive");
    if (batch_size < 1) throw ConfigError("predictor batch size must be >= 1");
    for (int w : mlp_hidden)
        if (w <= 0) throw ConfigError("predictor hidden widths must be positive");
}

std::vector<PredictorSpec> default_predictors(PredictorTask task, std::uint64_t seed_base) {
    const char *suffix = task == PredictorTask::Regression ? "_r" : "_c";
    PredictorSpec lr{std::string("lr") + suffix, task, PredictorKind::ClosedForm};
    PredictorSpec sgd{std::string("sgd") + suffix, task, PredictorKind::Sgd};
    PredictorSpec mlp{std::string("mlp") + suffix, task, PredictorKind::Mlp};
    for (PredictorSpec *s : {&lr, &sgd, &mlp}) s->seed_base = seed_base;
    return {lr, sgd, mlp};
}

Vector normal_equations_fit(const Matrix &x, const Vector &y, double ridge) {
    const Matrix design = with_intercept(x);
    Matrix gram = design.transpose() * design;
    gram.diagonal().array() += ridge;
    return gram.ldlt().solve(design.transpose() * y);
}

PredictionRun fit_predict(const PredictorSpec &spec, const Matrix &train_x,
                          const Vector &train_y,
                          const std::map<std::string, Matrix> &eval_sets) {
    spec.validate();
    if (train_x.rows() != train_y.size())
        throw NumericError("fit_predict: feature/target row mismatch");
    if (train_x.rows() == 0) throw NumericError("fit_predict: empty training set");
    for (const auto &[name, m] : eval_sets)
        if (m.cols() != train_x.cols())
            throw NumericError("fit_predict: eval set '" + name + "' width " +
                               std::to_string(m.cols()) + " != train width " +
                               std::to_string(train_x.cols()));
    if (spec.task == PredictorTask::Classification)
        for (Index i = 0; i < train_y.size(); ++i)
            if (train_y(i) != 0.0 && train_y(i) != 1.0)
                throw NumericError("fit_predict: classification targets must be binary");

    PredictionRun run;
    run.predictor = spec.name;

    auto emit_linear = [&](const Vector &w, int repeat) {
        for (const auto &[name, m] : eval_sets) {
            Vector raw = linear_predict(w, m);
            run.predictions[name].resize(static_cast<std::size_t>(spec.repeats));
            run.predictions[name][static_cast<std::size_t>(repeat)] =
                spec.task == PredictorTask::Classification ? labels_from_logits(raw) : raw;
        }
    };

    switch (spec.kind) {
        case PredictorKind::ClosedForm: {
            const Vector w = spec.task == PredictorTask::Regression
                                 ? closed_form_regression(train_x, train_y)
                                 : newton_logistic(train_x, train_y);
            for (int r = 0; r < spec.repeats; ++r) emit_linear(w, r);
            break;
        }
        case PredictorKind::Sgd: {
            for (int r = 0; r < spec.repeats; ++r) {
                Rng rng(subseed(spec.seed_base, spec.name + "-repeat-" + std::to_string(r)));
                emit_linear(sgd_linear(spec, train_x, train_y, rng), r);
            }
            break;
        }
        case PredictorKind::Mlp: {
            for (int r = 0; r < spec.repeats; ++r) {
                Rng rng(subseed(spec.seed_base, spec.name + "-repeat-" + std::to_string(r)));
                Mlp net = mlp_fit(spec, train_x, train_y, rng);
                for (const auto &[name, m] : eval_sets) {
                    Vector raw = net.forward(m).col(0);
                    run.predictions[name].resize(static_cast<std::size_t>(spec.repeats));
                    run.predictions[name][static_cast<std::size_t>(r)] =
                        spec.task == PredictorTask::Classification ? labels_from_logits(raw)
                                                                   : raw;
                }
            }
            break;
        }
    }
    return run;
}

FeatureSetKind feature_set_kind_from_string(const std::string &s) {
    if (s == "full") return FeatureSetKind::Full;
    if (s == "zxp") return FeatureSetKind::Zxp;
    if (s == "xnon") return FeatureSetKind::Xnon;
    throw ConfigError("unknown feature set: " + s);
}

std::string to_string(FeatureSetKind kind) {
    switch (kind) {
        case FeatureSetKind::Full: return "full";
        case FeatureSetKind::Zxp: return "zxp";
        case FeatureSetKind::Xnon: return "xnon";
    }
    return "?";
}

bool feature_set_contains_sensitive(FeatureSetKind kind) {
    return kind == FeatureSetKind::Full;
}

Matrix extract_features(FeatureSetKind kind, const TabularDataset &ds, const CfvaeModel *model,
                        const Matrix &encoded_rows) {
    switch (kind) {
        case FeatureSetKind::Full: {
            const Matrix a = ds.block_of_rows(encoded_rows, ColumnRole::Sensitive);
            const Matrix x = ds.block_of_rows(encoded_rows, ColumnRole::Covariate);
            Matrix out(encoded_rows.rows(), a.cols() + x.cols());
            out << a, x;
            return out;
        }
        case FeatureSetKind::Zxp: {
            if (!model) throw ConfigError("zxp features need a trained model");
            return model->structured_means(ds.block_of_rows(encoded_rows, ColumnRole::Covariate));
        }
        case FeatureSetKind::Xnon: {
            std::vector<Index> cols;
            Index at = 0;
            for (const ColumnSpec &c : ds.schema.columns) {
                if (c.role == ColumnRole::Covariate) {
                    if (c.non_descendant)
                        for (Index k = 0; k < c.encoded_width(); ++k) cols.push_back(at + k);
                    at += c.encoded_width();
                }
            }
            if (cols.empty())
                throw ConfigError("xnon features need ground-truth non-descendant flags");
            const Matrix x = ds.block_of_rows(encoded_rows, ColumnRole::Covariate);
            Matrix out(x.rows(), static_cast<Index>(cols.size()));
            for (std::size_t i = 0; i < cols.size(); ++i)
                out.col(static_cast<Index>(i)) = x.col(cols[i]);
            return out;
        }
    }
    throw ConfigError("unhandled feature set kind");
}

} // namespace cfvae
