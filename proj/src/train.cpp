#include "cfvae/train.hpp"

#include "cfvae/rng.hpp"

#include <chrono>
#include <cmath>

namespace cfvae {

void TrainConfig::validate(Index n_train) const {
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (batch_size > n_train)
        throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds training rows " +
                          std::to_string(n_train));
    if (learning_rate < 0.0 || learning_rate >= 1.0)
        throw ConfigError("learning_rate must be in [0, 1)");
    if (optimizer != "sgd" && optimizer != "adam")
        throw ConfigError("unknown optimizer: " + optimizer);
}

TrainResult train(const TabularDataset &ds, const TrainConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto train_idx = ds.indices_of_split(kSplitTrain);
    const Index n_train = static_cast<Index>(train_idx.size());
    if (n_train == 0) throw ConfigError("dataset has no training rows");
    cfg.validate(n_train);

    const Matrix a_all = ds.role_block(ColumnRole::Sensitive, kSplitTrain);
    const Matrix x_all = ds.role_block(ColumnRole::Covariate, kSplitTrain);

    CfvaeConfig model_cfg = cfg.cfvae;
    model_cfg.seed = subseed(cfg.seed, "model");
    TrainResult result{CfvaeModel(model_cfg, BlockLayout::from_schema(ds.schema, ColumnRole::Sensitive),
                                  BlockLayout::from_schema(ds.schema, ColumnRole::Covariate)),
                       TrainReport{}};
    CfvaeModel &model = result.model;
    TrainReport &report = result.report;

    Rng shuffle_rng(subseed(cfg.seed, "epoch-shuffle"));
    Rng eps_rng(subseed(cfg.seed, "reparam"));
    Optimizer opt(cfg.optimizer, cfg.learning_rate);
    const auto params = model.params();

    std::vector<Index> order(static_cast<std::size_t>(n_train));
    for (Index i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        LossBreakdown epoch_mean;
        double rows_used = 0.0;
        bool finite = true;

        for (Index start = 0; start < n_train; start += cfg.batch_size) {
            const Index bsz = std::min(cfg.batch_size, n_train - start);
            if (bsz < 2) break; // lone trailing row: the TC estimator has no pair for it
            Matrix a(bsz, a_all.cols()), x(bsz, x_all.cols());
            for (Index i = 0; i < bsz; ++i) {
                a.row(i) = a_all.row(order[static_cast<std::size_t>(start + i)]);
                x.row(i) = x_all.row(order[static_cast<std::size_t>(start + i)]);
            }
            const Matrix eps_a = eps_rng.normal_matrix(bsz, model.config().d_za);
            const Matrix eps_x = eps_rng.normal_matrix(bsz, model.config().d_zx);

            model.zero_grad();
            LossBreakdown b;
            try {
                b = model.loss_and_grad(a, x, &eps_a, &eps_x,
                                        static_cast<double>(n_train));
            } catch (const NumericError &) {
                finite = false;
                break;
            }
            if (!std::isfinite(b.total)) {
                finite = false;
                break;
            }
            opt.step(params);

            const double w = static_cast<double>(bsz);
            epoch_mean.recon_a += w * b.recon_a;
            epoch_mean.recon_x += w * b.recon_x;
            epoch_mean.kl_a += w * b.kl_a;
            epoch_mean.kl_x += w * b.kl_x;
            epoch_mean.tcr += w * b.tcr;
            epoch_mean.opr += w * b.opr;
            epoch_mean.total += w * b.total;
            rows_used += w;
        }

        if (!finite || rows_used == 0.0) {
            report.diverged = true;
            break;
        }
        epoch_mean.recon_a /= rows_used;
        epoch_mean.recon_x /= rows_used;
        epoch_mean.kl_a /= rows_used;
        epoch_mean.kl_x /= rows_used;
        epoch_mean.tcr /= rows_used;
        epoch_mean.opr /= rows_used;
        epoch_mean.total /= rows_used;
        report.history.push_back(epoch_mean);
        report.last_finite_epoch = epoch;
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

Matrix transform_dataset(const CfvaeModel &model, const TabularDataset &ds, int split) {
    return model.structured_means(ds.role_block(ColumnRole::Covariate, split));
}

} // namespace cfvae
