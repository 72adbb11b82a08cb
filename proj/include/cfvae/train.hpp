#ifndef CFVAE_TRAIN_HPP_
#define CFVAE_TRAIN_HPP_

#include "cfvae/dataset.hpp"
#include "cfvae/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfvae {

struct TrainConfig {
    int epochs = 50;
    Index batch_size = 128;
    double learning_rate = 1e-3;
    std::string optimizer = "adam"; // or "sgd"
    std::uint64_t seed = 0;         // root; shuffle/eps/init streams derive from it
    CfvaeConfig cfvae;

    void validate(Index n_train) const;
};

struct TrainReport {
    std::vector<LossBreakdown> history; // one entry per completed epoch
    double wall_seconds = 0.0;
    bool diverged = false;
    int last_finite_epoch = -1; // -1 when divergence hit in epoch 0
};

struct TrainResult {
    CfvaeModel model;
    TrainReport report;
};

// Minibatch gradient descent on the full objective over the training split.
// Epoch order is a seeded shuffle; a trailing batch of one row is dropped
// (the total-correlation estimator needs pairs). A non-finite loss aborts
// with everything up to the last finite epoch kept.
TrainResult train(const TabularDataset &ds, const TrainConfig &cfg);

// Deterministic downstream features for the given split (-1 = all rows):
// covariate posterior means through the structured transform.
Matrix transform_dataset(const CfvaeModel &model, const TabularDataset &ds, int split = -1);

} // namespace cfvae

#endif
