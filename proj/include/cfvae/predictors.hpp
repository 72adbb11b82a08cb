#ifndef CFVAE_PREDICTORS_HPP_
#define CFVAE_PREDICTORS_HPP_

#include "cfvae/dataset.hpp"
#include "cfvae/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cfvae {

enum class PredictorTask { Regression, Classification };
enum class PredictorKind { ClosedForm, Sgd, Mlp };

struct PredictorSpec {
    std::string name;
    PredictorTask task = PredictorTask::Regression;
    PredictorKind kind = PredictorKind::ClosedForm;
    int repeats = 10;
    std::uint64_t seed_base = 0;
    std::vector<int> mlp_hidden{16};
    int epochs = 40;
    double learning_rate = 0.01;
    Index batch_size = 64;

    void validate() const;
};

// The three-per-task predictor suite: closed-form linear, SGD-trained
// linear, and a small MLP.
std::vector<PredictorSpec> default_predictors(PredictorTask task, std::uint64_t seed_base);

struct PredictionRun {
    std::string predictor;
    // eval set name -> one prediction vector per repeat. Classification
    // predictions are hard 0/1 labels.
    std::map<std::string, std::vector<Vector>> predictions;
};

// Fits per the spec (closed form once, iterative kinds once per repeat with
// a per-repeat sub-seed) and predicts every eval set. A singular
// least-squares system falls back to ridge (lambda = 1e-6) with a warning
// on stderr.
PredictionRun fit_predict(const PredictorSpec &spec, const Matrix &train_x,
                          const Vector &train_y,
                          const std::map<std::string, Matrix> &eval_sets);

// Reference solution via the normal equations, used as the oracle for the
// closed-form path.
Vector normal_equations_fit(const Matrix &x, const Vector &y, double ridge = 0.0);

enum class FeatureSetKind { Full, Zxp, Xnon };

FeatureSetKind feature_set_kind_from_string(const std::string &s);
std::string to_string(FeatureSetKind kind);

// Maps encoded dataset rows to one feature space:
//   Full: [sensitive block | covariate block]
//   Zxp:  structured posterior means of the covariate encoder (needs model)
//   Xnon: covariate columns flagged non-descendant (generated data only)
Matrix extract_features(FeatureSetKind kind, const TabularDataset &ds,
                        const CfvaeModel *model, const Matrix &encoded_rows);

// True when this feature space contains sensitive columns; fitting guards
// assert only such sets may expose them.
bool feature_set_contains_sensitive(FeatureSetKind kind);

} // namespace cfvae

#endif
