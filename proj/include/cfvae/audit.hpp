#ifndef CFVAE_AUDIT_HPP_
#define CFVAE_AUDIT_HPP_

#include "cfvae/dataset.hpp"
#include "cfvae/model.hpp"
#include "cfvae/predictors.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cfvae {

// Which rows the situation test runs on and how categorical sensitive
// values invert. Binary sensitive columns flip 0<->1; continuous ones
// reflect across their full-data median; categorical ones need a declared
// category swap (an involution).
struct AuditSelection {
    bool test_split_only = true;
    Index max_rows = 0; // 0 = unlimited
    // decoded-value equality filters, e.g. {"sex", 0} and {"income", 0}
    std::vector<std::pair<std::string, double>> filters;
    // sensitive column name -> pair of category labels to swap
    std::map<std::string, std::pair<std::string, std::string>> category_swaps;

    std::string description() const;
};

struct AuditSet {
    Matrix original; // encoded rows
    Matrix matched;  // sensitive values inverted, everything else equal
    std::vector<Index> row_ids;
    std::string selection;
};

AuditSet build_audit_set(const TabularDataset &ds, const AuditSelection &sel);

// Situation-test metrics: RMS prediction gap and flipped-label fraction.
double ufs_r(const Vector &original, const Vector &matched);
double ufs_c(const Vector &original, const Vector &matched);

struct MetricCell {
    double metric_mean = 0.0, metric_std = 0.0; // rmse or accuracy
    double ufs_mean = 0.0, ufs_std = 0.0;
    bool features_identical = false; // audit features bit-equal across the pair
};

struct AuditReport {
    PredictorTask task = PredictorTask::Regression;
    std::string metric_name; // "rmse" or "accuracy"
    std::vector<std::string> feature_sets;
    std::vector<std::string> predictors;
    std::map<std::string, std::map<std::string, MetricCell>> cells; // [set][predictor]
    std::string selection;
    Index audit_rows = 0;
};

// Full audit protocol: per feature set, fit every predictor on the training
// split, score it on the test split, and run the situation test on the
// audit pair. Representation features route both audit sides through the
// trained encoder; identical covariates therefore give identical features,
// which the report records per cell. When predictions_dir is non-empty,
// every per-repeat prediction is persisted there as CSV.
AuditReport evaluate(const TabularDataset &ds, const CfvaeModel *model,
                     const std::vector<PredictorSpec> &predictors,
                     const std::vector<std::pair<std::string, FeatureSetKind>> &feature_sets,
                     const AuditSelection &sel, const std::string &predictions_dir = "");

void write_audit_csv(const AuditReport &report, const std::string &path);
void write_audit_markdown(const AuditReport &report, const std::string &path);

} // namespace cfvae

#endif
