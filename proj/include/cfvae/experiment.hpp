#ifndef CFVAE_EXPERIMENT_HPP_
#define CFVAE_EXPERIMENT_HPP_

#include "cfvae/audit.hpp"
#include "cfvae/config.hpp"
#include "cfvae/train.hpp"

#include <map>
#include <string>
#include <vector>

namespace cfvae {

struct PreparedData {
    TabularDataset dataset; // subsampled, split, standardized per config
    PredictorTask task;     // from the target column kind
};

// Materializes the configured dataset end to end: generate or load,
// subsample, split, standardize. Archives that already carry split labels
// are taken as prepared and pass through untouched.
PreparedData prepare_dataset(const ExperimentConfig &cfg);

// Predictor suite for this experiment: the per-task defaults filtered by
// [predictors] include and re-tuned by its knobs.
std::vector<PredictorSpec> experiment_predictors(const ExperimentConfig &cfg,
                                                 PredictorTask task);

// Writes the effective config into dir/config.ini.
void write_config_echo(const ExperimentConfig &cfg, const std::string &dir);

// Trains per config and writes a self-describing run directory:
// config.ini, loss.csv (one row per completed epoch), checkpoint.txt,
// summary.txt.
TrainResult run_train(const ExperimentConfig &cfg, const std::string &out_dir);

// Audits the checkpoint in run_dir against the configured dataset and
// writes audit.csv, audit.md, config.ini and per-repeat prediction files
// into out_dir.
AuditReport run_audit(const ExperimentConfig &cfg, const std::string &run_dir,
                      const std::string &out_dir);

// Prepares the dataset and saves it as an archive (schema.txt + data.csv).
void run_ingest(const ExperimentConfig &cfg, const std::string &out_dir);

// The ablation ladder over representation constraints.
const std::vector<std::string> &ablation_arm_names();

// Arm semantics: "full-features" skips the model and predicts from [A, X];
// the other arms train a model and predict from the structured latents,
// with "no-constraints" zeroing every constraint, "constraints-tcr"
// dropping only the orthogonality term, and "cfvae" keeping everything.
CfvaeConfig ablation_arm_config(const CfvaeConfig &base, const std::string &arm);

struct AblationCell {
    double metric_median = 0.0; // rmse (or accuracy) over seeds
    double ufs_median = 0.0;
};

struct AblationTable {
    std::string metric_name;
    std::vector<std::string> arms;
    std::vector<std::string> predictors;
    std::map<std::string, std::map<std::string, AblationCell>> cells; // [arm][predictor]
};

// Runs the requested arms (all four when empty) over [ablation] seeds on
// the configured synthetic dataset; per-seed artifacts land under
// out_dir/<arm>/seed-<s>/ and the median table in ablation.csv/.md.
AblationTable run_ablation(const ExperimentConfig &cfg, const std::string &out_dir,
                           std::vector<std::string> arms = {});

void write_ablation_csv(const AblationTable &table, const std::string &path);
void write_ablation_markdown(const AblationTable &table, const std::string &path);

} // namespace cfvae

#endif
