#ifndef CFVAE_CONFIG_HPP_
#define CFVAE_CONFIG_HPP_

#include "cfvae/audit.hpp"
#include "cfvae/graph.hpp"
#include "cfvae/loaders.hpp"
#include "cfvae/predictors.hpp"
#include "cfvae/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfvae {

struct ConfigEntry {
    std::string section; // "" for the top-level section
    std::string key;
    std::string value;
    int line = 0;
};

// Flat INI-style document: [section] headers, key = value lines, full-line
// '#' comments. Most keys are single-valued; a few (audit filters/swaps)
// may repeat.
class ConfigDoc {
  public:
    static ConfigDoc parse_file(const std::string &path);
    static ConfigDoc parse_string(const std::string &text,
                                  const std::string &origin = "<string>");

    const std::vector<ConfigEntry> &entries() const { return entries_; }
    const std::string &origin() const { return origin_; }

    bool has(const std::string &section, const std::string &key) const;
    std::vector<std::string> values(const std::string &section, const std::string &key) const;

    // Exactly-one / at-most-one accessors. Duplicate single-valued keys are
    // configuration errors, not silent overrides.
    std::string get(const std::string &section, const std::string &key) const;
    std::string get_or(const std::string &section, const std::string &key,
                       const std::string &fallback) const;

    double get_double(const std::string &section, const std::string &key) const;
    double get_double_or(const std::string &section, const std::string &key,
                         double fallback) const;
    long long get_int(const std::string &section, const std::string &key) const;
    long long get_int_or(const std::string &section, const std::string &key,
                         long long fallback) const;
    std::uint64_t get_u64_or(const std::string &section, const std::string &key,
                             std::uint64_t fallback) const;
    bool get_bool_or(const std::string &section, const std::string &key, bool fallback) const;
    // Comma-separated list value; empty when the key is absent.
    std::vector<std::string> get_list(const std::string &section, const std::string &key) const;

  private:
    std::vector<ConfigEntry> entries_;
    std::string origin_;
};

enum class DatasetKind { Law, Adult, Synthetic, Archive, DemoLaw, DemoAdult };

DatasetKind dataset_kind_from_string(const std::string &s);
std::string to_string(DatasetKind kind);

struct DatasetConfig {
    DatasetKind kind = DatasetKind::Synthetic;
    // CSV file for law/adult, archive directory, or where a demo-* stand-in
    // CSV gets materialized (empty = under the output directory).
    std::string path;
    double train_fraction = 0.7;
    Index subsample = 0; // rows kept before splitting; 0 = all
    bool standardize = true;
    LawColumnMap law_columns;
    // synthetic generator knobs
    Index n_samples = 5000;
    double noise_scale = 1.0;
    double sensitive_effect = 1.0;
};

// Everything one experiment needs, resolved and cross-checked. The concept
// graph is loaded at config time so dimension mismatches surface before any
// training starts.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "runs/out";
    DatasetConfig dataset;

    std::string graph_path;
    ConceptGraph graph; // loaded when graph_path is set

    TrainConfig train; // train.seed mirrors seed; cfvae.C mirrors the graph

    int predictor_repeats = 10;
    std::vector<std::string> predictor_include; // empty = the full suite
    int predictor_epochs = 40;
    double predictor_learning_rate = 0.01;
    Index predictor_batch_size = 64;
    std::vector<int> predictor_mlp_hidden{16};

    std::vector<std::pair<std::string, FeatureSetKind>> feature_sets{
        {"full", FeatureSetKind::Full}, {"zxp", FeatureSetKind::Zxp}};
    AuditSelection audit;
    bool write_predictions = true;

    std::vector<std::uint64_t> ablation_seeds{1, 2, 3};
    std::vector<std::string> ablation_arms; // empty = the full ladder

    // Static consistency plus existence of every referenced file.
    void validate() const;
};

// Parse + resolve + validate. Unknown sections or keys are errors.
ExperimentConfig load_experiment_config(const std::string &path);
ExperimentConfig experiment_config_from_doc(const ConfigDoc &doc);

// Canonical round-trippable rendering of the effective config; every run
// directory stores one so results are self-describing.
std::string serialize_experiment_config(const ExperimentConfig &cfg);

} // namespace cfvae

#endif
