#include "cfvae/experiment.hpp"

#include "cfvae/rng.hpp"
#include "cfvae/simulate.hpp"
#include "cfvae/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace cfvae {

namespace {

std::string demo_csv_path(const ExperimentConfig &cfg, const char *basename) {
    if (!cfg.dataset.path.empty()) return cfg.dataset.path;
    return cfg.output_dir + "/" + basename;
}

void ensure_parent_dir(const std::string &path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

TabularDataset materialize(const ExperimentConfig &cfg) {
    switch (cfg.dataset.kind) {
        case DatasetKind::Law:
            return load_law(cfg.dataset.path, cfg.dataset.law_columns);
        case DatasetKind::Adult:
            return load_adult(cfg.dataset.path);
        case DatasetKind::Archive:
            return load_dataset(cfg.dataset.path);
        case DatasetKind::Synthetic: {
            SyntheticSpec spec;
            spec.n_samples = cfg.dataset.n_samples;
            spec.graph = cfg.graph;
            spec.noise_scale = cfg.dataset.noise_scale;
            spec.sensitive_effect = cfg.dataset.sensitive_effect;
            spec.seed = subseed(cfg.seed, "synthetic");
            return generate_synthetic(spec).dataset;
        }
        case DatasetKind::DemoLaw: {
            const std::string path = demo_csv_path(cfg, "demo-law.csv");
            ensure_parent_dir(path);
            write_law_like_csv(path);
            return load_law(path, cfg.dataset.law_columns);
        }
        case DatasetKind::DemoAdult: {
            const std::string path = demo_csv_path(cfg, "demo-adult.csv");
            ensure_parent_dir(path);
            write_adult_like_csv(path);
            return load_adult(path);
        }
    }
    throw ConfigError("unhandled dataset kind");
}

PredictorTask target_task(const Schema &schema) {
    for (const auto &col : schema.columns) {
        if (col.role != ColumnRole::Target) continue;
        if (col.kind == ColumnKind::Continuous) return PredictorTask::Regression;
        if (col.kind == ColumnKind::Binary) return PredictorTask::Classification;
        throw SchemaError("categorical targets are not supported: " + col.name);
    }
    throw SchemaError("dataset has no target column");
}

void write_loss_csv(const std::vector<LossBreakdown> &history, const std::string &path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "epoch,recon_a,recon_x,kl_a,kl_x,tcr,opr,total\n";
    char buf[400];
    for (std::size_t e = 0; e < history.size(); ++e) {
        const LossBreakdown &h = history[e];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e,
                      h.recon_a, h.recon_x, h.kl_a, h.kl_x, h.tcr, h.opr, h.total);
        f << buf;
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

PreparedData prepare_dataset(const ExperimentConfig &cfg) {
    cfg.validate();
    TabularDataset ds = materialize(cfg);
    const bool already_prepared =
        cfg.dataset.kind == DatasetKind::Archive && !ds.split_labels.empty();
    if (!already_prepared) {
        if (cfg.dataset.subsample > 0 && cfg.dataset.subsample < ds.n())
            subsample_dataset(ds, cfg.dataset.subsample, subseed(cfg.seed, "subsample"));
        split_dataset(ds, cfg.dataset.train_fraction, subseed(cfg.seed, "split"));
        if (cfg.dataset.standardize) standardize(ds);
    }
    const PredictorTask task = target_task(ds.schema);
    return {std::move(ds), task};
}

std::vector<PredictorSpec> experiment_predictors(const ExperimentConfig &cfg,
                                                 PredictorTask task) {
    std::vector<PredictorSpec> specs =
        default_predictors(task, subseed(cfg.seed, "predictors"));
    for (PredictorSpec &s : specs) {
        s.repeats = cfg.predictor_repeats;
        s.epochs = cfg.predictor_epochs;
        s.learning_rate = cfg.predictor_learning_rate;
        s.batch_size = cfg.predictor_batch_size;
        s.mlp_hidden = cfg.predictor_mlp_hidden;
    }
    if (!cfg.predictor_include.empty()) {
        const auto matches = [](const PredictorSpec &s, const std::string &want) {
            if (s.name == want) return true;
            const std::size_t cut = s.name.rfind('_');
            return cut != std::string::npos && s.name.substr(0, cut) == want;
        };
        for (const auto &want : cfg.predictor_include) {
            const bool known = std::any_of(specs.begin(), specs.end(),
                                           [&](const PredictorSpec &s) { return matches(s, want); });
            if (!known) throw ConfigError("unknown predictor in include: " + want);
        }
        std::vector<PredictorSpec> kept;
        for (const PredictorSpec &s : specs) {
            const bool wanted =
                std::any_of(cfg.predictor_include.begin(), cfg.predictor_include.end(),
                            [&](const std::string &w) { return matches(s, w); });
            if (wanted) kept.push_back(s);
        }
        specs = std::move(kept);
    }
    for (const PredictorSpec &s : specs) s.validate();
    return specs;
}

void write_config_echo(const ExperimentConfig &cfg, const std::string &dir) {
    fs::create_directories(dir);
    const std::string path = dir + "/config.ini";
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << serialize_experiment_config(cfg);
    if (!f.good()) throw IoError("failed writing " + path);
}

TrainResult run_train(const ExperimentConfig &cfg, const std::string &out_dir) {
    PreparedData pd = prepare_dataset(cfg);
    fs::create_directories(out_dir);
    write_config_echo(cfg, out_dir);

    TrainResult res = train(pd.dataset, cfg.train);
    write_loss_csv(res.report.history, out_dir + "/loss.csv");
    res.model.save_checkpoint(out_dir + "/checkpoint.txt");

    const std::string summary_path = out_dir + "/summary.txt";
    std::ofstream f(summary_path);
    if (!f) throw IoError("cannot write " + summary_path);
    f << "epochs_completed = " << res.report.history.size() << "\n";
    f << "diverged = " << (res.report.diverged ? "true" : "false") << "\n";
    f << "last_finite_epoch = " << res.report.last_finite_epoch << "\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "wall_seconds = %.3f\n", res.report.wall_seconds);
    f << buf;
    if (!res.report.history.empty()) {
        std::snprintf(buf, sizeof(buf), "final_total = %.17g\n",
                      res.report.history.back().total);
        f << buf;
    }
    return res;
}

AuditReport run_audit(const ExperimentConfig &cfg, const std::string &run_dir,
                      const std::string &out_dir) {
    const std::string ckpt = run_dir + "/checkpoint.txt";
    if (!fs::exists(ckpt)) throw ConfigError("run directory has no checkpoint: " + ckpt);

    PreparedData pd = prepare_dataset(cfg);
    CfvaeModel model = CfvaeModel::load_checkpoint(ckpt);
    if (model.a_layout().width != pd.dataset.schema.encoded_width(ColumnRole::Sensitive) ||
        model.x_layout().width != pd.dataset.schema.encoded_width(ColumnRole::Covariate))
        throw ConfigError("checkpoint layout does not match the configured dataset");

    const auto preds = experiment_predictors(cfg, pd.task);
    fs::create_directories(out_dir);
    write_config_echo(cfg, out_dir);
    const std::string pred_dir = cfg.write_predictions ? out_dir : "";
    AuditReport rep = evaluate(pd.dataset, &model, preds, cfg.feature_sets, cfg.audit, pred_dir);
    write_audit_csv(rep, out_dir + "/audit.csv");
    write_audit_markdown(rep, out_dir + "/audit.md");
    return rep;
}

void run_ingest(const ExperimentConfig &cfg, const std::string &out_dir) {
    PreparedData pd = prepare_dataset(cfg);
    fs::create_directories(out_dir);
    save_dataset(pd.dataset, out_dir);
    write_config_echo(cfg, out_dir);
}

const std::vector<std::string> &ablation_arm_names() {
    static const std::vector<std::string> arms{"full-features", "no-constraints",
                                               "constraints-tcr", "cfvae"};
    return arms;
}

CfvaeConfig ablation_arm_config(const CfvaeConfig &base, const std::string &arm) {
    CfvaeConfig c = base;
    if (arm == "no-constraints") {
        c.use_causal_constraints = false;
        c.gamma = 0.0;
        c.opr_weight = 0.0;
        c.C.resize(0, 0);
    } else if (arm == "constraints-tcr") {
        c.opr_weight = 0.0;
    } else if (arm == "cfvae") {
        // the full objective as configured
    } else {
        throw ConfigError("no trained model for ablation arm: " + arm);
    }
    return c;
}

AblationTable run_ablation(const ExperimentConfig &cfg, const std::string &out_dir,
                           std::vector<std::string> arms) {
    if (cfg.dataset.kind != DatasetKind::Synthetic)
        throw ConfigError("the ablation ladder runs on synthetic data");
    if (arms.empty())
        arms = cfg.ablation_arms.empty() ? ablation_arm_names() : cfg.ablation_arms;
    for (const auto &arm : arms) {
        const auto &all = ablation_arm_names();
        if (std::find(all.begin(), all.end(), arm) == all.end())
            throw ConfigError("unknown ablation arm: " + arm);
    }

    fs::create_directories(out_dir);
    write_config_echo(cfg, out_dir);

    AblationTable table;
    table.arms = arms;
    std::map<std::string, std::map<std::string, std::vector<double>>> metric_samples;
    std::map<std::string, std::map<std::string, std::vector<double>>> ufs_samples;

    for (const std::uint64_t seed : cfg.ablation_seeds) {
        ExperimentConfig c = cfg;
        c.seed = seed;
        c.train.seed = seed;
        c.train.cfvae.seed = seed;
        PreparedData pd = prepare_dataset(c);
        if (pd.task != PredictorTask::Regression)
            throw ConfigError("the ablation ladder expects a continuous target");
        const auto preds = experiment_predictors(c, pd.task);
        if (table.predictors.empty())
            for (const auto &p : preds) table.predictors.push_back(p.name);
        table.metric_name = "rmse";

        for (const std::string &arm : arms) {
            const std::string arm_dir =
                out_dir + "/" + arm + "/seed-" + std::to_string(seed);
            fs::create_directories(arm_dir);
            AuditReport rep;
            std::string set_name;
            if (arm == "full-features") {
                set_name = "full";
                rep = evaluate(pd.dataset, nullptr, preds,
                               {{set_name, FeatureSetKind::Full}}, cfg.audit, arm_dir);
            } else {
                set_name = "zxp";
                TrainConfig tc = c.train;
                tc.cfvae = ablation_arm_config(c.train.cfvae, arm);
                TrainResult res = train(pd.dataset, tc);
                if (res.report.diverged)
                    throw NumericError("ablation arm " + arm + " diverged (seed " +
                                       std::to_string(seed) + ")");
                write_loss_csv(res.report.history, arm_dir + "/loss.csv");
                res.model.save_checkpoint(arm_dir + "/checkpoint.txt");
                rep = evaluate(pd.dataset, &res.model, preds,
                               {{set_name, FeatureSetKind::Zxp}}, cfg.audit, arm_dir);
            }
            write_audit_csv(rep, arm_dir + "/audit.csv");
            for (const auto &p : preds) {
                const MetricCell &cell = rep.cells.at(set_name).at(p.name);
                metric_samples[arm][p.name].push_back(cell.metric_mean);
                ufs_samples[arm][p.name].push_back(cell.ufs_mean);
            }
        }
    }

    for (const std::string &arm : arms)
        for (const std::string &p : table.predictors)
            table.cells[arm][p] = {median(metric_samples.at(arm).at(p)),
                                   median(ufs_samples.at(arm).at(p))};

    write_ablation_csv(table, out_dir + "/ablation.csv");
    write_ablation_markdown(table, out_dir + "/ablation.md");
    return table;
}

void write_ablation_csv(const AblationTable &table, const std::string &path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "arm,predictor," << table.metric_name << "_median,ufs_median\n";
    char buf[200];
    for (const auto &arm : table.arms)
        for (const auto &p : table.predictors) {
            const AblationCell &c = table.cells.at(arm).at(p);
            std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", arm.c_str(), p.c_str(),
                          c.metric_median, c.ufs_median);
            f << buf;
        }
    if (!f.good()) throw IoError("failed writing " + path);
}

void write_ablation_markdown(const AblationTable &table, const std::string &path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "# Ablation ladder\n\n";
    f << "Median over seeds per arm; predictions come from representation features\n";
    f << "except the full-features arm, which predicts from raw [A, X].\n\n";
    f << "| arm |";
    for (const auto &p : table.predictors)
        f << " " << p << " " << table.metric_name << " | " << p << " ufs |";
    f << "\n|---|";
    for (std::size_t i = 0; i < table.predictors.size(); ++i) f << "---|---|";
    f << "\n";
    char buf[64];
    for (const auto &arm : table.arms) {
        f << "| " << arm << " |";
        for (const auto &p : table.predictors) {
            const AblationCell &c = table.cells.at(arm).at(p);
            std::snprintf(buf, sizeof(buf), " %.3f |", c.metric_median);
            f << buf;
            std::snprintf(buf, sizeof(buf), " %.3f |", c.ufs_median);
            f << buf;
        }
        f << "\n";
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

} // namespace cfvae
