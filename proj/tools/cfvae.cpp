#include "cfvae/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string config_path;
    std::string out_dir;
    std::string run_dir; // audit input
    bool has_seed = false;
    std::uint64_t seed = 0;
    std::vector<std::string> arms;
};

cfvae::ExperimentConfig load_config(const Options &opt) {
    cfvae::ExperimentConfig cfg = cfvae::load_experiment_config(opt.config_path);
    if (opt.has_seed) {
        cfg.seed = opt.seed;
        cfg.train.seed = opt.seed;
        cfg.train.cfvae.seed = opt.seed;
    }
    if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
    return cfg;
}

int do_train(const Options &opt) {
    const cfvae::ExperimentConfig cfg = load_config(opt);
    const cfvae::TrainResult res = cfvae::run_train(cfg, cfg.output_dir);
    if (res.report.diverged) {
        std::fprintf(stderr,
                     "training diverged after epoch %d; partial artifacts are in %s\n",
                     res.report.last_finite_epoch, cfg.output_dir.c_str());
        return kExitRuntime;
    }
    std::printf("run directory: %s (%zu epochs)\n", cfg.output_dir.c_str(),
                res.report.history.size());
    return kExitOk;
}

int do_audit(const Options &opt) {
    const cfvae::ExperimentConfig cfg = load_config(opt);
    const std::string out =
        !opt.out_dir.empty() ? opt.out_dir : opt.run_dir + "/audit";
    const cfvae::AuditReport rep = cfvae::run_audit(cfg, opt.run_dir, out);
    std::printf("audit over %lld rows -> %s (feature sets: %zu, predictors: %zu)\n",
                static_cast<long long>(rep.audit_rows), out.c_str(),
                rep.feature_sets.size(), rep.predictors.size());
    return kExitOk;
}

int do_ablation(const Options &opt) {
    const cfvae::ExperimentConfig cfg = load_config(opt);
    const cfvae::AblationTable table =
        cfvae::run_ablation(cfg, cfg.output_dir, opt.arms);
    std::printf("ablation table (%zu arms x %zu predictors) -> %s\n", table.arms.size(),
                table.predictors.size(), cfg.output_dir.c_str());
    return kExitOk;
}

int do_ingest(const Options &opt) {
    const cfvae::ExperimentConfig cfg = load_config(opt);
    cfvae::run_ingest(cfg, cfg.output_dir);
    std::printf("archive written to %s\n", cfg.output_dir.c_str());
    return kExitOk;
}

int do_validate(const Options &opt) {
    load_config(opt);
    std::printf("%s: ok\n", opt.config_path.c_str());
    return kExitOk;
}

bool is_validation_error(const std::exception &e) {
    return dynamic_cast<const cfvae::ConfigError *>(&e) != nullptr ||
           dynamic_cast<const cfvae::SchemaError *>(&e) != nullptr ||
           dynamic_cast<const cfvae::GraphError *>(&e) != nullptr ||
           dynamic_cast<const cfvae::IngestError *>(&e) != nullptr;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"counterfactually fair representation experiments"};
    app.require_subcommand(1);

    Options opt;
    const auto add_common = [&](CLI::App *cmd, bool needs_out_default) {
        cmd->add_option("--config", opt.config_path, "experiment config file")
            ->required();
        cmd->add_option("--out", opt.out_dir,
                        needs_out_default ? "output directory (default: config output_dir)"
                                          : "output directory");
        cmd->add_option("--seed", opt.seed, "root seed override")
            ->each([&](const std::string &) { opt.has_seed = true; });
    };

    CLI::App *train_cmd = app.add_subcommand("train", "train a model and write a run directory");
    add_common(train_cmd, true);

    CLI::App *audit_cmd =
        app.add_subcommand("audit", "situation-test a trained run directory");
    add_common(audit_cmd, false);
    audit_cmd->add_option("run_dir", opt.run_dir, "run directory holding checkpoint.txt")
        ->required();

    CLI::App *ablation_cmd =
        app.add_subcommand("ablation", "run the constraint ablation ladder");
    add_common(ablation_cmd, true);
    ablation_cmd->add_option("--arm", opt.arms,
                             "restrict to these arms (full-features, no-constraints, "
                             "constraints-tcr, cfvae)");

    CLI::App *ingest_cmd =
        app.add_subcommand("ingest", "prepare the dataset and save it as an archive");
    add_common(ingest_cmd, true);

    CLI::App *validate_cmd =
        app.add_subcommand("validate-config", "parse and validate a config, run nothing");
    validate_cmd->add_option("--config", opt.config_path, "experiment config file")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (train_cmd->parsed()) return do_train(opt);
        if (audit_cmd->parsed()) return do_audit(opt);
        if (ablation_cmd->parsed()) return do_ablation(opt);
        if (ingest_cmd->parsed()) return do_ingest(opt);
        if (validate_cmd->parsed()) return do_validate(opt);
    } catch (const std::exception &e) {
        if (is_validation_error(e)) {
            std::fprintf(stderr, "validation error: %s\n", e.what());
            return kExitValidation;
        }
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitValidation;
}
