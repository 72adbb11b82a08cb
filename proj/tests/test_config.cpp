#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cfvae/config.hpp>
#include <cfvae/experiment.hpp>

#include "helpers.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace cfvae;
using testutil::TempDir;

namespace {

void write_file(const std::string &path, const std::string &text) {
    std::ofstream f(path);
    f << text;
}

std::string slurp(const std::string &path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string graph_text() {
    return "n 3\nlabel 0 c0\nlabel 1 c1\nlabel 2 c2\n"
           "edge 0 1 1.0\nedge 0 2 1.0\nedge 1 2 1.0\n";
}

// A complete, fast synthetic experiment config referencing graph_path.
std::string tiny_experiment_text(const std::string &graph_path) {
    std::ostringstream out;
    out << "seed = 11\n"
        << "[dataset]\n"
        << "kind = synthetic\n"
        << "n_samples = 200\n"
        << "train_fraction = 0.7\n"
        << "[graph]\n"
        << "path = " << graph_path << "\n"
        << "[train]\n"
        << "epochs = 2\n"
        << "batch_size = 64\n"
        << "[predictors]\n"
        << "repeats = 2\n"
        << "epochs = 3\n"
        << "[audit]\n"
        << "feature_sets = full,zxp\n"
        << "[ablation]\n"
        << "seeds = 1\n";
    return out.str();
}

// Runs the CLI under test; returns the exit code and captures stdout+stderr.
// The binary comes from CFVAE_BIN (set by the test harness).
int run_cli(const std::string &args, std::string *output = nullptr) {
    const char *bin = std::getenv("CFVAE_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "CFVAE_BIN must point at the CLI binary");
    static int counter = 0;
    const std::string capture = "/tmp/cfvae_cli_out_" + std::to_string(getpid()) + "_" +
                                std::to_string(counter++) + ".txt";
    const std::string cmd = std::string("\"") + bin + "\" " + args + " > " + capture + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (output) *output = slurp(capture);
    std::remove(capture.c_str());
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

} // namespace

TEST_CASE("ini grammar: sections, comments, and key = value") {
    const ConfigDoc doc = ConfigDoc::parse_string("# header comment\n"
                                                  "seed = 4\n"
                                                  "\r\n"
                                                  "[dataset]\r\n"
                                                  "  kind =   law  \n"
                                                  "filter = sex == 0\n");
    REQUIRE(doc.entries().size() == 3);
    CHECK(doc.entries()[0].section == "");
    CHECK(doc.entries()[0].key == "seed");
    CHECK(doc.entries()[0].value == "4");
    CHECK(doc.entries()[0].line == 2);
    CHECK(doc.entries()[1].section == "dataset");
    CHECK(doc.entries()[1].value == "law");
    CHECK(doc.entries()[1].line == 5);
    // Only the first '=' separates key from value.
    CHECK(doc.entries()[2].key == "filter");
    CHECK(doc.entries()[2].value == "sex == 0");
}

TEST_CASE("grammar errors carry origin and line") {
    const auto message_of = [](const std::string &text) {
        try {
            ConfigDoc::parse_string(text, "conf.ini");
        } catch (const ConfigError &e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message_of("a = 1\n[oops\n").find("conf.ini:2") != std::string::npos);
    CHECK(message_of("[]\n").find("empty section") != std::string::npos);
    CHECK(message_of("just words\n").find("expected key = value") != std::string::npos);
    CHECK(message_of("= 3\n").find("empty key") != std::string::npos);
}

TEST_CASE("single-valued keys reject duplicates, repeated keys collect") {
    const ConfigDoc doc = ConfigDoc::parse_string("[audit]\n"
                                                  "filter = a == 1\n"
                                                  "filter = b == 0\n"
                                                  "max_rows = 5\n"
                                                  "max_rows = 6\n");
    CHECK(doc.has("audit", "filter"));
    CHECK_FALSE(doc.has("audit", "nope"));
    CHECK(doc.values("audit", "filter") == std::vector<std::string>{"a == 1", "b == 0"});
    CHECK_THROWS_AS(doc.get("audit", "filter"), ConfigError);
    CHECK_THROWS_AS(doc.get("audit", "max_rows"), ConfigError);
    CHECK_THROWS_AS(doc.get("audit", "absent"), ConfigError);
    CHECK(doc.get_or("audit", "absent", "x") == "x");
}

TEST_CASE("typed getters parse and reject junk") {
    const ConfigDoc doc = ConfigDoc::parse_string("lr = 1.5e-3\n"
                                                  "epochs = 40\n"
                                                  "bad_num = 1.5x\n"
                                                  "bad_int = 12abc\n"
                                                  "flag_yes = YES\n"
                                                  "flag_off = off\n"
                                                  "flag_bad = maybe\n"
                                                  "widths = 64, 32 ,16\n"
                                                  "seed = abc\n");
    CHECK(doc.get_double("", "lr") == doctest::Approx(1.5e-3));
    CHECK(doc.get_int("", "epochs") == 40);
    CHECK(doc.get_double_or("", "missing", 2.5) == 2.5);
    CHECK(doc.get_int_or("", "missing", 7) == 7);
    CHECK_THROWS_AS(doc.get_double("", "bad_num"), ConfigError);
    CHECK_THROWS_AS(doc.get_int("", "bad_int"), ConfigError);
    CHECK(doc.get_bool_or("", "flag_yes", false));
    CHECK_FALSE(doc.get_bool_or("", "flag_off", true));
    CHECK(doc.get_bool_or("", "missing", true));
    CHECK_THROWS_AS(doc.get_bool_or("", "flag_bad", false), ConfigError);
    CHECK(doc.get_list("", "widths") == std::vector<std::string>{"64", "32", "16"});
    CHECK(doc.get_list("", "missing").empty());
    CHECK_THROWS_AS(doc.get_u64_or("", "seed", 1), ConfigError);
}

TEST_CASE("unknown sections and keys are rejected with their line") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());

    const auto attempt = [&](const std::string &extra) {
        return experiment_config_from_doc(
            ConfigDoc::parse_string(tiny_experiment_text(dir.str("g.txt")) + extra, "conf.ini"));
    };
    CHECK_THROWS_WITH_AS(attempt("[cache]\nsize = 3\n"),
                         doctest::Contains("unknown section [cache]"), ConfigError);
    try {
        attempt("[train]\nmomentum = 0.9\n");
        FAIL("expected a config error");
    } catch (const ConfigError &e) {
        CHECK(std::string(e.what()).find("unknown key 'momentum'") != std::string::npos);
        CHECK(std::string(e.what()).find("conf.ini:") != std::string::npos);
    }
}

TEST_CASE("minimal synthetic config fills defaults from the graph") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    const ExperimentConfig cfg = experiment_config_from_doc(
        ConfigDoc::parse_string("[dataset]\nkind = synthetic\n[graph]\npath = " +
                                dir.str("g.txt") + "\n"));

    CHECK(cfg.seed == 1);
    CHECK(cfg.output_dir == "runs/out");
    CHECK(cfg.dataset.kind == DatasetKind::Synthetic);
    CHECK(cfg.dataset.n_samples == 5000);
    // The latent width follows the concept count when constraints are on.
    CHECK(cfg.train.cfvae.d_zx == 3);
    CHECK(cfg.train.cfvae.use_causal_constraints);
    REQUIRE(cfg.train.cfvae.C.rows() == 3);
    CHECK(cfg.train.cfvae.C(0, 1) == 1.0);
    CHECK(cfg.train.cfvae.C(1, 0) == 0.0);
    CHECK(cfg.train.seed == cfg.seed);
    REQUIRE(cfg.feature_sets.size() == 2);
    CHECK(cfg.feature_sets[0].first == "full");
    CHECK(cfg.feature_sets[1].second == FeatureSetKind::Zxp);
    CHECK(cfg.ablation_seeds == std::vector<std::uint64_t>{1, 2, 3});
}

TEST_CASE("audit filters and swaps parse from repeated keys") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    const ExperimentConfig cfg = experiment_config_from_doc(ConfigDoc::parse_string(
        tiny_experiment_text(dir.str("g.txt")) +
        "[audit]\nmax_rows = 10000\nfilter = sex == 0\nfilter = income == 0\n"
        "swap = race: black <-> white\n"));
    REQUIRE(cfg.audit.filters.size() == 2);
    CHECK(cfg.audit.filters[0] == std::pair<std::string, double>{"sex", 0.0});
    CHECK(cfg.audit.filters[1].first == "income");
    CHECK(cfg.audit.max_rows == 10000);
    REQUIRE(cfg.audit.category_swaps.count("race"));
    CHECK(cfg.audit.category_swaps.at("race") ==
          std::pair<std::string, std::string>{"black", "white"});

    const auto attempt = [&](const std::string &extra) {
        experiment_config_from_doc(
            ConfigDoc::parse_string(tiny_experiment_text(dir.str("g.txt")) + extra));
    };
    CHECK_THROWS_AS(attempt("[audit]\nfilter = sex = 0\n"), ConfigError);
    CHECK_THROWS_AS(attempt("[audit]\nfilter = sex == zero\n"), ConfigError);
    CHECK_THROWS_AS(attempt("[audit]\nswap = race black <-> white\n"), ConfigError);
    CHECK_THROWS_AS(attempt("[audit]\nswap = race: black to white\n"), ConfigError);
}

TEST_CASE("serializing and reparsing reproduces the config") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    const ExperimentConfig cfg = experiment_config_from_doc(ConfigDoc::parse_string(
        tiny_experiment_text(dir.str("g.txt")) +
        "[model]\nd_za = 3\ngamma = 2.5\nopr_weight = 0.25\nencoder_hidden = 24,8\n"
        "[audit]\nfilter = a == 1\nswap = s: p <-> q\n"));

    const std::string text = serialize_experiment_config(cfg);
    const ExperimentConfig back = experiment_config_from_doc(ConfigDoc::parse_string(text));

    CHECK(back.seed == cfg.seed);
    CHECK(back.dataset.kind == cfg.dataset.kind);
    CHECK(back.dataset.n_samples == cfg.dataset.n_samples);
    CHECK(back.dataset.train_fraction == cfg.dataset.train_fraction);
    CHECK(back.train.cfvae.gamma == cfg.train.cfvae.gamma);
    CHECK(back.train.cfvae.opr_weight == cfg.train.cfvae.opr_weight);
    CHECK(back.train.cfvae.encoder_hidden == cfg.train.cfvae.encoder_hidden);
    CHECK(back.train.cfvae.d_zx == cfg.train.cfvae.d_zx);
    CHECK(back.train.cfvae.C == cfg.train.cfvae.C);
    CHECK(back.train.epochs == cfg.train.epochs);
    CHECK(back.predictor_repeats == cfg.predictor_repeats);
    CHECK(back.feature_sets == cfg.feature_sets);
    CHECK(back.audit.filters == cfg.audit.filters);
    CHECK(back.audit.category_swaps == cfg.audit.category_swaps);
    CHECK(back.ablation_seeds == cfg.ablation_seeds);
}

TEST_CASE("experiment validation catches inconsistencies") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    const std::string base = tiny_experiment_text(dir.str("g.txt"));
    const auto attempt = [&](const std::string &text) {
        experiment_config_from_doc(ConfigDoc::parse_string(text));
    };

    // Latent width must match the concept count while constraints are on.
    CHECK_THROWS_WITH_AS(attempt(base + "[model]\nd_zx = 5\n"),
                         doctest::Contains("must equal the concept count"), ConfigError);
    // Constraints need a graph.
    CHECK_THROWS_AS(attempt("[dataset]\nkind = demo-law\n"), ConfigError);
    CHECK_NOTHROW(attempt("[dataset]\nkind = demo-law\n[model]\nuse_causal_constraints = "
                          "false\nd_zx = 2\n"));
    CHECK_THROWS_AS(attempt(base + "[dataset]\ntrain_fraction = 1.0\n"), ConfigError);
    CHECK_THROWS_AS(attempt("[dataset]\nkind = law\n"), ConfigError);
    CHECK_THROWS_AS(attempt("[dataset]\nkind = law\npath = /nope/missing.csv\n"), ConfigError);
    CHECK_THROWS_AS(attempt(base + "[ablation]\narms = everything\n"), ConfigError);
    CHECK_THROWS_AS(attempt(base + "[audit]\nfeature_sets = full,full\n"), ConfigError);
    CHECK_THROWS_AS(attempt(base + "[model]\ntransform_mode = cubic\n"), ConfigError);
    CHECK_THROWS_AS(attempt(base + "[model]\ngamma = -1\n"), ConfigError);
    CHECK_THROWS_AS(attempt(base + "[graph]\npath = /nope/none.txt\n"), ConfigError);
}

TEST_CASE("dataset kind names round trip") {
    for (DatasetKind k : {DatasetKind::Law, DatasetKind::Adult, DatasetKind::Synthetic,
                          DatasetKind::Archive, DatasetKind::DemoLaw, DatasetKind::DemoAdult})
        CHECK(dataset_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(dataset_kind_from_string("parquet"), ConfigError);
}

TEST_CASE("predictor include filters the default suite") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    ExperimentConfig cfg = experiment_config_from_doc(
        ConfigDoc::parse_string(tiny_experiment_text(dir.str("g.txt"))));

    auto all = experiment_predictors(cfg, PredictorTask::Regression);
    REQUIRE(all.size() == 3);
    CHECK(all[0].repeats == 2); // [predictors] knobs propagate
    CHECK(all[0].epochs == 3);

    cfg.predictor_include = {"lr", "mlp_r"};
    auto some = experiment_predictors(cfg, PredictorTask::Regression);
    REQUIRE(some.size() == 2);
    CHECK(some[0].name == "lr_r");
    CHECK(some[1].name == "mlp_r");

    cfg.predictor_include = {"forest"};
    CHECK_THROWS_AS(experiment_predictors(cfg, PredictorTask::Regression), ConfigError);
}

TEST_CASE("ablation arms have fixed semantics") {
    CHECK(ablation_arm_names() ==
          std::vector<std::string>{"full-features", "no-constraints", "constraints-tcr",
                                   "cfvae"});
    CfvaeConfig base = testutil::tiny_model_config(3, 2.0, 1.0);

    const CfvaeConfig off = ablation_arm_config(base, "no-constraints");
    CHECK_FALSE(off.use_causal_constraints);
    CHECK(off.gamma == 0.0);
    CHECK(off.opr_weight == 0.0);
    CHECK(off.C.size() == 0);

    const CfvaeConfig tcr = ablation_arm_config(base, "constraints-tcr");
    CHECK(tcr.use_causal_constraints);
    CHECK(tcr.gamma == 2.0);
    CHECK(tcr.opr_weight == 0.0);

    const CfvaeConfig full = ablation_arm_config(base, "cfvae");
    CHECK(full.gamma == 2.0);
    CHECK(full.opr_weight == 1.0);

    CHECK_THROWS_AS(ablation_arm_config(base, "full-features"), ConfigError);
}

TEST_CASE("cli validates configs and reports usage errors") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    write_file(dir.str("ok.ini"), tiny_experiment_text(dir.str("g.txt")));
    write_file(dir.str("bad.ini"),
               tiny_experiment_text(dir.str("g.txt")) + "[train]\nmomentum = 0.9\n");

    std::string out;
    CHECK(run_cli("validate-config --config " + dir.str("ok.ini"), &out) == 0);
    CHECK(out.find("ok") != std::string::npos);

    CHECK(run_cli("validate-config --config " + dir.str("missing.ini"), &out) == 2);
    CHECK(run_cli("validate-config --config " + dir.str("bad.ini"), &out) == 2);
    CHECK(out.find("momentum") != std::string::npos);

    CHECK(run_cli("", nullptr) == 2);                    // a subcommand is required
    CHECK(run_cli("train --config", nullptr) == 2);      // flag without value
    CHECK(run_cli("frobnicate --config x", nullptr) == 2);
}

TEST_CASE("cli train writes a self-describing run directory") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    write_file(dir.str("exp.ini"), tiny_experiment_text(dir.str("g.txt")));

    std::string out;
    const int rc =
        run_cli("train --config " + dir.str("exp.ini") + " --out " + dir.str("run1"), &out);
    REQUIRE_MESSAGE(rc == 0, out);
    for (const char *name : {"config.ini", "loss.csv", "checkpoint.txt", "summary.txt"})
        CHECK(std::filesystem::exists(dir.str("run1/") + name));

    const std::string loss1 = slurp(dir.str("run1/loss.csv"));
    CHECK(std::count(loss1.begin(), loss1.end(), '\n') == 1 + 2); // header + 2 epochs
    CHECK(loss1.rfind("epoch,recon_a,recon_x,kl_a,kl_x,tcr,opr,total\n", 0) == 0);
    const std::string summary = slurp(dir.str("run1/summary.txt"));
    CHECK(summary.find("epochs_completed = 2") != std::string::npos);
    CHECK(summary.find("diverged = false") != std::string::npos);

    // Same config, same seed: the loss trajectory is byte-identical.
    REQUIRE(run_cli("train --config " + dir.str("exp.ini") + " --out " + dir.str("run2"),
                    &out) == 0);
    CHECK(slurp(dir.str("run2/loss.csv")) == loss1);

    // A seed override changes it.
    REQUIRE(run_cli("train --config " + dir.str("exp.ini") + " --seed 99 --out " +
                        dir.str("run3"),
                    &out) == 0);
    CHECK(slurp(dir.str("run3/loss.csv")) != loss1);
}

TEST_CASE("cli audit consumes a run directory") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    write_file(dir.str("exp.ini"), tiny_experiment_text(dir.str("g.txt")));

    std::string out;
    REQUIRE(run_cli("train --config " + dir.str("exp.ini") + " --out " + dir.str("run"), &out) ==
            0);
    const int rc = run_cli("audit --config " + dir.str("exp.ini") + " " + dir.str("run") +
                               " --out " + dir.str("audit"),
                           &out);
    REQUIRE_MESSAGE(rc == 0, out);
    for (const char *name : {"config.ini", "audit.csv", "audit.md",
                             "predictions_full_lr_r.csv", "predictions_zxp_mlp_r.csv"})
        CHECK(std::filesystem::exists(dir.str("audit/") + name));
    const std::string csv = slurp(dir.str("audit/audit.csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 3); // 2 sets x 3 predictors

    // No checkpoint, no audit.
    std::filesystem::create_directories(dir.str("empty"));
    CHECK(run_cli("audit --config " + dir.str("exp.ini") + " " + dir.str("empty"), &out) == 2);
    CHECK(out.find("checkpoint") != std::string::npos);
}

TEST_CASE("cli ablation runs a reduced ladder") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    write_file(dir.str("exp.ini"), tiny_experiment_text(dir.str("g.txt")) +
                                       "[predictors]\ninclude = lr\n");

    std::string out;
    const int rc = run_cli("ablation --config " + dir.str("exp.ini") + " --out " +
                               dir.str("abl") + " --arm full-features --arm cfvae",
                           &out);
    REQUIRE_MESSAGE(rc == 0, out);
    CHECK(std::filesystem::exists(dir.str("abl/ablation.csv")));
    CHECK(std::filesystem::exists(dir.str("abl/ablation.md")));
    CHECK(std::filesystem::exists(dir.str("abl/full-features/seed-1/audit.csv")));
    CHECK(std::filesystem::exists(dir.str("abl/cfvae/seed-1/checkpoint.txt")));
    const std::string csv = slurp(dir.str("abl/ablation.csv"));
    CHECK(csv.rfind("arm,predictor,rmse_median,ufs_median\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2); // 2 arms x 1 predictor
}

TEST_CASE("cli ingest saves a prepared archive") {
    TempDir dir;
    write_file(dir.str("g.txt"), graph_text());
    write_file(dir.str("exp.ini"), tiny_experiment_text(dir.str("g.txt")));

    std::string out;
    const int rc =
        run_cli("ingest --config " + dir.str("exp.ini") + " --out " + dir.str("arch"), &out);
    REQUIRE_MESSAGE(rc == 0, out);
    for (const char *name : {"schema.txt", "data.csv", "config.ini"})
        CHECK(std::filesystem::exists(dir.str("arch/") + name));
}
