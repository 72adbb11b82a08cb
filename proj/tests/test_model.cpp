#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cfvae/losses.hpp>
#include <cfvae/model.hpp>
#include <cfvae/rng.hpp>

#include "helpers.hpp"

#include <cmath>
#include <fstream>

using namespace cfvae;
using testutil::TempDir;

TEST_CASE("block layouts mirror the schema") {
    const Schema schema = testutil::tiny_schema();
    const BlockLayout a = BlockLayout::from_schema(schema, ColumnRole::Sensitive);
    const BlockLayout x = BlockLayout::from_schema(schema, ColumnRole::Covariate);

    CHECK(a.width == 1);
    REQUIRE(a.heads.size() == 1);
    CHECK(a.heads[0].kind == HeadKind::Bernoulli);

    CHECK(x.width == 6);
    REQUIRE(x.heads.size() == 4);
    CHECK(x.heads[0].kind == HeadKind::Gaussian);
    CHECK(x.heads[2].kind == HeadKind::Bernoulli);
    CHECK(x.heads[3].kind == HeadKind::Categorical);
    CHECK(x.heads[3].offset == 3);
    CHECK(x.heads[3].width == 3);
}

TEST_CASE("config validation") {
    CfvaeConfig good = testutil::tiny_model_config();
    CHECK_NOTHROW(good.validate());

    CfvaeConfig bad = good;
    bad.d_za = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = good;
    bad.gamma = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = good;
    bad.d_za = 2; // opr needs matching latent widths
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = good;
    bad.C = Matrix::Zero(2, 2); // constraints demand a d_zx-sized matrix
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = good;
    bad.C(2, 0) = 1.0; // closes a cycle with the chain edges
    CHECK_THROWS_AS(bad.validate(), GraphError);

    bad = good;
    bad.encoder_hidden = {8, 0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encode pins z to the mean without noise and reparameterizes with it") {
    const CfvaeConfig cfg = testutil::tiny_model_config(11);
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(4);
    const auto [a, x] = testutil::tiny_batch(5, rng);

    const LatentBatch mean_latent = model.encode(a, x);
    CHECK(mean_latent.z_a == mean_latent.mu_a);
    CHECK(mean_latent.z_x == mean_latent.mu_x);

    const Matrix eps_a = rng.normal_matrix(5, cfg.d_za);
    const Matrix eps_x = rng.normal_matrix(5, cfg.d_zx);
    const LatentBatch latent = model.encode(a, x, &eps_a, &eps_x);
    // z = mu + exp(logvar / 2) * eps, checked elementwise.
    const Matrix expect =
        latent.mu_a + (latent.logvar_a.array() / 2.0).exp().matrix().cwiseProduct(eps_a);
    CHECK((latent.z_a - expect).cwiseAbs().maxCoeff() < 1e-14);

    // The structured latent is the causal transform of z_x.
    const Matrix structured = structure_transform(latent.z_x, cfg.C);
    CHECK((latent.z_x_structured - structured).cwiseAbs().maxCoeff() < 1e-14);

    const Matrix wrong = rng.normal_matrix(4, cfg.d_za);
    CHECK_THROWS_AS(model.encode(a, x, &wrong, &eps_x), NumericError);
}

TEST_CASE("constraints toggle copies the latent through") {
    CfvaeConfig cfg = testutil::tiny_model_config(12);
    cfg.use_causal_constraints = false;
    cfg.C = Matrix();
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(5);
    const auto [a, x] = testutil::tiny_batch(4, rng);
    const Matrix eps_a = rng.normal_matrix(4, cfg.d_za);
    const Matrix eps_x = rng.normal_matrix(4, cfg.d_zx);
    const LatentBatch latent = model.encode(a, x, &eps_a, &eps_x);
    CHECK(latent.z_x_structured == latent.z_x);
}

TEST_CASE("decoder heads score hand-checkable log-likelihoods") {
    CfvaeConfig cfg = testutil::tiny_model_config(13, 0.0, 0.0);
    CfvaeModel model = testutil::tiny_model(cfg);

    // Silence both decoders: Gaussian heads predict 0, Bernoulli and
    // categorical heads emit uniform logits.
    for (Mlp *net : {&model.decoder_a, &model.decoder_x}) {
        for (auto &w : net->W) w.setZero();
        for (auto &b : net->b) b.setZero();
    }

    Matrix a = Matrix::Zero(2, 1); // any binary value scores log 0.5
    a(1, 0) = 1.0;
    Matrix x = Matrix::Zero(2, 6);
    x(0, 3) = 1.0; // category p
    x(1, 5) = 1.0; // category r; continuous x1, x2 stay 0, binary x3 stays 0

    const LatentBatch latent = model.encode(a, x);
    const auto [recon_a, recon_x] = model.decode(latent, a, x);

    CHECK(recon_a == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    const double expect_x = 2.0 * (-0.5 * kLog2Pi) + std::log(0.5) + std::log(1.0 / 3.0);
    CHECK(recon_x == doctest::Approx(expect_x).epsilon(1e-12));
}

TEST_CASE("loss breakdown satisfies the total identity") {
    const CfvaeConfig cfg = testutil::tiny_model_config(14, 2.0, 0.9);
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(6);
    const auto [a, x] = testutil::tiny_batch(16, rng);
    const Matrix eps_a = rng.normal_matrix(16, cfg.d_za);
    const Matrix eps_x = rng.normal_matrix(16, cfg.d_zx);

    const LatentBatch latent = model.encode(a, x, &eps_a, &eps_x);
    const LossBreakdown b = model.loss(a, x, latent, 100.0);
    const double rebuilt = -(b.recon_a + b.recon_x) + b.kl_a + b.kl_x + b.tcr + b.opr;
    CHECK(std::abs(b.total - rebuilt) < 1e-9);
    CHECK(std::isfinite(b.total));

    // loss_and_grad reports the same canonical values.
    model.zero_grad();
    const LossBreakdown g = model.loss_and_grad(a, x, &eps_a, &eps_x, 100.0);
    CHECK(g.total == doctest::Approx(b.total).epsilon(1e-12));
    CHECK(g.tcr == doctest::Approx(b.tcr).epsilon(1e-12));
}

TEST_CASE("tcr term scales linearly in gamma") {
    Rng rng(7);
    const auto [a, x] = testutil::tiny_batch(12, rng);
    const Matrix eps_a = rng.normal_matrix(12, 3);
    const Matrix eps_x = rng.normal_matrix(12, 3);

    CfvaeModel one = testutil::tiny_model(testutil::tiny_model_config(21, 1.0, 0.0));
    CfvaeModel ten = testutil::tiny_model(testutil::tiny_model_config(21, 10.0, 0.0));
    const LatentBatch l1 = one.encode(a, x, &eps_a, &eps_x);
    const LatentBatch l10 = ten.encode(a, x, &eps_a, &eps_x);
    const LossBreakdown b1 = one.loss(a, x, l1, 64.0);
    const LossBreakdown b10 = ten.loss(a, x, l10, 64.0);
    CHECK(b10.tcr == doctest::Approx(10.0 * b1.tcr).epsilon(1e-9));
}

TEST_CASE("analytic gradients match finite differences for every term") {
    // Toy model: widths <= 8, batch 4, fixed posterior draws.
    const CfvaeConfig cfg = testutil::tiny_model_config(31, 1.3, 0.7);
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(8);
    const auto [a, x] = testutil::tiny_batch(4, rng);
    const Matrix eps_a = rng.normal_matrix(4, cfg.d_za);
    const Matrix eps_x = rng.normal_matrix(4, cfg.d_zx);
    const double n_data = 64.0;

    struct Term {
        const char *name;
        TermWeights weights;
    };
    std::vector<Term> terms;
    TermWeights w = TermWeights::none();
    w.recon_a = 1.0;
    terms.push_back({"recon_a", w});
    w = TermWeights::none();
    w.recon_x = 1.0;
    terms.push_back({"recon_x", w});
    w = TermWeights::none();
    w.kl_a = 1.0;
    terms.push_back({"kl_a", w});
    w = TermWeights::none();
    w.kl_x = 1.0;
    terms.push_back({"kl_x", w});
    w = TermWeights::none();
    w.tcr = 1.0;
    terms.push_back({"tcr", w});
    w = TermWeights::none();
    w.opr = 1.0;
    terms.push_back({"opr", w});
    terms.push_back({"total", TermWeights::total()});

    for (const auto &term : terms) {
        CAPTURE(term.name);
        const auto res = testutil::model_grad_check(model, a, x, eps_a, eps_x, n_data,
                                                    term.weights);
        CHECK(res.entries > 0);
        CHECK(res.max_err < 1e-4);
    }
}

TEST_CASE("gradients flow for the one-step transform too") {
    CfvaeConfig cfg = testutil::tiny_model_config(32, 1.0, 0.5);
    cfg.transform_mode = TransformMode::OneStep;
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(9);
    const auto [a, x] = testutil::tiny_batch(4, rng);
    const Matrix eps_a = rng.normal_matrix(4, cfg.d_za);
    const Matrix eps_x = rng.normal_matrix(4, cfg.d_zx);
    const auto res = testutil::model_grad_check(model, a, x, eps_a, eps_x, 64.0,
                                                TermWeights::total());
    CHECK(res.max_err < 1e-4);
}

TEST_CASE("without constraints the objective is two independent plain VAEs") {
    // Rebuild both single-modality objectives from primitive pieces and
    // compare term by term.
    CfvaeConfig cfg = testutil::tiny_model_config(41, 0.0, 0.0);
    cfg.use_causal_constraints = false;
    cfg.C = Matrix();
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(10);
    const Index b = 8;
    const auto [a, x] = testutil::tiny_batch(b, rng);
    const Matrix eps_a = rng.normal_matrix(b, cfg.d_za);
    const Matrix eps_x = rng.normal_matrix(b, cfg.d_zx);

    const LatentBatch latent = model.encode(a, x, &eps_a, &eps_x);
    const LossBreakdown got = model.loss(a, x, latent, 100.0);

    auto vae_terms = [&](const Mlp &encoder, Mlp &decoder, const Matrix &input,
                         const std::vector<DecoderHead> &heads, const Matrix &eps) {
        const Matrix enc = encoder.forward(input);
        const Index d = enc.cols() / 2;
        const Matrix mu = enc.leftCols(d);
        const Matrix logvar = enc.rightCols(d);
        const Matrix z = mu + (logvar.array() / 2.0).exp().matrix().cwiseProduct(eps);
        const Matrix out = decoder.forward(z);

        double recon = 0.0;
        for (const auto &head : heads) {
            for (Index r = 0; r < input.rows(); ++r) {
                if (head.kind == HeadKind::Gaussian) {
                    recon += gaussian_loglik_unit(input(r, head.offset), out(r, head.offset));
                } else if (head.kind == HeadKind::Bernoulli) {
                    recon += bernoulli_loglik_logit(input(r, head.offset), out(r, head.offset));
                } else {
                    const auto logits = out.row(r).segment(head.offset, head.width);
                    const double mx = logits.maxCoeff();
                    const double lse = mx + std::log((logits.array() - mx).exp().sum());
                    for (Index k = 0; k < head.width; ++k)
                        recon += input(r, head.offset + k) * (logits(k) - lse);
                }
            }
        }
        recon /= static_cast<double>(input.rows());
        // KL against the standard normal prior, from the closed form.
        const double kl =
            0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum() /
            static_cast<double>(input.rows());
        return std::make_pair(recon, kl);
    };

    const auto [recon_a, kl_a] =
        vae_terms(model.encoder_a, model.decoder_a, a, model.a_layout().heads, eps_a);
    const auto [recon_x, kl_x] =
        vae_terms(model.encoder_x, model.decoder_x, x, model.x_layout().heads, eps_x);

    CHECK(std::abs(got.recon_a - recon_a) < 1e-9);
    CHECK(std::abs(got.recon_x - recon_x) < 1e-9);
    CHECK(std::abs(got.kl_a - kl_a) < 1e-9);
    CHECK(std::abs(got.kl_x - kl_x) < 1e-9);
    CHECK(got.tcr == 0.0);
    CHECK(got.opr == 0.0);
    CHECK(std::abs(got.total - (-(recon_a + recon_x) + kl_a + kl_x)) < 1e-9);
}

TEST_CASE("structured means are deterministic covariate-only features") {
    const CfvaeConfig cfg = testutil::tiny_model_config(51, 1.0, 0.5);
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(11);
    const auto [a, x] = testutil::tiny_batch(6, rng);

    const Matrix f1 = model.structured_means(x);
    const Matrix f2 = model.structured_means(x);
    CHECK(f1 == f2);
    CHECK(f1.cols() == cfg.d_zx);

    // Identical to the mean-pinned encode path.
    const LatentBatch latent = model.encode(a, x);
    CHECK((f1 - latent.z_x_structured).cwiseAbs().maxCoeff() < 1e-14);

    // Identical covariate rows give identical features.
    Matrix x2 = x;
    x2.row(3) = x2.row(0);
    const Matrix f3 = model.structured_means(x2);
    CHECK(f3.row(3) == f3.row(0));
}

TEST_CASE("non-finite inputs are reported with the batch row") {
    const CfvaeConfig cfg = testutil::tiny_model_config(52);
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(12);
    auto [a, x] = testutil::tiny_batch(4, rng);
    x(2, 1) = std::nan("");
    try {
        model.encode(a, x);
        FAIL("expected NumericError");
    } catch (const NumericError &e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("checkpoints restore forwards bit-for-bit") {
    TempDir dir;
    const CfvaeConfig cfg = testutil::tiny_model_config(61, 1.7, 0.3);
    CfvaeModel model = testutil::tiny_model(cfg);
    Rng rng(13);
    const auto [a, x] = testutil::tiny_batch(8, rng);
    const Matrix eps_a = rng.normal_matrix(8, cfg.d_za);
    const Matrix eps_x = rng.normal_matrix(8, cfg.d_zx);

    const std::string path = dir.str("model.txt");
    model.save_checkpoint(path);
    CfvaeModel back = CfvaeModel::load_checkpoint(path);

    CHECK(back.config().gamma == cfg.gamma);
    CHECK(back.config().opr_weight == cfg.opr_weight);
    CHECK(back.config().d_zx == cfg.d_zx);
    CHECK(back.config().C == cfg.C);

    const LatentBatch l1 = model.encode(a, x, &eps_a, &eps_x);
    const LatentBatch l2 = back.encode(a, x, &eps_a, &eps_x);
    CHECK(l1.mu_a == l2.mu_a);           // exact equality, not approximate
    CHECK(l1.logvar_x == l2.logvar_x);
    CHECK(l1.z_x_structured == l2.z_x_structured);

    const LossBreakdown b1 = model.loss(a, x, l1, 64.0);
    const LossBreakdown b2 = back.loss(a, x, l2, 64.0);
    CHECK(b1.total == b2.total);

    // Constraint-free checkpoints round trip too.
    CfvaeConfig free_cfg = testutil::tiny_model_config(62, 0.0, 0.0);
    free_cfg.use_causal_constraints = false;
    free_cfg.C = Matrix();
    CfvaeModel free_model = testutil::tiny_model(free_cfg);
    free_model.save_checkpoint(dir.str("free.txt"));
    CfvaeModel free_back = CfvaeModel::load_checkpoint(dir.str("free.txt"));
    CHECK_FALSE(free_back.config().use_causal_constraints);
    CHECK(free_back.structured_means(x) == free_model.structured_means(x));

    CHECK_THROWS_AS(CfvaeModel::load_checkpoint(dir.str("absent.txt")), IoError);
    std::ofstream bad(dir.str("bad.txt"));
    bad << "not a checkpoint\n";
    bad.close();
    CHECK_THROWS_AS(CfvaeModel::load_checkpoint(dir.str("bad.txt")), IoError);
}

TEST_CASE("same seed builds identical models") {
    const CfvaeConfig cfg = testutil::tiny_model_config(71);
    CfvaeModel m1 = testutil::tiny_model(cfg);
    CfvaeModel m2 = testutil::tiny_model(cfg);
    for (std::size_t l = 0; l < m1.encoder_a.layers(); ++l)
        CHECK(m1.encoder_a.W[l] == m2.encoder_a.W[l]);

    CfvaeConfig other = cfg;
    other.seed = 72;
    CfvaeModel m3 = testutil::tiny_model(other);
    CHECK(m1.encoder_a.W[0] != m3.encoder_a.W[0]);
}
