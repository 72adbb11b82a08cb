#include "cfvae/model.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cfvae {

namespace {

std::string hexa(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_hexa(const std::string &s, const std::string &where) {
    const char *start = s.c_str();
    char *end = nullptr;
    const double v = std::strtod(start, &end);
    if (end != start + s.size())
        throw IoError("checkpoint: bad numeric '" + s + "' in " + where);
    return v;
}

std::string head_kind_name(HeadKind k) {
    switch (k) {
        case HeadKind::Gaussian: return "gaussian";
        case HeadKind::Bernoulli: return "bernoulli";
        case HeadKind::Categorical: return "categorical";
    }
    return "?";
}

HeadKind head_kind_from(const std::string &s) {
    if (s == "gaussian") return HeadKind::Gaussian;
    if (s == "bernoulli") return HeadKind::Bernoulli;
    if (s == "categorical") return HeadKind::Categorical;
    throw IoError("checkpoint: unknown head kind " + s);
}

void check_finite_rows(const Matrix &m, const char *what) {
    if (m.allFinite()) return;
    for (Index r = 0; r < m.rows(); ++r)
        if (!m.row(r).allFinite())
            throw NumericError(std::string(what) + ": non-finite activations at batch row " +
                               std::to_string(r));
    throw NumericError(std::string(what) + ": non-finite activations");
}

// Batch-mean log-likelihood of `target` under the head outputs in `raw`;
// when g_raw is given, coeff/B times the per-entry gradient accumulates.
double heads_loglik(const std::vector<DecoderHead> &heads, const Matrix &target,
                    const Matrix &raw, double coeff, Matrix *g_raw) {
    const Index b = target.rows();
    const double cb = coeff / static_cast<double>(b);
    double total = 0.0;
    for (const DecoderHead &head : heads) {
        switch (head.kind) {
            case HeadKind::Gaussian:
                for (Index m = 0; m < b; ++m) {
                    const double t = target(m, head.offset);
                    const double r = raw(m, head.offset);
                    total += gaussian_loglik_unit(t, r);
                    if (g_raw) (*g_raw)(m, head.offset) += cb * (t - r);
                }
                break;
            case HeadKind::Bernoulli:
                for (Index m = 0; m < b; ++m) {
                    const double t = target(m, head.offset);
                    const double r = raw(m, head.offset);
                    total += bernoulli_loglik_logit(t, r);
                    if (g_raw) (*g_raw)(m, head.offset) += cb * (t - sigmoid(r));
                }
                break;
            case HeadKind::Categorical:
                for (Index m = 0; m < b; ++m) {
                    const auto r = raw.row(m).segment(head.offset, head.width);
                    const auto t = target.row(m).segment(head.offset, head.width);
                    const double mx = r.maxCoeff();
                    const Eigen::RowVectorXd e = (r.array() - mx).exp();
                    const double lse = mx + std::log(e.sum());
                    total += t.dot(r) - lse;
                    if (g_raw)
                        g_raw->row(m).segment(head.offset, head.width) +=
                            cb * (t - e / e.sum());
                }
                break;
        }
    }
    return total / static_cast<double>(b);
}

} // namespace

BlockLayout BlockLayout::from_schema(const Schema &schema, ColumnRole role) {
    BlockLayout layout;
    for (const ColumnSpec &c : schema.columns) {
        if (c.role != role) continue;
        DecoderHead head;
        head.offset = layout.width;
        head.width = c.encoded_width();
        switch (c.kind) {
            case ColumnKind::Continuous: head.kind = HeadKind::Gaussian; break;
            case ColumnKind::Binary: head.kind = HeadKind::Bernoulli; break;
            case ColumnKind::Categorical: head.kind = HeadKind::Categorical; break;
        }
        layout.heads.push_back(head);
        layout.width += head.width;
    }
    return layout;
}

void CfvaeConfig::validate() const {
    if (d_za <= 0 || d_zx <= 0) throw ConfigError("latent dimensions must be positive");
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (opr_weight < 0.0) throw ConfigError("opr_weight must be >= 0");
    if (opr_weight > 0.0 && d_za != d_zx)
        throw ConfigError("opr needs d_za == d_zx, got " + std::to_string(d_za) + " vs " +
                          std::to_string(d_zx));
    for (int wdt : encoder_hidden)
        if (wdt <= 0) throw ConfigError("encoder hidden widths must be positive");
    for (int wdt : decoder_hidden)
        if (wdt <= 0) throw ConfigError("decoder hidden widths must be positive");
    if (use_causal_constraints) {
        if (C.rows() != d_zx || C.cols() != d_zx)
            throw ConfigError("adjacency matrix must be " + std::to_string(d_zx) + "x" +
                              std::to_string(d_zx) + " to match d_zx");
        validate_dag(C);
    }
}

CfvaeModel::CfvaeModel(const CfvaeConfig &config, BlockLayout a_layout, BlockLayout x_layout)
    : config_(config), a_layout_(std::move(a_layout)), x_layout_(std::move(x_layout)) {
    config_.validate();
    if (a_layout_.width <= 0 || x_layout_.width <= 0)
        throw SchemaError("model needs non-empty sensitive and covariate blocks");
    Index covered = 0;
    for (const auto &h : a_layout_.heads) covered += h.width;
    if (covered != a_layout_.width) throw SchemaError("sensitive heads do not cover the block");
    covered = 0;
    for (const auto &h : x_layout_.heads) covered += h.width;
    if (covered != x_layout_.width) throw SchemaError("covariate heads do not cover the block");

    Rng rng(subseed(config_.seed, "model-init"));
    encoder_a = Mlp::make(a_layout_.width, config_.encoder_hidden, 2 * config_.d_za, rng);
    encoder_x = Mlp::make(x_layout_.width, config_.encoder_hidden, 2 * config_.d_zx, rng);
    decoder_a = Mlp::make(config_.d_za, config_.decoder_hidden, a_layout_.width, rng);
    decoder_x = Mlp::make(config_.d_zx, config_.decoder_hidden, x_layout_.width, rng);
}

LatentBatch CfvaeModel::encode(const Matrix &a, const Matrix &x, const Matrix *eps_a,
                               const Matrix *eps_x) const {
    if (a.rows() != x.rows())
        throw NumericError("encode: sensitive and covariate batches disagree on rows");
    const Matrix ea = encoder_a.forward(a);
    const Matrix ex = encoder_x.forward(x);
    check_finite_rows(ea, "encode (sensitive)");
    check_finite_rows(ex, "encode (covariate)");

    LatentBatch out;
    out.mu_a = ea.leftCols(config_.d_za);
    out.logvar_a = ea.rightCols(config_.d_za);
    out.mu_x = ex.leftCols(config_.d_zx);
    out.logvar_x = ex.rightCols(config_.d_zx);

    auto sample = [](const Matrix &mu, const Matrix &logvar, const Matrix *eps,
                     const char *what) {
        if (!eps) return mu;
        if (eps->rows() != mu.rows() || eps->cols() != mu.cols())
            throw NumericError(std::string(what) + ": eps shape mismatch");
        return Matrix(mu.array() + (0.5 * logvar.array()).exp() * eps->array());
    };
    out.z_a = sample(out.mu_a, out.logvar_a, eps_a, "encode (sensitive)");
    out.z_x = sample(out.mu_x, out.logvar_x, eps_x, "encode (covariate)");
    out.z_x_structured = config_.use_causal_constraints
                             ? structure_transform(out.z_x, config_.C, config_.transform_mode)
                             : out.z_x;
    return out;
}

std::pair<double, double> CfvaeModel::decode(const LatentBatch &latent, const Matrix &a,
                                             const Matrix &x) const {
    if (a.cols() != a_layout_.width || x.cols() != x_layout_.width)
        throw SchemaError("decode: target widths do not match the schema blocks");
    const Matrix ra = decoder_a.forward(latent.z_a);
    const Matrix rx = decoder_x.forward(latent.z_x_structured);
    const double recon_a = heads_loglik(a_layout_.heads, a, ra, 0.0, nullptr);
    const double recon_x = heads_loglik(x_layout_.heads, x, rx, 0.0, nullptr);
    return {recon_a, recon_x};
}

LossBreakdown CfvaeModel::loss(const Matrix &a, const Matrix &x, const LatentBatch &latent,
                               double dataset_size) const {
    LossBreakdown out;
    std::tie(out.recon_a, out.recon_x) = decode(latent, a, x);
    out.kl_a = kl_standard_normal(latent.mu_a, latent.logvar_a);
    out.kl_x = kl_standard_normal(latent.mu_x, latent.logvar_x);
    out.tcr = tcr_loss(latent.z_x, latent.mu_x, latent.logvar_x, config_.gamma, dataset_size);
    out.opr = config_.opr_weight == 0.0
                  ? 0.0
                  : config_.opr_weight * opr_loss(latent.z_a, latent.z_x_structured);
    out.total = -(out.recon_a + out.recon_x) + out.kl_a + out.kl_x + out.tcr + out.opr;
    return out;
}

LossBreakdown CfvaeModel::loss_and_grad(const Matrix &a, const Matrix &x, const Matrix *eps_a,
                                        const Matrix *eps_x, double dataset_size,
                                        const TermWeights &weights) {
    if (a.rows() != x.rows())
        throw NumericError("loss: sensitive and covariate batches disagree on rows");
    const Index b = a.rows();
    const Index dza = config_.d_za;
    const Index dzx = config_.d_zx;

    std::vector<Matrix> cache_ea, cache_ex, cache_da, cache_dx;
    const Matrix ea = encoder_a.forward(a, &cache_ea);
    const Matrix ex = encoder_x.forward(x, &cache_ex);
    check_finite_rows(ea, "encode (sensitive)");
    check_finite_rows(ex, "encode (covariate)");

    const Matrix mu_a = ea.leftCols(dza), logvar_a = ea.rightCols(dza);
    const Matrix mu_x = ex.leftCols(dzx), logvar_x = ex.rightCols(dzx);
    const Matrix sd_a = (0.5 * logvar_a.array()).exp();
    const Matrix sd_x = (0.5 * logvar_x.array()).exp();
    const Matrix z_a = eps_a ? Matrix(mu_a.array() + sd_a.array() * eps_a->array()) : mu_a;
    const Matrix z_x = eps_x ? Matrix(mu_x.array() + sd_x.array() * eps_x->array()) : mu_x;
    const Matrix z_xp = config_.use_causal_constraints
                            ? structure_transform(z_x, config_.C, config_.transform_mode)
                            : z_x;

    const Matrix ra = decoder_a.forward(z_a, &cache_da);
    const Matrix rx = decoder_x.forward(z_xp, &cache_dx);

    LossBreakdown out;
    Matrix g_ra = Matrix::Zero(b, a_layout_.width);
    Matrix g_rx = Matrix::Zero(b, x_layout_.width);
    out.recon_a = heads_loglik(a_layout_.heads, a, ra, weights.recon_a, &g_ra);
    out.recon_x = heads_loglik(x_layout_.heads, x, rx, weights.recon_x, &g_rx);

    out.kl_a = kl_standard_normal(mu_a, logvar_a);
    out.kl_x = kl_standard_normal(mu_x, logvar_x);
    Matrix g_mu_a = Matrix::Zero(b, dza), g_logvar_a = Matrix::Zero(b, dza);
    Matrix g_mu_x = Matrix::Zero(b, dzx), g_logvar_x = Matrix::Zero(b, dzx);
    kl_standard_normal_backward(mu_a, logvar_a, weights.kl_a, g_mu_a, g_logvar_a);
    kl_standard_normal_backward(mu_x, logvar_x, weights.kl_x, g_mu_x, g_logvar_x);

    TcGrads tc_grads;
    out.tcr = tcr_loss(z_x, mu_x, logvar_x, config_.gamma, dataset_size,
                       config_.gamma == 0.0 ? nullptr : &tc_grads);

    Matrix g_opr_za, g_opr_zxp;
    if (config_.opr_weight != 0.0) {
        g_opr_za = Matrix::Zero(b, dza);
        g_opr_zxp = Matrix::Zero(b, dzx);
        out.opr = config_.opr_weight *
                  opr_loss(z_a, z_xp, &g_opr_za, &g_opr_zxp, weights.opr * config_.opr_weight);
    }
    out.total = -(out.recon_a + out.recon_x) + out.kl_a + out.kl_x + out.tcr + out.opr;

    Matrix g_za = decoder_a.backward(cache_da, g_ra);
    Matrix g_zxp = decoder_x.backward(cache_dx, g_rx);
    if (config_.opr_weight != 0.0) {
        g_za += g_opr_za;
        g_zxp += g_opr_zxp;
    }
    Matrix g_zx = config_.use_causal_constraints
                      ? structure_transform_backward(g_zxp, config_.C, config_.transform_mode)
                      : std::move(g_zxp);
    if (config_.gamma != 0.0) {
        g_zx += weights.tcr * tc_grads.z;
        g_mu_x += weights.tcr * tc_grads.mu;
        g_logvar_x += weights.tcr * tc_grads.logvar;
    }

    g_mu_a += g_za;
    if (eps_a) g_logvar_a.array() += 0.5 * g_za.array() * sd_a.array() * eps_a->array();
    g_mu_x += g_zx;
    if (eps_x) g_logvar_x.array() += 0.5 * g_zx.array() * sd_x.array() * eps_x->array();

    Matrix g_ea(b, 2 * dza), g_ex(b, 2 * dzx);
    g_ea << g_mu_a, g_logvar_a;
    g_ex << g_mu_x, g_logvar_x;
    encoder_a.backward(cache_ea, g_ea);
    encoder_x.backward(cache_ex, g_ex);
    return out;
}

Matrix CfvaeModel::structured_means(const Matrix &x) const {
    const Matrix ex = encoder_x.forward(x);
    check_finite_rows(ex, "transform (covariate)");
    const Matrix mu_x = ex.leftCols(config_.d_zx);
    return config_.use_causal_constraints
               ? structure_transform(mu_x, config_.C, config_.transform_mode)
               : mu_x;
}

void CfvaeModel::zero_grad() {
    encoder_a.zero_grad();
    encoder_x.zero_grad();
    decoder_a.zero_grad();
    decoder_x.zero_grad();
}

std::vector<ParamRef> CfvaeModel::params() {
    std::vector<ParamRef> out;
    for (Mlp *net : {&encoder_a, &encoder_x, &decoder_a, &decoder_x})
        net->visit_params([&out](Matrix &p, Matrix &g) { out.push_back({&p, &g}); });
    return out;
}

namespace {

void write_matrix(std::ofstream &f, const Matrix &m) {
    f << m.rows() << " " << m.cols() << "\n";
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) f << (c ? " " : "") << hexa(m(r, c));
        f << "\n";
    }
}

Matrix read_matrix(std::ifstream &f, const std::string &where) {
    Index rows = 0, cols = 0;
    if (!(f >> rows >> cols)) throw IoError("checkpoint: missing shape in " + where);
    Matrix m(rows, cols);
    std::string tok;
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
            if (!(f >> tok)) throw IoError("checkpoint: truncated matrix in " + where);
            m(r, c) = parse_hexa(tok, where);
        }
    return m;
}

void write_layout(std::ofstream &f, const char *name, const BlockLayout &layout) {
    f << name << " " << layout.width << " " << layout.heads.size() << "\n";
    for (const auto &h : layout.heads)
        f << "head " << head_kind_name(h.kind) << " " << h.offset << " " << h.width << "\n";
}

BlockLayout read_layout(std::ifstream &f, const char *name) {
    std::string tag;
    std::size_t n_heads = 0;
    BlockLayout layout;
    if (!(f >> tag >> layout.width >> n_heads) || tag != name)
        throw IoError(std::string("checkpoint: expected block ") + name);
    for (std::size_t i = 0; i < n_heads; ++i) {
        std::string kind;
        DecoderHead h;
        if (!(f >> tag >> kind >> h.offset >> h.width) || tag != "head")
            throw IoError("checkpoint: bad head line");
        h.kind = head_kind_from(kind);
        layout.heads.push_back(h);
    }
    return layout;
}

void write_net(std::ofstream &f, const char *name, const Mlp &net) {
    f << "net " << name << " " << net.layers() << "\n";
    for (std::size_t l = 0; l < net.layers(); ++l) {
        write_matrix(f, net.W[l]);
        write_matrix(f, net.b[l]);
    }
}

void read_net(std::ifstream &f, const char *name, Mlp &net) {
    std::string tag, got;
    std::size_t layers = 0;
    if (!(f >> tag >> got >> layers) || tag != "net" || got != name)
        throw IoError(std::string("checkpoint: expected net ") + name);
    if (layers != net.layers())
        throw IoError(std::string("checkpoint: layer count mismatch for ") + name);
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix w = read_matrix(f, name);
        Matrix bias = read_matrix(f, name);
        if (w.rows() != net.W[l].rows() || w.cols() != net.W[l].cols())
            throw IoError(std::string("checkpoint: weight shape mismatch for ") + name);
        net.W[l] = std::move(w);
        net.b[l] = std::move(bias);
    }
}

} // namespace

void CfvaeModel::save_checkpoint(const std::string &path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "cfvae-checkpoint 1\n";
    f << "d_za " << config_.d_za << "\n";
    f << "d_zx " << config_.d_zx << "\n";
    f << "gamma " << hexa(config_.gamma) << "\n";
    f << "opr_weight " << hexa(config_.opr_weight) << "\n";
    f << "use_causal_constraints " << (config_.use_causal_constraints ? 1 : 0) << "\n";
    f << "transform_mode "
      << (config_.transform_mode == TransformMode::Exact ? "exact" : "one-step") << "\n";
    f << "encoder_hidden " << config_.encoder_hidden.size();
    for (int w : config_.encoder_hidden) f << " " << w;
    f << "\n";
    f << "decoder_hidden " << config_.decoder_hidden.size();
    for (int w : config_.decoder_hidden) f << " " << w;
    f << "\n";
    f << "seed " << config_.seed << "\n";
    write_matrix(f, config_.use_causal_constraints ? config_.C : Matrix::Zero(0, 0));
    write_layout(f, "block_a", a_layout_);
    write_layout(f, "block_x", x_layout_);
    write_net(f, "encoder_a", encoder_a);
    write_net(f, "encoder_x", encoder_x);
    write_net(f, "decoder_a", decoder_a);
    write_net(f, "decoder_x", decoder_x);
    f << "end\n";
    if (!f.good()) throw IoError("failed writing " + path);
}

CfvaeModel CfvaeModel::load_checkpoint(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::string tag;
    int version = 0;
    if (!(f >> tag >> version) || tag != "cfvae-checkpoint" || version != 1)
        throw IoError(path + ": not a checkpoint file");

    CfvaeConfig cfg;
    auto expect = [&](const char *want) {
        if (!(f >> tag) || tag != want)
            throw IoError(path + ": expected '" + want + "', got '" + tag + "'");
    };
    expect("d_za");
    f >> cfg.d_za;
    expect("d_zx");
    f >> cfg.d_zx;
    expect("gamma");
    f >> tag;
    cfg.gamma = parse_hexa(tag, "gamma");
    expect("opr_weight");
    f >> tag;
    cfg.opr_weight = parse_hexa(tag, "opr_weight");
    expect("use_causal_constraints");
    int flag = 0;
    f >> flag;
    cfg.use_causal_constraints = flag != 0;
    expect("transform_mode");
    f >> tag;
    cfg.transform_mode = tag == "one-step" ? TransformMode::OneStep : TransformMode::Exact;
    auto read_widths = [&](const char *want, std::vector<int> &out) {
        expect(want);
        std::size_t n = 0;
        f >> n;
        out.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) f >> out[i];
    };
    read_widths("encoder_hidden", cfg.encoder_hidden);
    read_widths("decoder_hidden", cfg.decoder_hidden);
    expect("seed");
    f >> cfg.seed;
    cfg.C = read_matrix(f, "C");
    if (!cfg.use_causal_constraints) cfg.C = Matrix();

    BlockLayout a_layout = read_layout(f, "block_a");
    BlockLayout x_layout = read_layout(f, "block_x");
    CfvaeModel model(cfg, std::move(a_layout), std::move(x_layout));
    read_net(f, "encoder_a", model.encoder_a);
    read_net(f, "encoder_x", model.encoder_x);
    read_net(f, "decoder_a", model.decoder_a);
    read_net(f, "decoder_x", model.decoder_x);
    expect("end");
    return model;
}

} // namespace cfvae
