#ifndef CFVAE_MODEL_HPP_
#define CFVAE_MODEL_HPP_

#include "cfvae/dataset.hpp"
#include "cfvae/graph.hpp"
#include "cfvae/losses.hpp"
#include "cfvae/mlp.hpp"
#include "cfvae/optimizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfvae {

enum class HeadKind { Gaussian, Bernoulli, Categorical };

struct DecoderHead {
    HeadKind kind;
    Index offset; // into the encoded block
    Index width;  // 1, or category count
};

// Encoded layout of one input block (the sensitive block or the covariate
// block) together with its reconstruction heads.
struct BlockLayout {
    Index width = 0;
    std::vector<DecoderHead> heads;

    static BlockLayout from_schema(const Schema &schema, ColumnRole role);
};

struct CfvaeConfig {
    Index d_za = 2;
    Index d_zx = 2;
    double gamma = 0.0;
    double opr_weight = 0.0;
    bool use_causal_constraints = true;
    TransformMode transform_mode = TransformMode::Exact;
    Matrix C; // d_zx x d_zx when constraints are on
    std::vector<int> encoder_hidden{32, 32};
    std::vector<int> decoder_hidden{32, 32};
    std::uint64_t seed = 0;

    void validate() const;
};

struct LatentBatch {
    Matrix mu_a, logvar_a; // B x d_za
    Matrix mu_x, logvar_x; // B x d_zx
    Matrix z_a, z_x;
    Matrix z_x_structured;
};

// Per-batch objective values. Reconstruction terms are log-likelihoods;
// tcr and opr carry their weights (gamma, opr_weight) already applied, so
// total = -(recon_a + recon_x) + kl_a + kl_x + tcr + opr.
struct LossBreakdown {
    double recon_a = 0.0, recon_x = 0.0;
    double kl_a = 0.0, kl_x = 0.0;
    double tcr = 0.0, opr = 0.0;
    double total = 0.0;
};

// Multipliers on each breakdown term for the differentiated objective;
// the default is d(total). Gradient checks isolate terms by zeroing others.
struct TermWeights {
    double recon_a = -1.0, recon_x = -1.0;
    double kl_a = 1.0, kl_x = 1.0;
    double tcr = 1.0, opr = 1.0;

    static TermWeights total() { return {}; }
    static TermWeights none() { return {0, 0, 0, 0, 0, 0}; }
};

class CfvaeModel {
  public:
    CfvaeModel(const CfvaeConfig &config, BlockLayout a_layout, BlockLayout x_layout);

    // Reparameterized posterior sample: z = mu + exp(logvar/2) * eps.
    // Null eps pins z to the posterior mean. The structured latent applies
    // the causal transform, or copies z_x when constraints are off.
    LatentBatch encode(const Matrix &a, const Matrix &x, const Matrix *eps_a = nullptr,
                       const Matrix *eps_x = nullptr) const;

    // Batch-mean reconstruction log-likelihoods; the covariate decoder reads
    // the structured latent, the sensitive decoder reads z_a.
    std::pair<double, double> decode(const LatentBatch &latent, const Matrix &a,
                                     const Matrix &x) const;

    LossBreakdown loss(const Matrix &a, const Matrix &x, const LatentBatch &latent,
                       double dataset_size) const;

    // Forward + analytic backward in one pass. Gradients of
    // sum_i weights_i * term_i accumulate into the networks' buffers;
    // call zero_grad first. The returned breakdown is always the canonical
    // objective, independent of the weights.
    LossBreakdown loss_and_grad(const Matrix &a, const Matrix &x, const Matrix *eps_a,
                                const Matrix *eps_x, double dataset_size,
                                const TermWeights &weights = TermWeights::total());

    // Deterministic downstream features: posterior means of the covariate
    // encoder pushed through the structured transform. Never reads a.
    Matrix structured_means(const Matrix &x) const;

    void zero_grad();
    std::vector<ParamRef> params();

    void save_checkpoint(const std::string &path) const;
    static CfvaeModel load_checkpoint(const std::string &path);

    const CfvaeConfig &config() const { return config_; }
    const BlockLayout &a_layout() const { return a_layout_; }
    const BlockLayout &x_layout() const { return x_layout_; }

    Mlp encoder_a, encoder_x, decoder_a, decoder_x;

  private:
    CfvaeConfig config_;
    BlockLayout a_layout_, x_layout_;
};

} // namespace cfvae

#endif
