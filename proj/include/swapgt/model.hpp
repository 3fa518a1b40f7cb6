#pragma once

#include "swapgt/autodiff.hpp"
#include "swapgt/tokenizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace swapgt {

enum class Mode { train, eval };

struct ModelConfig {
    std::size_t input_dim = 0;  // d
    std::size_t hidden_dim = 64;
    std::size_t ffn_dim = 128;
    std::size_t layers = 1;
    std::size_t heads = 2;
    std::size_t classes = 2;
    double dropout = 0.0;
    bool share_encoder = true;

    std::size_t head_dim() const { return hidden_dim / heads; }
    void validate() const;
};

struct LossBreakdown {
    double ce = 0.0;
    double ca = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

/// First-token encoder outputs for one view: node i's 1+s sequence
/// representations live in rows [i*(1+s), (i+1)*(1+s)) of `reps`.
struct ViewRepresentations {
    Var reps;
    std::size_t n = 0;
    std::size_t s = 0;
    ViewTag view = ViewTag::attribute;
};

// ---- standalone graph-building ops ----------------------------------------

/// Eq-style readout per block of 1+s rows: first row concatenated with the
/// mean of the remaining s rows. Requires s >= 1.
Var readout(const Var& view_reps, std::size_t s);
/// Single-sequence fallback (s = 0): the lone row duplicated into both halves
/// so the predictor width stays 2*d0.
Var readout_single(const Var& view_reps);
/// alpha * za + (1-alpha) * zt.
Var fuse(const Var& za, const Var& zt, double alpha);
/// Mean over blocks of 1+s rows of (1 - mean cosine to the block centroid).
/// Zero-norm rows or centroids contribute cosine 0.
Var center_alignment(const Var& view_reps, std::size_t s);
/// Mean over masked rows of -log softmax(logits)[label].
Var cross_entropy(const Var& logits, const std::vector<std::int32_t>& labels,
                  const std::vector<std::uint8_t>& mask);

struct TotalLoss {
    Var loss; // scalar tape node
    LossBreakdown breakdown;
};

/// ce + lambda * (CAL(attribute reps) + CAL(topology reps)). When lambda is
/// zero the alignment subgraph is not built and the breakdown reports ca=0.
TotalLoss total_loss(const Var& ce, const ViewRepresentations& attr,
                     const ViewRepresentations& topo, double lambda);

/// Projection, L pre-LN transformer layers, concat-mean readout, view fusion,
/// MLP predictor, and the combined training loss.
class Model {
public:
    explicit Model(ModelConfig cfg);

    void init_params(std::uint64_t seed);
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

    /// Widened float32 features as a non-differentiable leaf.
    static Var features_leaf(const Graph& g);

    ViewRepresentations encode_view(const SequenceBatch& batch, const Var& node_features,
                                    Mode mode, Rng& dropout_rng) const;

    Var predict(const Var& fused) const;

    struct Forward {
        Var logits; // n x classes
        Var loss;   // scalar tape node
        LossBreakdown breakdown;
    };

    Forward forward_full(const Var& node_features, const SequenceBatch& attr,
                         const SequenceBatch& topo, double alpha, double lambda,
                         const std::vector<std::int32_t>& labels,
                         const std::vector<std::uint8_t>& mask, Mode mode,
                         std::uint64_t dropout_seed) const;

    /// Eval-mode logits only (no loss, no labels needed). Rows follow node id
    /// order of the batches.
    Tensor infer_logits(const Var& node_features, const SequenceBatch& attr,
                        const SequenceBatch& topo, double alpha) const;

private:
    std::string view_prefix(ViewTag view) const;
    Var encode_with_prefix(const std::string& pfx, const SequenceBatch& batch,
                           const Var& node_features, Mode mode, Rng& dropout_rng) const;
    void init_encoder_params(const std::string& pfx, Rng& rng);

    ModelConfig cfg_;
    ParamStore params_;
};

} // namespace swapgt
