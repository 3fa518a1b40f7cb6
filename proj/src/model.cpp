#include "swapgt/model.hpp"

#include <cmath>
#include <stdexcept>

namespace swapgt {

namespace {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor w = Tensor::matrix(fan_in, fan_out);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = uniform_range(rng, -bound, bound);
    return w;
}

std::vector<std::int64_t> flat_ids(const SequenceBatch& batch) {
    std::vector<std::int64_t> ids(batch.ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = batch.ids[i];
    return ids;
}

std::vector<std::int64_t> stride_ids(std::size_t count, std::size_t stride) {
    std::vector<std::int64_t> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = static_cast<std::int64_t>(i * stride);
    return ids;
}

} // namespace

void ModelConfig::validate() const {
    if (input_dim == 0 || hidden_dim == 0 || ffn_dim == 0 || classes == 0)
        throw std::invalid_argument("ModelConfig: zero dimension");
    if (heads == 0 || hidden_dim % heads != 0)
        throw std::invalid_argument("ModelConfig: hidden_dim must be divisible by heads");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
}

Var readout(const Var& view_reps, std::size_t s) {
    if (s == 0) throw std::invalid_argument("readout: s must be >= 1");
    const std::size_t block = 1 + s;
    const std::size_t rows = view_reps->value.rows();
    if (rows % block != 0) throw std::invalid_argument("readout: row count not divisible by 1+s");
    Var first = gather_rows(view_reps, stride_ids(rows / block, block));
    Var tail_mean = block_mean(view_reps, block, 1);
    return concat_cols({first, tail_mean});
}

Var readout_single(const Var& view_reps) {
    return concat_cols({view_reps, view_reps});
}

Var fuse(const Var& za, const Var& zt, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("fuse: alpha must be in [0,1]");
    if (!za->value.same_shape(zt->value))
        throw std::invalid_argument("fuse: view representation widths differ");
    return add(scale(za, alpha), scale(zt, 1.0 - alpha));
}

Var center_alignment(const Var& view_reps, std::size_t s) {
    const std::size_t block = 1 + s;
    const std::size_t rows = view_reps->value.rows();
    if (rows == 0 || rows % block != 0)
        throw std::invalid_argument("center_alignment: row count not divisible by 1+s");
    Var center = block_mean(view_reps, block, 0);
    Var cosines = rowwise_cosine(view_reps, block_repeat(center, block));
    return affine(mean_all(cosines), -1.0, 1.0); // 1 - mean cos
}

Var cross_entropy(const Var& logits, const std::vector<std::int32_t>& labels,
                  const std::vector<std::uint8_t>& mask) {
    return softmax_cross_entropy(logits, labels, mask);
}

TotalLoss total_loss(const Var& ce, const ViewRepresentations& attr,
                     const ViewRepresentations& topo, double lambda) {
    TotalLoss out;
    out.breakdown.ce = ce->value[0];
    out.breakdown.lambda = lambda;
    if (lambda == 0.0) {
        // the alignment term is entirely disabled; do not even compute it
        out.loss = ce;
        out.breakdown.ca = 0.0;
        out.breakdown.total = ce->value[0];
        return out;
    }
    Var ca = add(center_alignment(attr.reps, attr.s), center_alignment(topo.reps, topo.s));
    out.loss = add(ce, scale(ca, lambda));
    out.breakdown.ca = ca->value[0];
    out.breakdown.total = out.loss->value[0];
    return out;
}

Model::Model(ModelConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::string Model::view_prefix(ViewTag view) const {
    if (cfg_.share_encoder) return "enc.";
    return view == ViewTag::attribute ? "encA." : "encT.";
}

void Model::init_encoder_params(const std::string& pfx, Rng& rng) {
    const std::size_t d0 = cfg_.hidden_dim;
    params_.create(pfx + "proj.W", xavier_uniform(cfg_.input_dim, d0, rng));
    params_.create(pfx + "proj.b", Tensor::vec(d0));
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::string lp = pfx + "l" + std::to_string(l) + ".";
        params_.create(lp + "ln1.g", Tensor::vec(d0, 1.0));
        params_.create(lp + "ln1.b", Tensor::vec(d0));
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            const std::string hp = lp + "h" + std::to_string(h) + ".";
            params_.create(hp + "wq", xavier_uniform(d0, cfg_.head_dim(), rng));
            params_.create(hp + "wk", xavier_uniform(d0, cfg_.head_dim(), rng));
            params_.create(hp + "wv", xavier_uniform(d0, cfg_.head_dim(), rng));
        }
        params_.create(lp + "wo", xavier_uniform(d0, d0, rng));
        params_.create(lp + "ln2.g", Tensor::vec(d0, 1.0));
        params_.create(lp + "ln2.b", Tensor::vec(d0));
        params_.create(lp + "ffn.w1", xavier_uniform(d0, cfg_.ffn_dim, rng));
        params_.create(lp + "ffn.w2", xavier_uniform(cfg_.ffn_dim, d0, rng));
    }
}

void Model::init_params(std::uint64_t seed) {
    if (!params_.names().empty())
        throw std::logic_error("Model::init_params: already initialized");
    Rng rng(seed_stream(seed, 0x90de1));
    if (cfg_.share_encoder) {
        init_encoder_params("enc.", rng);
    } else {
        init_encoder_params("encA.", rng);
        init_encoder_params("encT.", rng);
    }
    const std::size_t d0 = cfg_.hidden_dim;
    params_.create("pred.w1", xavier_uniform(2 * d0, d0, rng));
    params_.create("pred.b1", Tensor::vec(d0));
    params_.create("pred.w2", xavier_uniform(d0, cfg_.classes, rng));
    params_.create("pred.b2", Tensor::vec(cfg_.classes));
}

Var Model::features_leaf(const Graph& g) {
    Tensor x = Tensor::matrix(g.n, g.d);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = g.features[i];
    return constant(std::move(x));
}

Var Model::encode_with_prefix(const std::string& pfx, const SequenceBatch& batch,
                              const Var& node_features, Mode mode, Rng& dropout_rng) const {
    if (node_features->value.cols() != cfg_.input_dim)
        throw std::invalid_argument("encode_view: feature width does not match projection input");
    const std::size_t seqlen = batch.seq_len();
    const bool training = mode == Mode::train;

    // Projection of each distinct node once, then a differentiable gather per
    // token position. Linear in ids, so identical to projecting every token.
    Var projected = add_rowvec(matmul(node_features, params_.at(pfx + "proj.W")),
                               params_.at(pfx + "proj.b"));
    Var h = gather_rows(projected, flat_ids(batch));
    h = dropout(h, cfg_.dropout, dropout_rng, training);

    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::string lp = pfx + "l" + std::to_string(l) + ".";
        Var normed = layer_norm(h, params_.at(lp + "ln1.g"), params_.at(lp + "ln1.b"));
        std::vector<Var> heads;
        heads.reserve(cfg_.heads);
        for (std::size_t hd = 0; hd < cfg_.heads; ++hd) {
            const std::string hp = lp + "h" + std::to_string(hd) + ".";
            Var q = matmul(normed, params_.at(hp + "wq"));
            Var k = matmul(normed, params_.at(hp + "wk"));
            Var v = matmul(normed, params_.at(hp + "wv"));
            Var attn = row_softmax(seq_scores(q, k, seqlen));
            heads.push_back(seq_mix(attn, v, seqlen));
        }
        Var msa = matmul(concat_cols(heads), params_.at(lp + "wo"));
        h = add(h, msa);

        Var normed2 = layer_norm(h, params_.at(lp + "ln2.g"), params_.at(lp + "ln2.b"));
        Var f = gelu(matmul(normed2, params_.at(lp + "ffn.w1")));
        f = dropout(f, cfg_.dropout, dropout_rng, training);
        f = matmul(f, params_.at(lp + "ffn.w2"));
        h = add(h, f);
    }

    // position 0 of every sequence
    const std::size_t n_seqs = batch.n * batch.rows_per_node();
    return gather_rows(h, stride_ids(n_seqs, seqlen));
}

ViewRepresentations Model::encode_view(const SequenceBatch& batch, const Var& node_features,
                                       Mode mode, Rng& dropout_rng) const {
    ViewRepresentations out;
    out.reps = encode_with_prefix(view_prefix(batch.view), batch, node_features, mode, dropout_rng);
    out.n = batch.n;
    out.s = batch.s;
    out.view = batch.view;
    return out;
}

Var Model::predict(const Var& fused) const {
    if (fused->value.cols() != 2 * cfg_.hidden_dim)
        throw std::invalid_argument("predict: expected width 2*hidden_dim");
    Var hidden = gelu(add_rowvec(matmul(fused, params_.at("pred.w1")), params_.at("pred.b1")));
    return add_rowvec(matmul(hidden, params_.at("pred.w2")), params_.at("pred.b2"));
}

Model::Forward Model::forward_full(const Var& node_features, const SequenceBatch& attr,
                                   const SequenceBatch& topo, double alpha, double lambda,
                                   const std::vector<std::int32_t>& labels,
                                   const std::vector<std::uint8_t>& mask, Mode mode,
                                   std::uint64_t dropout_seed) const {
    if (attr.n != topo.n || attr.s != topo.s)
        throw std::invalid_argument("forward_full: view batches disagree");
    Rng dropout_rng(seed_stream(dropout_seed, 0xd809));

    ViewRepresentations ra = encode_view(attr, node_features, mode, dropout_rng);
    ViewRepresentations rt = encode_view(topo, node_features, mode, dropout_rng);

    Var za = attr.s >= 1 ? readout(ra.reps, attr.s) : readout_single(ra.reps);
    Var zt = topo.s >= 1 ? readout(rt.reps, topo.s) : readout_single(rt.reps);
    Var fused = fuse(za, zt, alpha);
    Var logits = predict(fused);

    Var ce = cross_entropy(logits, labels, mask);
    TotalLoss combined = total_loss(ce, ra, rt, lambda);

    Forward out;
    out.logits = logits;
    out.loss = combined.loss;
    out.breakdown = combined.breakdown;
    return out;
}

Tensor Model::infer_logits(const Var& node_features, const SequenceBatch& attr,
                           const SequenceBatch& topo, double alpha) const {
    Rng unused_rng(0);
    ViewRepresentations ra = encode_view(attr, node_features, Mode::eval, unused_rng);
    ViewRepresentations rt = encode_view(topo, node_features, Mode::eval, unused_rng);
    Var za = attr.s >= 1 ? readout(ra.reps, attr.s) : readout_single(ra.reps);
    Var zt = topo.s >= 1 ? readout(rt.reps, topo.s) : readout_single(rt.reps);
    Var logits = predict(fuse(za, zt, alpha));
    return logits->value;
}

} // namespace swapgt
