#include "swapgt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace swapgt {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

constexpr std::uint64_t kSeqTag = 0x5e90;  // sequence generation stream
constexpr std::uint64_t kDropTag = 0xd401; // dropout stream
constexpr std::uint64_t kShufTag = 0x54f1; // minibatch shuffle stream

ModelConfig model_config_for(const TrainConfig& cfg, const Graph& g) {
    ModelConfig mc;
    mc.input_dim = g.d;
    mc.hidden_dim = cfg.hidden_dim;
    mc.ffn_dim = cfg.ffn_dim;
    mc.layers = cfg.layers;
    mc.heads = cfg.heads;
    mc.classes = g.c;
    mc.dropout = cfg.dropout;
    mc.share_encoder = cfg.share_encoder;
    return mc;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t c = logits.cols();
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
        if (logits.at(row, j) > logits.at(row, best)) best = j;
    return best;
}

double accuracy_on(const Tensor& logits, const std::vector<std::int32_t>& labels,
                   const std::vector<std::uint8_t>& mask) {
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!mask[i]) continue;
        ++total;
        if (argmax_row(logits, i) == static_cast<std::size_t>(labels[i])) ++hit;
    }
    if (total == 0) throw std::invalid_argument("accuracy: empty role set");
    return static_cast<double>(hit) / static_cast<double>(total);
}

} // namespace

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_cal: return "no-cal";
        case Variant::large_k: return "large-k";
        case Variant::random_subsample: return "random-subsample";
    }
    return "?";
}

Variant parse_variant(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "no-cal") return Variant::no_cal;
    if (s == "large-k") return Variant::large_k;
    if (s == "random-subsample") return Variant::random_subsample;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

const char* split_name(SplitKind k) { return k == SplitKind::dense ? "dense" : "sparse"; }

SplitKind parse_split(const std::string& s) {
    if (s == "dense") return SplitKind::dense;
    if (s == "sparse") return SplitKind::sparse;
    throw std::invalid_argument("unknown split '" + s + "'");
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (patience > max_epochs) throw std::invalid_argument("TrainConfig: patience > max_epochs");
    if (runs < 1) throw std::invalid_argument("TrainConfig: runs must be >= 1");
    if (k == 0) throw std::invalid_argument("TrainConfig: k must be >= 1");
    if (!uses_files()) sbm.validate();
}

EffectiveConfig apply_variant(const TrainConfig& cfg) {
    EffectiveConfig eff;
    switch (cfg.variant) {
        case Variant::full:
            eff = {cfg.k, EffectiveConfig::SeqMode::swap, cfg.aug_s, cfg.lambda};
            break;
        case Variant::no_cal:
            eff = {cfg.k, EffectiveConfig::SeqMode::swap, cfg.aug_s, 0.0};
            break;
        case Variant::large_k:
            eff = {2 * cfg.k, EffectiveConfig::SeqMode::single_long, 0, cfg.lambda};
            break;
        case Variant::random_subsample:
            eff = {2 * cfg.k, EffectiveConfig::SeqMode::subsample, cfg.aug_s, cfg.lambda};
            break;
    }
    return eff;
}

std::pair<TokenTable, TokenTable> build_tables(const Graph& g, const NormalizedAdjacency& adj,
                                               const TrainConfig& cfg) {
    const EffectiveConfig eff = apply_variant(cfg);
    return build_token_tables(g, adj, {cfg.ppr_steps, cfg.ppr_beta}, eff.table_k);
}

PreparedData prepare_data(const Graph& g, const NormalizedAdjacency& adj,
                          const TrainConfig& cfg, std::uint64_t seq_seed) {
    auto tables = build_tables(g, adj, cfg);
    return prepare_data_with_tables(std::move(tables.first), std::move(tables.second), g, cfg,
                                    seq_seed);
}

PreparedData prepare_data_with_tables(TokenTable attr_table, TokenTable topo_table,
                                      const Graph& g, const TrainConfig& cfg,
                                      std::uint64_t seq_seed) {
    PreparedData data;
    data.attr_table = std::move(attr_table);
    data.topo_table = std::move(topo_table);
    resample_sequences(data, g, cfg, seq_seed, 0);
    return data;
}

void resample_sequences(PreparedData& data, const Graph& g, const TrainConfig& cfg,
                        std::uint64_t seq_seed, std::size_t epoch_tag) {
    const EffectiveConfig eff = apply_variant(cfg);
    const std::uint64_t seed = seed_stream(seq_seed, kSeqTag, epoch_tag);
    switch (eff.mode) {
        case EffectiveConfig::SeqMode::swap: {
            SwapConfig sc{cfg.swap_p, cfg.swap_t, eff.s};
            data.attr_seq = build_sequences(g, data.attr_table, sc, seed);
            data.topo_seq = build_sequences(g, data.topo_table, sc, seed);
            break;
        }
        case EffectiveConfig::SeqMode::single_long:
            data.attr_seq = build_single_sequence(g, data.attr_table, seed);
            data.topo_seq = build_single_sequence(g, data.topo_table, seed);
            break;
        case EffectiveConfig::SeqMode::subsample:
            data.attr_seq = build_sequences_subsample(g, data.attr_table, cfg.k, eff.s, seed);
            data.topo_seq = build_sequences_subsample(g, data.topo_table, cfg.k, eff.s, seed);
            break;
    }
}

Adam::Adam(ParamStore& params, double lr, double weight_decay)
    : params_(params), lr_(lr), weight_decay_(weight_decay) {
    for (const auto& name : params_.names()) {
        m_.emplace_back(params_.at(name)->value.shape());
        v_.emplace_back(params_.at(name)->value.shape());
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
    std::size_t pi = 0;
    for (const auto& name : params_.names()) {
        const Var& p = params_.at(name);
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        ++pi;
        const bool has_grad = !p->grad.empty();
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            double g = has_grad ? p->grad[i] : 0.0;
            if (weight_decay_ != 0.0) g += weight_decay_ * p->value[i];
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g;
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p->value[i] -= lr_ * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
}

namespace {

SequenceBatch slice_batch(const SequenceBatch& batch, std::size_t lo, std::size_t hi) {
    SequenceBatch out = batch;
    const std::size_t per_node = batch.rows_per_node() * batch.seq_len();
    out.n = hi - lo;
    out.ids.assign(batch.ids.begin() + static_cast<std::ptrdiff_t>(lo * per_node),
                   batch.ids.begin() + static_cast<std::ptrdiff_t>(hi * per_node));
    return out;
}

} // namespace

double evaluate(const Model& model, const Var& node_features, const PreparedData& data,
                double alpha, const Graph& g, const SplitAssignment& split, Role role) {
    // node outputs are independent, so chunking bounds peak tape memory
    // without changing a single bit of the result
    constexpr std::size_t kChunk = 1024;
    Tensor logits = Tensor::matrix(g.n, model.config().classes);
    for (std::size_t lo = 0; lo < g.n; lo += kChunk) {
        const std::size_t hi = std::min(g.n, lo + kChunk);
        Tensor part = model.infer_logits(node_features, slice_batch(data.attr_seq, lo, hi),
                                         slice_batch(data.topo_seq, lo, hi), alpha);
        std::copy_n(part.data(), part.size(), logits.data() + lo * model.config().classes);
    }
    return accuracy_on(logits, g.labels, split.mask(role));
}

TrainOutcome train_one(const TrainConfig& cfg, const Graph& g, const SplitAssignment& split,
                       std::uint64_t seed) {
    const NormalizedAdjacency adj = normalized_adjacency(g);
    auto tables = build_tables(g, adj, cfg);
    return train_one_with_tables(cfg, g, split, seed, tables.first, tables.second);
}

TrainOutcome train_one_with_tables(const TrainConfig& cfg, const Graph& g,
                                   const SplitAssignment& split, std::uint64_t seed,
                                   const TokenTable& attr_table, const TokenTable& topo_table) {
    cfg.validate();
    const EffectiveConfig eff = apply_variant(cfg);
    PreparedData data = prepare_data_with_tables(attr_table, topo_table, g, cfg, seed);
    PreparedData eval_data = data; // eval always uses the base sequences

    Model model(model_config_for(cfg, g));
    model.init_params(seed);
    Adam opt(model.params(), cfg.learning_rate, cfg.weight_decay);
    const Var features = Model::features_leaf(g);

    const std::vector<std::uint8_t> train_mask = split.mask(Role::train);
    if (split.count(Role::train) == 0 || split.count(Role::validation) == 0)
        throw std::invalid_argument("train_one: split has an empty train or validation set");

    std::vector<std::size_t> batch_nodes(g.n);
    std::iota(batch_nodes.begin(), batch_nodes.end(), 0);

    TrainOutcome out;
    out.best_val_acc = -1.0;
    std::size_t streak = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (cfg.resample_each_epoch && epoch > 0)
            resample_sequences(data, g, cfg, seed, epoch);

        double ep_ce = 0.0, ep_ca = 0.0, ep_total = 0.0;
        std::size_t n_batches = 0;

        auto run_batch = [&](const std::vector<std::size_t>& nodes, std::size_t batch_index) {
            // restrict sequences, labels and mask to the batch nodes
            SequenceBatch attr_b = data.attr_seq, topo_b = data.topo_seq;
            std::vector<std::int32_t> labels;
            std::vector<std::uint8_t> mask;
            const bool full = nodes.size() == g.n;
            if (!full) {
                const std::size_t rp = data.attr_seq.rows_per_node() * data.attr_seq.seq_len();
                attr_b.n = topo_b.n = nodes.size();
                attr_b.ids.clear();
                topo_b.ids.clear();
                for (std::size_t node : nodes) {
                    attr_b.ids.insert(attr_b.ids.end(), data.attr_seq.ids.begin() + node * rp,
                                      data.attr_seq.ids.begin() + (node + 1) * rp);
                    topo_b.ids.insert(topo_b.ids.end(), data.topo_seq.ids.begin() + node * rp,
                                      data.topo_seq.ids.begin() + (node + 1) * rp);
                    labels.push_back(g.labels[node]);
                    mask.push_back(train_mask[node]);
                }
            } else {
                labels = g.labels;
                mask = train_mask;
            }
            if (std::find(mask.begin(), mask.end(), 1) == mask.end()) return; // no labeled node

            model.params().zero_grad();
            auto fwd = model.forward_full(features, attr_b, topo_b, cfg.alpha, eff.lambda,
                                          labels, mask, Mode::train,
                                          seed_stream(seed, kDropTag, epoch, batch_index));
            if (!std::isfinite(fwd.breakdown.total))
                throw std::runtime_error("train_one: divergence at epoch " + std::to_string(epoch) +
                                         " (non-finite loss)");
            backward(fwd.loss);
            opt.step();
            ep_ce += fwd.breakdown.ce;
            ep_ca += fwd.breakdown.ca;
            ep_total += fwd.breakdown.total;
            ++n_batches;
        };

        if (cfg.batch_size == 0 || cfg.batch_size >= g.n) {
            run_batch(batch_nodes, 0);
        } else {
            std::vector<std::size_t> order = batch_nodes;
            Rng shuffle_rng(seed_stream(seed, kShufTag, epoch));
            for (std::size_t i = order.size() - 1; i > 0; --i)
                std::swap(order[i], order[uniform_index(shuffle_rng, i + 1)]);
            for (std::size_t start = 0, bi = 0; start < order.size(); start += cfg.batch_size, ++bi) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                run_batch({order.begin() + start, order.begin() + end}, bi);
            }
        }

        const double val_acc = evaluate(model, features, eval_data, cfg.alpha, g, split,
                                        Role::validation);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.ce = n_batches ? ep_ce / static_cast<double>(n_batches) : 0.0;
        rec.ca = n_batches ? ep_ca / static_cast<double>(n_batches) : 0.0;
        rec.total = n_batches ? ep_total / static_cast<double>(n_batches) : 0.0;
        rec.val_acc = val_acc;
        out.curve.push_back(rec);
        out.epochs_run = epoch + 1;

        // ties refresh the snapshot (keep the most-trained equally-good params)
        // but only a strict improvement resets the patience streak
        if (val_acc >= out.best_val_acc) {
            if (val_acc > out.best_val_acc) streak = 0;
            else ++streak;
            out.best_val_acc = val_acc;
            out.best_params = model.params().snapshot_values();
        } else {
            ++streak;
        }
        if (streak >= cfg.patience) break;
    }

    model.params().restore_values(out.best_params);
    out.test_acc = evaluate(model, features, eval_data, cfg.alpha, g, split, Role::test);
    return out;
}

void RunResult::recompute_stats() {
    const std::size_t n = test_accs.size();
    mean_acc = std::accumulate(test_accs.begin(), test_accs.end(), 0.0) /
               static_cast<double>(n);
    if (n <= 1) {
        std_acc = 0.0;
        return;
    }
    double ss = 0.0;
    for (double a : test_accs) ss += (a - mean_acc) * (a - mean_acc);
    std_acc = std::sqrt(ss / static_cast<double>(n - 1));
}

RunResult run_experiment(const TrainConfig& cfg, const Graph& g,
                         const std::pair<TokenTable, TokenTable>* tables) {
    cfg.validate();
    std::pair<TokenTable, TokenTable> built;
    if (!tables) {
        const NormalizedAdjacency adj = normalized_adjacency(g);
        built = build_tables(g, adj, cfg);
        tables = &built;
    }
    RunResult result;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        const SplitAssignment split = make_split(g, cfg.split, cfg.base_seed + r);
        TrainOutcome outcome = train_one_with_tables(cfg, g, split, cfg.base_seed + 10000 + r,
                                                     tables->first, tables->second);
        result.test_accs.push_back(outcome.test_acc);
        result.epochs.push_back(outcome.epochs_run);
        result.val_accs.push_back(outcome.best_val_acc);
        if (r == 0 || outcome.best_val_acc > result.val_accs[result.best_run]) {
            result.best_run = r;
            result.best_params = std::move(outcome.best_params);
        }
        result.curves.push_back(std::move(outcome.curve));
    }
    result.recompute_stats();
    return result;
}

double train_logistic(const Graph& g, const SplitAssignment& split, std::uint64_t seed,
                      double lr, std::size_t max_epochs, std::size_t patience) {
    ParamStore params;
    Rng rng(seed_stream(seed, 0x7091));
    Tensor w = Tensor::matrix(g.d, g.c);
    const double bound = std::sqrt(6.0 / static_cast<double>(g.d + g.c));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = uniform_range(rng, -bound, bound);
    Var W = params.create("W", std::move(w));
    Var b = params.create("b", Tensor::vec(g.c));

    Tensor x = Tensor::matrix(g.n, g.d);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = g.features[i];
    const Var features = constant(std::move(x));

    const auto train_mask = split.mask(Role::train);
    const auto val_mask = split.mask(Role::validation);
    const auto test_mask = split.mask(Role::test);

    Adam opt(params, lr);
    double best_val = -1.0;
    std::vector<Tensor> best;
    std::size_t streak = 0;
    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
        params.zero_grad();
        Var logits = add_rowvec(matmul(features, W), b);
        Var loss = softmax_cross_entropy(logits, g.labels, train_mask);
        backward(loss);
        opt.step();

        Var eval_logits = add_rowvec(matmul(features, W), b);
        const double val = accuracy_on(eval_logits->value, g.labels, val_mask);
        if (val >= best_val) {
            if (val > best_val) streak = 0;
            else ++streak;
            best_val = val;
            best = params.snapshot_values();
        } else {
            ++streak;
        }
        if (streak >= patience) break;
    }
    params.restore_values(best);
    Var final_logits = add_rowvec(matmul(features, W), b);
    return accuracy_on(final_logits->value, g.labels, test_mask);
}

double majority_class_rate(const Graph& g, const SplitAssignment& split) {
    std::vector<std::size_t> counts(g.c, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < g.n; ++i)
        if (split.roles[i] == Role::test) {
            ++counts[static_cast<std::size_t>(g.labels[i])];
            ++total;
        }
    if (total == 0) throw std::invalid_argument("majority_class_rate: empty test set");
    return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
           static_cast<double>(total);
}

std::string result_csv_header() {
    return "dataset,variant,split,k,p,t,s,alpha,lambda,mean_acc,std_acc";
}

std::string result_csv_row(const TrainConfig& cfg, const RunResult& result) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%zu,%g,%zu,%zu,%g,%g,%.6f,%.6f",
                  cfg.dataset.c_str(), variant_name(cfg.variant), split_name(cfg.split), cfg.k,
                  cfg.swap_p, cfg.swap_t, cfg.aug_s, cfg.alpha, cfg.lambda, result.mean_acc,
                  result.std_acc);
    return buf;
}

} // namespace swapgt
