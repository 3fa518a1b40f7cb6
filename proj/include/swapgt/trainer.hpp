#pragma once

#include "swapgt/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace swapgt {

enum class Variant { full, no_cal, large_k, random_subsample };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& s);
const char* split_name(SplitKind k);
SplitKind parse_split(const std::string& s);

/// Every knob of the pipeline. Parsed from key=value config files; see
/// config.hpp.
struct TrainConfig {
    // data source: either the three file paths or an SBM spec
    std::string dataset = "sbm";
    std::string feature_path, edge_path, label_path;
    SbmSpec sbm{{50, 50, 50, 50}, 0.1, 0.01, 8, 2.0, 1.0};

    // tokenizer
    std::size_t k = 6;
    std::size_t ppr_steps = 10;
    double ppr_beta = 0.15;
    double swap_p = 0.5;
    std::size_t swap_t = 2;
    std::size_t aug_s = 2;
    bool resample_each_epoch = false;

    // model
    std::size_t hidden_dim = 256;
    std::size_t ffn_dim = 512;
    std::size_t layers = 1;
    std::size_t heads = 8;
    double alpha = 0.5;
    double lambda = 1.0;
    double dropout = 0.3;
    bool share_encoder = true;

    // optimization
    double learning_rate = 0.01;
    double weight_decay = 0.0;
    std::size_t max_epochs = 500;
    std::size_t patience = 50;
    std::size_t batch_size = 0; // 0 = full batch
    std::size_t runs = 10;
    std::uint64_t base_seed = 0;
    SplitKind split = SplitKind::dense;
    Variant variant = Variant::full;

    bool uses_files() const { return !feature_path.empty(); }
    void validate() const;
};

/// Variant-resolved tokenization and loss settings.
struct EffectiveConfig {
    enum class SeqMode { swap, single_long, subsample };
    std::size_t table_k = 0; // k or 2k
    SeqMode mode = SeqMode::swap;
    std::size_t s = 0;       // 0 for the single-long-sequence variant
    double lambda = 0.0;
};

EffectiveConfig apply_variant(const TrainConfig& cfg);

/// Token tables plus both views' sequence batches for one run.
struct PreparedData {
    TokenTable attr_table, topo_table;
    SequenceBatch attr_seq, topo_seq;
};

/// Variant-aware table construction (k or 2k candidates per the variant).
std::pair<TokenTable, TokenTable> build_tables(const Graph& g, const NormalizedAdjacency& adj,
                                               const TrainConfig& cfg);

/// Builds tables once and generates sequences per the effective variant.
/// `epoch_tag` selects the resampling stream (0 = the base sequences).
PreparedData prepare_data(const Graph& g, const NormalizedAdjacency& adj,
                          const TrainConfig& cfg, std::uint64_t seq_seed);
/// Same, reusing already-built tables (they only depend on the config, not
/// the run seed).
PreparedData prepare_data_with_tables(TokenTable attr_table, TokenTable topo_table,
                                      const Graph& g, const TrainConfig& cfg,
                                      std::uint64_t seq_seed);
void resample_sequences(PreparedData& data, const Graph& g, const TrainConfig& cfg,
                        std::uint64_t seq_seed, std::size_t epoch_tag);

struct EpochRecord {
    std::size_t epoch = 0;
    double ce = 0.0, ca = 0.0, total = 0.0;
    double val_acc = 0.0;
};

struct TrainOutcome {
    std::vector<Tensor> best_params;
    double best_val_acc = 0.0;
    double test_acc = 0.0;
    std::size_t epochs_run = 0;
    std::vector<EpochRecord> curve;
};

/// Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8. Weight decay
/// is classic L2 added to the gradient (0 by default).
class Adam {
public:
    Adam(ParamStore& params, double lr, double weight_decay = 0.0);
    void step();

private:
    ParamStore& params_;
    double lr_, weight_decay_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

/// One training run: Adam, per-epoch validation, snapshot of the best
/// validation epoch, early stop once the non-improving streak reaches
/// `patience` (patience 0 therefore runs exactly one epoch). Deterministic
/// given (config, graph, split, seed). Throws on divergence.
TrainOutcome train_one(const TrainConfig& cfg, const Graph& g, const SplitAssignment& split,
                       std::uint64_t seed);
TrainOutcome train_one_with_tables(const TrainConfig& cfg, const Graph& g,
                                   const SplitAssignment& split, std::uint64_t seed,
                                   const TokenTable& attr_table, const TokenTable& topo_table);

/// Share of role-selected nodes whose argmax logit matches the label
/// (eval-mode forward; argmax ties resolve to the lowest class id).
double evaluate(const Model& model, const Var& node_features, const PreparedData& data,
                double alpha, const Graph& g, const SplitAssignment& split, Role role);

struct RunResult {
    std::vector<double> test_accs;
    double mean_acc = 0.0;
    double std_acc = 0.0; // sample stddev; 0 when runs == 1
    std::vector<std::size_t> epochs;
    std::vector<std::vector<EpochRecord>> curves;
    std::vector<double> val_accs;    // best validation accuracy per run
    std::size_t best_run = 0;        // run with the highest validation accuracy
    std::vector<Tensor> best_params; // parameter snapshot of that run

    void recompute_stats();
};

/// Multi-seed protocol: run r uses split seed base_seed+r and init seed
/// base_seed+10000+r. Tables are built once and shared across runs; pass
/// `tables` to reuse externally cached ones.
RunResult run_experiment(const TrainConfig& cfg, const Graph& g,
                         const std::pair<TokenTable, TokenTable>* tables = nullptr);

/// Softmax regression on raw features under the same split protocol; the
/// trivial baseline for the synthetic end-to-end comparison.
double train_logistic(const Graph& g, const SplitAssignment& split, std::uint64_t seed,
                      double lr = 0.05, std::size_t max_epochs = 300, std::size_t patience = 30);

/// Test accuracy of always predicting the most frequent test-set class.
double majority_class_rate(const Graph& g, const SplitAssignment& split);

// ---- machine-readable result rows ------------------------------------------

std::string result_csv_header();
std::string result_csv_row(const TrainConfig& cfg, const RunResult& result);

} // namespace swapgt
