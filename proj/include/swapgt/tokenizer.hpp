#pragma once

#include "swapgt/graph.hpp"
#include "swapgt/propagation.hpp"
#include "swapgt/tensor.hpp"

#include <cstdint>
#include <vector>

namespace swapgt {

enum class ViewTag : std::uint8_t { attribute = 0, topology = 1 };

/// Per-node top-k most similar node ids. Row i never contains i, has no
/// duplicates, and is ordered by descending cosine score with ties broken by
/// ascending id. Doubles as the adjacency of the k-NN digraph (arc i -> row i).
struct TokenTable {
    ViewTag view = ViewTag::attribute;
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::int32_t> ids; // n*k row-major

    const std::int32_t* row(std::size_t i) const { return ids.data() + i * k; }
    void check_invariants() const;
};

struct SwapConfig {
    double p = 0.5;     // per-position swap probability
    std::size_t t = 2;  // swapping rounds, >= 1
    std::size_t s = 2;  // augmented sequences per node, >= 1
    void validate() const;
};

/// Per-node (1+s) x (1+k) token-id grid. Row layout per node: entry [j][0] is
/// always the node itself; row 0 is the unswapped table row. Token features
/// are materialized on demand from the raw attribute matrix for both views.
struct SequenceBatch {
    ViewTag view = ViewTag::attribute;
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t s = 0;
    std::uint64_t seed = 0;
    std::vector<std::int32_t> ids; // n*(1+s)*(1+k), node-major then row-major

    std::size_t rows_per_node() const { return 1 + s; }
    std::size_t seq_len() const { return 1 + k; }
    std::int32_t id_at(std::size_t node, std::size_t row, std::size_t pos) const {
        return ids[(node * rows_per_node() + row) * seq_len() + pos];
    }
    /// Raw-feature tensor (1+s) x (1+k) x d for one node.
    Tensor feature_tensor(const Graph& g, std::size_t node) const;
    void check_invariants(const TokenTable& table) const;
};

/// Exact top-k by cosine similarity over the rows of F (n x dim, row-major).
/// Cosine with a zero-norm vector is defined as 0. Requires k <= n-1.
TokenTable cosine_topk(const std::vector<double>& F, std::size_t n, std::size_t dim,
                       std::size_t k, ViewTag view);

/// Attribute table from raw features, topology table from PPR-propagated
/// features.
std::pair<TokenTable, TokenTable> build_token_tables(const Graph& g,
                                                     const NormalizedAdjacency& adj,
                                                     const PropagationConfig& prop_cfg,
                                                     std::size_t k);

/// Branch statistics for the swap-rate property checks.
struct SwapStats {
    std::size_t positions = 0;
    std::size_t swapped = 0;
};

/// One token-swapping pass for node i: t rounds; each position keeps its
/// token with probability 1-p, otherwise replaces it with a uniform member of
/// the ORIGINAL table row of the token currently held. Output keeps fixed
/// length k; duplicates are permitted.
std::vector<std::int32_t> swap_tokens(const TokenTable& table, std::size_t i, double p,
                                      std::size_t t, Rng& rng, SwapStats* stats = nullptr);

/// Sequences for every node: row 0 = [i, N_i...], rows 1..s from swap_tokens.
/// Each node draws from an independent stream derived from (seed, view, node),
/// so generation order does not matter.
SequenceBatch build_sequences(const Graph& g, const TokenTable& table, const SwapConfig& cfg,
                              std::uint64_t seed);

/// Variant builder: table holds 2k candidates; row 0 is the top-k prefix and
/// rows 1..s draw k ids uniformly without replacement from the 2k pool.
SequenceBatch build_sequences_subsample(const Graph& g, const TokenTable& table2k,
                                        std::size_t k, std::size_t s, std::uint64_t seed);

/// Variant builder: one unswapped sequence of length 1+table.k per node (s=0).
SequenceBatch build_single_sequence(const Graph& g, const TokenTable& table,
                                    std::uint64_t seed);

/// True iff every token is reachable from i within t+1 hops of the k-NN
/// digraph (directed BFS over table rows).
bool hop_bound_oracle(const TokenTable& table, std::size_t i,
                      const std::vector<std::int32_t>& tokens, std::size_t t);

} // namespace swapgt
