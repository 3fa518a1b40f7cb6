#include "swapgt/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace swapgt {

void TokenTable::check_invariants() const {
    if (ids.size() != n * k) throw std::logic_error("TokenTable: id grid size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        std::unordered_set<std::int32_t> seen;
        for (std::size_t j = 0; j < k; ++j) {
            const std::int32_t v = row(i)[j];
            if (v < 0 || static_cast<std::size_t>(v) >= n)
                throw std::logic_error("TokenTable: id out of range");
            if (static_cast<std::size_t>(v) == i)
                throw std::logic_error("TokenTable: row contains its own node");
            if (!seen.insert(v).second) throw std::logic_error("TokenTable: duplicate id in row");
        }
    }
}

void SwapConfig::validate() const {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("SwapConfig: p must be in [0,1]");
    if (t < 1) throw std::invalid_argument("SwapConfig: t must be >= 1");
    if (s < 1) throw std::invalid_argument("SwapConfig: s must be >= 1");
}

Tensor SequenceBatch::feature_tensor(const Graph& g, std::size_t node) const {
    Tensor out({rows_per_node(), seq_len(), g.d});
    double* O = out.data();
    for (std::size_t r = 0; r < rows_per_node(); ++r)
        for (std::size_t pos = 0; pos < seq_len(); ++pos) {
            const std::size_t id = static_cast<std::size_t>(id_at(node, r, pos));
            for (std::size_t j = 0; j < g.d; ++j)
                O[(r * seq_len() + pos) * g.d + j] = g.features[id * g.d + j];
        }
    return out;
}

void SequenceBatch::check_invariants(const TokenTable& table) const {
    if (ids.size() != n * rows_per_node() * seq_len())
        throw std::logic_error("SequenceBatch: id grid size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < rows_per_node(); ++r)
            if (id_at(i, r, 0) != static_cast<std::int32_t>(i))
                throw std::logic_error("SequenceBatch: row does not start with its node");
        for (std::size_t pos = 0; pos < k && pos < table.k; ++pos)
            if (id_at(i, 0, pos + 1) != table.row(i)[pos])
                throw std::logic_error("SequenceBatch: row 0 differs from the token table");
    }
}

TokenTable cosine_topk(const std::vector<double>& F, std::size_t n, std::size_t dim,
                       std::size_t k, ViewTag view) {
    if (n == 0 || dim == 0 || F.size() != n * dim)
        throw std::invalid_argument("cosine_topk: bad feature shape");
    if (k >= n) throw std::invalid_argument("cosine_topk: k must be < n");
    for (double v : F)
        if (!std::isfinite(v)) throw std::invalid_argument("cosine_topk: non-finite feature");

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (std::size_t j = 0; j < dim; ++j) ss += F[i * dim + j] * F[i * dim + j];
        norms[i] = std::sqrt(ss);
    }

    TokenTable table;
    table.view = view;
    table.n = n;
    table.k = k;
    table.ids.resize(n * k);

    std::vector<std::pair<double, std::int32_t>> scored(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            if (norms[i] != 0.0 && norms[j] != 0.0) {
                double dot = 0.0;
                for (std::size_t t = 0; t < dim; ++t) dot += F[i * dim + t] * F[j * dim + t];
                s = dot / (norms[i] * norms[j]);
            }
            scored[w++] = {s, static_cast<std::int32_t>(j)};
        }
        auto better = [](const std::pair<double, std::int32_t>& a,
                         const std::pair<double, std::int32_t>& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        };
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                          scored.end(), better);
        for (std::size_t j = 0; j < k; ++j) table.ids[i * k + j] = scored[j].second;
    }
    table.check_invariants();
    return table;
}

std::pair<TokenTable, TokenTable> build_token_tables(const Graph& g,
                                                     const NormalizedAdjacency& adj,
                                                     const PropagationConfig& prop_cfg,
                                                     std::size_t k) {
    std::vector<double> X(g.n * g.d);
    for (std::size_t i = 0; i < X.size(); ++i) X[i] = g.features[i];
    TokenTable attr = cosine_topk(X, g.n, g.d, k, ViewTag::attribute);
    std::vector<double> Xp = ppr_propagate(adj, X, g.d, prop_cfg);
    TokenTable topo = cosine_topk(Xp, g.n, g.d, k, ViewTag::topology);
    return {std::move(attr), std::move(topo)};
}

std::vector<std::int32_t> swap_tokens(const TokenTable& table, std::size_t i, double p,
                                      std::size_t t, Rng& rng, SwapStats* stats) {
    if (i >= table.n) throw std::out_of_range("swap_tokens: node out of range");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("swap_tokens: p must be in [0,1]");
    if (t < 1) throw std::invalid_argument("swap_tokens: t must be >= 1");

    std::vector<std::int32_t> tokens(table.row(i), table.row(i) + table.k);
    for (std::size_t round = 0; round < t; ++round) {
        for (std::size_t pos = 0; pos < table.k; ++pos) {
            if (stats) ++stats->positions;
            if (uniform01(rng) < p) {
                if (stats) ++stats->swapped;
                // candidates come from the ORIGINAL table row of the held token
                const std::int32_t held = tokens[pos];
                const std::int32_t* cand = table.row(static_cast<std::size_t>(held));
                tokens[pos] = cand[uniform_index(rng, table.k)];
            }
        }
    }
    return tokens;
}

SequenceBatch build_sequences(const Graph& g, const TokenTable& table, const SwapConfig& cfg,
                              std::uint64_t seed) {
    cfg.validate();
    SequenceBatch batch;
    batch.view = table.view;
    batch.n = g.n;
    batch.k = table.k;
    batch.s = cfg.s;
    batch.seed = seed;
    batch.ids.resize(g.n * batch.rows_per_node() * batch.seq_len());
    for (std::size_t i = 0; i < g.n; ++i) {
        Rng rng(seed_stream(seed, static_cast<std::uint64_t>(table.view), i));
        for (std::size_t r = 0; r < batch.rows_per_node(); ++r) {
            std::int32_t* row = batch.ids.data() + (i * batch.rows_per_node() + r) * batch.seq_len();
            row[0] = static_cast<std::int32_t>(i);
            if (r == 0) {
                std::copy_n(table.row(i), table.k, row + 1);
            } else {
                const auto swapped = swap_tokens(table, i, cfg.p, cfg.t, rng);
                std::copy(swapped.begin(), swapped.end(), row + 1);
            }
        }
    }
    return batch;
}

SequenceBatch build_sequences_subsample(const Graph& g, const TokenTable& table2k,
                                        std::size_t k, std::size_t s, std::uint64_t seed) {
    if (k == 0 || k > table2k.k)
        throw std::invalid_argument("build_sequences_subsample: k exceeds the candidate pool");
    SequenceBatch batch;
    batch.view = table2k.view;
    batch.n = g.n;
    batch.k = k;
    batch.s = s;
    batch.seed = seed;
    batch.ids.resize(g.n * batch.rows_per_node() * batch.seq_len());
    std::vector<std::int32_t> pool(table2k.k);
    for (std::size_t i = 0; i < g.n; ++i) {
        Rng rng(seed_stream(seed, static_cast<std::uint64_t>(table2k.view), i));
        for (std::size_t r = 0; r < batch.rows_per_node(); ++r) {
            std::int32_t* row = batch.ids.data() + (i * batch.rows_per_node() + r) * batch.seq_len();
            row[0] = static_cast<std::int32_t>(i);
            if (r == 0) {
                std::copy_n(table2k.row(i), k, row + 1); // top-k prefix
            } else {
                std::copy_n(table2k.row(i), table2k.k, pool.begin());
                for (std::size_t j = 0; j < k; ++j) { // partial Fisher-Yates
                    std::swap(pool[j], pool[j + uniform_index(rng, pool.size() - j)]);
                    row[1 + j] = pool[j];
                }
            }
        }
    }
    return batch;
}

SequenceBatch build_single_sequence(const Graph& g, const TokenTable& table,
                                    std::uint64_t seed) {
    SequenceBatch batch;
    batch.view = table.view;
    batch.n = g.n;
    batch.k = table.k;
    batch.s = 0;
    batch.seed = seed;
    batch.ids.resize(g.n * batch.seq_len());
    for (std::size_t i = 0; i < g.n; ++i) {
        std::int32_t* row = batch.ids.data() + i * batch.seq_len();
        row[0] = static_cast<std::int32_t>(i);
        std::copy_n(table.row(i), table.k, row + 1);
    }
    return batch;
}

bool hop_bound_oracle(const TokenTable& table, std::size_t i,
                      const std::vector<std::int32_t>& tokens, std::size_t t) {
    const std::size_t max_depth = t + 1;
    std::vector<std::uint8_t> visited(table.n, 0);
    std::queue<std::pair<std::int32_t, std::size_t>> frontier;
    visited[i] = 1;
    frontier.emplace(static_cast<std::int32_t>(i), 0);
    while (!frontier.empty()) {
        auto [u, depth] = frontier.front();
        frontier.pop();
        if (depth == max_depth) continue;
        const std::int32_t* row = table.row(static_cast<std::size_t>(u));
        for (std::size_t j = 0; j < table.k; ++j) {
            const std::int32_t v = row[j];
            if (!visited[static_cast<std::size_t>(v)]) {
                visited[static_cast<std::size_t>(v)] = 1;
                frontier.emplace(v, depth + 1);
            }
        }
    }
    for (std::int32_t tok : tokens)
        if (!visited[static_cast<std::size_t>(tok)]) return false;
    return true;
}

} // namespace swapgt
