#include "swapgt/propagation.hpp"

#include <stdexcept>

namespace swapgt {

std::vector<double> ppr_propagate(const NormalizedAdjacency& adj,
                                  const std::vector<double>& X, std::size_t d,
                                  const PropagationConfig& cfg) {
    if (cfg.beta < 0.0 || cfg.beta > 1.0)
        throw std::invalid_argument("ppr_propagate: beta must be in [0,1]");
    if (d == 0 || X.size() != adj.n * d)
        throw std::invalid_argument("ppr_propagate: feature shape does not match adjacency");

    std::vector<double> h = X;
    if (cfg.steps == 0 || cfg.beta == 1.0) return h;

    const double retain = 1.0 - cfg.beta;
    std::vector<double> next(adj.n * d);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        for (std::size_t i = 0; i < adj.n; ++i) {
            double* out = next.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) out[j] = cfg.beta * X[i * d + j];
            for (std::size_t e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e) {
                const double w = retain * adj.values[e];
                const double* row = h.data() + static_cast<std::size_t>(adj.cols[e]) * d;
                for (std::size_t j = 0; j < d; ++j) out[j] += w * row[j];
            }
        }
        h.swap(next);
    }
    return h;
}

std::vector<double> ppr_propagate(const NormalizedAdjacency& adj, const Graph& g,
                                  const PropagationConfig& cfg) {
    std::vector<double> X(g.n * g.d);
    for (std::size_t i = 0; i < X.size(); ++i) X[i] = g.features[i];
    return ppr_propagate(adj, X, g.d, cfg);
}

} // namespace swapgt
