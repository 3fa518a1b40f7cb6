#pragma once

#include "swapgt/graph.hpp"

#include <vector>

namespace swapgt {

struct PropagationConfig {
    std::size_t steps = 10; // K
    double beta = 0.15;     // teleport coefficient in [0,1]
};

/// Personalized-PageRank style propagation over the normalized adjacency:
/// H0 = X, Hk = (1-beta) * A_hat * H(k-1) + beta * X, returns H_K.
/// X is row-major n*d; all arithmetic is 64-bit.
std::vector<double> ppr_propagate(const NormalizedAdjacency& adj,
                                  const std::vector<double>& X, std::size_t d,
                                  const PropagationConfig& cfg);

/// Convenience overload over a graph's float32 features.
std::vector<double> ppr_propagate(const NormalizedAdjacency& adj, const Graph& g,
                                  const PropagationConfig& cfg);

} // namespace swapgt
