#include "doctest.h"

#include "swapgt/propagation.hpp"

#include <cmath>

using namespace swapgt;

namespace {

std::vector<double> random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n * d);
    for (auto& v : x) v = normal01(rng);
    return x;
}

// Dense reference: materializes (D+I)^{-1/2} (A+I) (D+I)^{-1/2} as a full
// matrix straight from the graph and runs the same recurrence with full
// matrix products.
std::vector<double> dense_ppr_oracle(const Graph& g, const std::vector<double>& X,
                                     std::size_t d, const PropagationConfig& cfg) {
    const std::size_t n = g.n;
    std::vector<double> ahat(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double di = 1.0 / std::sqrt(static_cast<double>(g.degree(i)) + 1.0);
        ahat[i * n + i] = di * di;
        for (auto it = g.row_begin(i); it != g.row_end(i); ++it) {
            const std::size_t j = static_cast<std::size_t>(*it);
            ahat[i * n + j] = di / std::sqrt(static_cast<double>(g.degree(j)) + 1.0);
        }
    }
    std::vector<double> h = X;
    std::vector<double> next(n * d);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) acc += ahat[i * n + k] * h[k * d + j];
                next[i * d + j] = (1.0 - cfg.beta) * acc + cfg.beta * X[i * d + j];
            }
        h = next;
    }
    return h;
}

} // namespace

TEST_CASE("zero steps and beta=1 return the input exactly") {
    Graph g = generate_sbm({{10, 10}, 0.3, 0.1, 4, 1.0, 1.0}, 3);
    NormalizedAdjacency adj = normalized_adjacency(g);
    std::vector<double> x = random_features(g.n, 4, 11);

    std::vector<double> k0 = ppr_propagate(adj, x, 4, {0, 0.15});
    CHECK(k0 == x);

    std::vector<double> b1 = ppr_propagate(adj, x, 4, {7, 1.0});
    CHECK(b1 == x);
}

TEST_CASE("6-node graph matches the dense recurrence oracle to 1e-10") {
    Graph g = Graph::build(
        6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}},
        std::vector<float>(6 * 3, 0.0f), 3, {0, 0, 0, 1, 1, 1});
    NormalizedAdjacency adj = normalized_adjacency(g);
    std::vector<double> x = random_features(6, 3, 29);
    PropagationConfig cfg{3, 0.15};
    std::vector<double> got = ppr_propagate(adj, x, 3, cfg);
    std::vector<double> want = dense_ppr_oracle(g, x, 3, cfg);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);
}

TEST_CASE("sparse implementation equals the dense oracle across sizes") {
    for (std::size_t n : {20u, 77u, 200u}) {
        for (std::size_t K : {1u, 4u, 10u}) {
            Graph g = generate_sbm({{n / 2, n - n / 2}, 0.08, 0.03, 5, 1.0, 1.0}, n + K);
            NormalizedAdjacency adj = normalized_adjacency(g);
            std::vector<double> x = random_features(n, 5, n * 31 + K);
            PropagationConfig cfg{K, 0.2};
            std::vector<double> got = ppr_propagate(adj, x, 5, cfg);
            std::vector<double> want = dense_ppr_oracle(g, x, 5, cfg);
            for (std::size_t i = 0; i < got.size(); ++i)
                CHECK(std::abs(got[i] - want[i]) < 1e-10);
        }
    }
}

TEST_CASE("propagation is linear") {
    Graph g = generate_sbm({{25, 25}, 0.1, 0.02, 4, 1.0, 1.0}, 5);
    NormalizedAdjacency adj = normalized_adjacency(g);
    std::vector<double> x1 = random_features(g.n, 4, 101);
    std::vector<double> x2 = random_features(g.n, 4, 102);
    const double a = 1.7, b = -0.6;
    std::vector<double> combo(x1.size());
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x1[i] + b * x2[i];

    PropagationConfig cfg{6, 0.15};
    std::vector<double> lhs = ppr_propagate(adj, combo, 4, cfg);
    std::vector<double> p1 = ppr_propagate(adj, x1, 4, cfg);
    std::vector<double> p2 = ppr_propagate(adj, x2, 4, cfg);
    for (std::size_t i = 0; i < lhs.size(); ++i)
        CHECK(std::abs(lhs[i] - (a * p1[i] + b * p2[i])) < 1e-9);
}

TEST_CASE("output stays finite over long horizons") {
    Graph g = generate_sbm({{40, 40}, 0.15, 0.05, 6, 1.0, 1.0}, 8);
    NormalizedAdjacency adj = normalized_adjacency(g);
    std::vector<double> x = random_features(g.n, 6, 55);
    for (auto& v : x) v *= 1e6;
    std::vector<double> out = ppr_propagate(adj, x, 6, {200, 0.05});
    for (double v : out) CHECK(std::isfinite(v));
}

TEST_CASE("dimension mismatch is rejected") {
    Graph g = generate_sbm({{5, 5}, 0.5, 0.1, 3, 1.0, 1.0}, 1);
    NormalizedAdjacency adj = normalized_adjacency(g);
    std::vector<double> wrong(g.n * 3 + 1, 0.0);
    CHECK_THROWS(ppr_propagate(adj, wrong, 3, {2, 0.15}));
    std::vector<double> x(g.n * 3, 0.0);
    CHECK_THROWS(ppr_propagate(adj, x, 3, {2, 1.5}));
}
