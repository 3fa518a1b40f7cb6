#include "doctest.h"

#include "swapgt/graph.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

using namespace swapgt;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("swapgt_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        std::ofstream out(p);
        out << content;
        return p.string();
    }
};

Graph tiny_graph(std::size_t n, std::vector<std::pair<std::int32_t, std::int32_t>> edges,
                 std::vector<std::int32_t> labels) {
    std::vector<float> features(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        features[i * 2] = static_cast<float>(i);
        features[i * 2 + 1] = 1.0f;
    }
    return Graph::build(n, std::move(edges), std::move(features), 2, std::move(labels));
}

// dense reference for the normalized adjacency, evaluated entrywise
double normalized_entry(const Graph& g, std::size_t i, std::size_t j) {
    bool connected = i == j;
    if (!connected)
        for (auto it = g.row_begin(i); it != g.row_end(i); ++it)
            if (static_cast<std::size_t>(*it) == j) connected = true;
    if (!connected) return 0.0;
    return 1.0 / std::sqrt((static_cast<double>(g.degree(i)) + 1.0) *
                           (static_cast<double>(g.degree(j)) + 1.0));
}

double dense_at(const NormalizedAdjacency& a, std::size_t i, std::size_t j) {
    for (std::size_t e = a.offsets[i]; e < a.offsets[i + 1]; ++e)
        if (static_cast<std::size_t>(a.cols[e]) == j) return a.values[e];
    return 0.0;
}

} // namespace

TEST_CASE("load_graph on a 3-node file set") {
    TempDir tmp;
    const auto feat = tmp.file("f.csv", "1.0,0.0\n0.0,1.0\n1.0,1.0\n");
    const auto edge = tmp.file("e.txt", "0 1\n1 2\n");
    const auto lab = tmp.file("l.txt", "0\n1\n1\n");
    Graph g = load_graph(feat, edge, lab);
    CHECK(g.n == 3);
    CHECK(g.d == 2);
    CHECK(g.c == 2);
    CHECK(g.edge_count() == 2);
    CHECK(g.degree(1) == 2);
}

TEST_CASE("load_graph drops self-loops and duplicate directions") {
    TempDir tmp;
    const auto feat = tmp.file("f.csv", "1\n2\n3\n");
    const auto lab = tmp.file("l.txt", "0\n0\n0\n");

    LoadReport report;
    Graph g1 = load_graph(feat, tmp.file("e1.txt", "0 1\n1 1\n"), lab, &report);
    CHECK(g1.edge_count() == 1);
    CHECK(report.dropped_self_loops == 1);

    Graph g2 = load_graph(feat, tmp.file("e2.txt", "0 1\n1 0\n"), lab, &report);
    CHECK(g2.edge_count() == 1);
    CHECK(report.dropped_duplicates == 1);
}

TEST_CASE("load_graph reports malformed input with line numbers") {
    TempDir tmp;
    const auto feat = tmp.file("f.csv", "1.0\n2.0\n");
    const auto lab = tmp.file("l.txt", "0\n1\n");

    CHECK_THROWS_WITH_AS(load_graph(feat, tmp.file("bad.txt", "0 1\n0 oops\n"), lab),
                         doctest::Contains(":2:"), std::runtime_error);
    CHECK_THROWS(load_graph(feat, tmp.file("range.txt", "0 7\n"), lab));
    CHECK_THROWS(load_graph(tmp.file("badf.csv", "1.0,zzz\n"), tmp.file("e.txt", ""), lab));
    CHECK_THROWS(load_graph(feat, tmp.file("e.txt", ""), tmp.file("badl.txt", "0\n")));
}

TEST_CASE("save/load round-trips to an identical graph") {
    Graph g = generate_sbm({{8, 9, 7}, 0.4, 0.1, 5, 2.0, 1.0}, 17);
    TempDir tmp;
    const auto f = (tmp.path / "f.csv").string();
    const auto e = (tmp.path / "e.txt").string();
    const auto l = (tmp.path / "l.txt").string();
    save_graph(g, f, e, l);
    Graph back = load_graph(f, e, l);
    CHECK(back.n == g.n);
    CHECK(back.d == g.d);
    CHECK(back.c == g.c);
    CHECK(back.offsets == g.offsets);
    CHECK(back.neighbors == g.neighbors);
    CHECK(back.labels == g.labels);
    REQUIRE(back.features.size() == g.features.size());
    for (std::size_t i = 0; i < g.features.size(); ++i) CHECK(back.features[i] == g.features[i]);
}

TEST_CASE("normalized adjacency on hand-checkable graphs") {
    SUBCASE("isolated single node") {
        Graph g = tiny_graph(1, {}, {0});
        NormalizedAdjacency a = normalized_adjacency(g);
        REQUIRE(a.values.size() == 1);
        CHECK(a.values[0] == 1.0);
    }
    SUBCASE("two nodes, one edge: all four entries 0.5") {
        Graph g = tiny_graph(2, {{0, 1}}, {0, 0});
        NormalizedAdjacency a = normalized_adjacency(g);
        REQUIRE(a.values.size() == 4);
        for (double v : a.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("path 0-1-2: entry (0,1) = (2*3)^(-1/2)") {
        Graph g = tiny_graph(3, {{0, 1}, {1, 2}}, {0, 0, 0});
        NormalizedAdjacency a = normalized_adjacency(g);
        CHECK(dense_at(a, 0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
        // entrywise against the dense formula
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(dense_at(a, i, j) == doctest::Approx(normalized_entry(g, i, j)).epsilon(1e-15));
    }
}

TEST_CASE("normalized adjacency is exactly symmetric with the A+I pattern") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Graph g = generate_sbm({{170, 160, 170}, 0.02, 0.005, 4, 1.0, 1.0}, seed);
        REQUIRE(g.n == 500);
        NormalizedAdjacency a = normalized_adjacency(g);

        // pattern: per row, neighbors plus the diagonal, sorted
        std::size_t nnz_expected = 0;
        for (std::size_t u = 0; u < g.n; ++u) nnz_expected += g.degree(u) + 1;
        REQUIRE(a.values.size() == nnz_expected);
        for (std::size_t u = 0; u < g.n; ++u) {
            std::set<std::int32_t> expected(g.row_begin(u), g.row_end(u));
            expected.insert(static_cast<std::int32_t>(u));
            std::set<std::int32_t> got(a.cols.begin() + static_cast<std::ptrdiff_t>(a.offsets[u]),
                                       a.cols.begin() + static_cast<std::ptrdiff_t>(a.offsets[u + 1]));
            CHECK(expected == got);
        }
        // bitwise symmetry
        for (std::size_t u = 0; u < g.n; ++u)
            for (std::size_t e = a.offsets[u]; e < a.offsets[u + 1]; ++e) {
                const std::size_t v = static_cast<std::size_t>(a.cols[e]);
                CHECK(a.values[e] == dense_at(a, v, u));
            }
    }
}

TEST_CASE("edge homophily") {
    Graph tri = tiny_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {1, 1, 1});
    CHECK(edge_homophily(tri) == 1.0);
    Graph pair = tiny_graph(2, {{0, 1}}, {0, 1});
    CHECK(edge_homophily(pair) == 0.0);
    Graph lonely = tiny_graph(3, {}, {0, 1, 2});
    CHECK(edge_homophily(lonely) == 1.0); // empty edge set convention

    // always in [0,1]; single-class graphs give exactly 1
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Graph g = generate_sbm({{20, 20}, 0.2, 0.2, 3, 1.0, 1.0}, seed);
        const double h = edge_homophily(g);
        CHECK(h >= 0.0);
        CHECK(h <= 1.0);
        Graph mono = generate_sbm({{40}, 0.2, 0.0, 3, 1.0, 1.0}, seed);
        CHECK(edge_homophily(mono) == 1.0);
    }
}

TEST_CASE("make_split honors the rounding rule") {
    SUBCASE("100 nodes, 1 class, dense: 50/25/25") {
        Graph g = tiny_graph(100, {}, std::vector<std::int32_t>(100, 0));
        SplitAssignment sp = make_split(g, SplitKind::dense, 7);
        CHECK(sp.count(Role::train) == 50);
        CHECK(sp.count(Role::validation) == 25);
        CHECK(sp.count(Role::test) == 25);
    }
    SUBCASE("200 nodes, 2 balanced classes, sparse: floor(2.5) per class") {
        std::vector<std::int32_t> labels(200);
        for (std::size_t i = 100; i < 200; ++i) labels[i] = 1;
        Graph g = tiny_graph(200, {}, labels);
        SplitAssignment sp = make_split(g, SplitKind::sparse, 3);
        CHECK(sp.count(Role::train) == 4); // 2 per class
        CHECK(sp.count(Role::validation) == 4);
        CHECK(sp.count(Role::test) == 192);
        // per-class counts
        for (int cls = 0; cls < 2; ++cls) {
            std::size_t tr = 0, va = 0;
            for (std::size_t i = 0; i < 200; ++i) {
                if (g.labels[i] != cls) continue;
                tr += sp.roles[i] == Role::train;
                va += sp.roles[i] == Role::validation;
            }
            CHECK(tr == 2);
            CHECK(va == 2);
        }
    }
    SUBCASE("per-class minimum of one train and one val node") {
        std::vector<std::int32_t> labels(43, 0);
        labels[40] = labels[41] = labels[42] = 1; // 3-member class, dense
        Graph g = tiny_graph(43, {}, labels);
        SplitAssignment sp = make_split(g, SplitKind::dense, 5);
        std::size_t tr = 0, va = 0, te = 0;
        for (std::size_t i = 40; i < 43; ++i) {
            tr += sp.roles[i] == Role::train;
            va += sp.roles[i] == Role::validation;
            te += sp.roles[i] == Role::test;
        }
        CHECK(tr == 1);
        CHECK(va == 1);
        CHECK(te == 1);
    }
    SUBCASE("classes below the minimum are rejected") {
        std::vector<std::int32_t> labels(12, 0);
        labels[10] = labels[11] = 1;
        Graph g = tiny_graph(12, {}, labels);
        CHECK_THROWS(make_split(g, SplitKind::dense, 1)); // class of 2 < dense minimum 3
        CHECK_NOTHROW(make_split(g, SplitKind::sparse, 1));
    }
}

TEST_CASE("make_split is deterministic and seed-sensitive") {
    Graph g = generate_sbm({{30, 30}, 0.1, 0.05, 4, 1.0, 1.0}, 9);
    SplitAssignment a = make_split(g, SplitKind::dense, 123);
    SplitAssignment b = make_split(g, SplitKind::dense, 123);
    CHECK(a.roles == b.roles);

    std::size_t differing = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SplitAssignment s0 = make_split(g, SplitKind::dense, seed);
        SplitAssignment s1 = make_split(g, SplitKind::dense, seed + 1);
        if (s0.roles != s1.roles) ++differing;
    }
    CHECK(differing >= 99);
}

TEST_CASE("sbm generator extremes and edge-count expectation") {
    SUBCASE("intra 1.0 / inter 0.0 gives two cliques") {
        Graph g = generate_sbm({{10, 10}, 1.0, 0.0, 4, 2.0, 0.5}, 21);
        CHECK(g.edge_count() == 2 * 45);
        for (std::size_t u = 0; u < g.n; ++u) CHECK(g.degree(u) == 9);
        CHECK(edge_homophily(g) == 1.0);
    }
    SUBCASE("intra 0.0 / inter 1.0 gives a complete bipartite graph") {
        Graph g = generate_sbm({{10, 10}, 0.0, 1.0, 4, 2.0, 0.5}, 22);
        CHECK(g.edge_count() == 100);
        CHECK(edge_homophily(g) == 0.0);
    }
    SUBCASE("intra-edge count within 3 sigma of the binomial expectation") {
        Graph g = generate_sbm({{50, 50, 50, 50}, 0.1, 0.01, 8, 2.0, 1.0}, 23);
        std::size_t intra = 0;
        for (std::size_t u = 0; u < g.n; ++u)
            for (auto it = g.row_begin(u); it != g.row_end(u); ++it)
                if (static_cast<std::size_t>(*it) > u && g.labels[u] == g.labels[*it]) ++intra;
        const double trials = 4.0 * (50.0 * 49.0 / 2.0);
        const double mean = trials * 0.1;
        const double sigma = std::sqrt(trials * 0.1 * 0.9);
        CHECK(std::abs(static_cast<double>(intra) - mean) < 3.0 * sigma);
    }
    SUBCASE("deterministic given seed") {
        Graph a = generate_sbm({{15, 15}, 0.3, 0.05, 4, 2.0, 1.0}, 99);
        Graph b = generate_sbm({{15, 15}, 0.3, 0.05, 4, 2.0, 1.0}, 99);
        CHECK(a.neighbors == b.neighbors);
        CHECK(a.features == b.features);
    }
}
