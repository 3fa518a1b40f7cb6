#include "swapgt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace swapgt {

namespace {

[[noreturn]] void data_error(const std::string& msg) { throw std::runtime_error(msg); }

[[noreturn]] void line_error(const std::string& path, std::size_t line, const std::string& what) {
    data_error(path + ":" + std::to_string(line) + ": " + what);
}

} // namespace

std::vector<double> Graph::feature_row(std::size_t u) const {
    std::vector<double> out(d);
    for (std::size_t j = 0; j < d; ++j) out[j] = features[u * d + j];
    return out;
}

void Graph::check_invariants() const {
    if (offsets.size() != n + 1 || offsets.front() != 0 || offsets.back() != neighbors.size())
        data_error("Graph: bad CSR offsets");
    if (features.size() != n * d) data_error("Graph: feature size mismatch");
    if (labels.size() != n) data_error("Graph: label size mismatch");
    for (float f : features)
        if (!std::isfinite(f)) data_error("Graph: non-finite feature");
    for (std::int32_t y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= c) data_error("Graph: label out of range");
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t e = offsets[u]; e < offsets[u + 1]; ++e) {
            const std::int32_t v = neighbors[e];
            if (v < 0 || static_cast<std::size_t>(v) >= n) data_error("Graph: endpoint out of range");
            if (static_cast<std::size_t>(v) == u) data_error("Graph: stored self-loop");
            if (e > offsets[u] && neighbors[e - 1] >= v) data_error("Graph: unsorted or duplicate edge");
        }
    }
}

Graph Graph::build(std::size_t n, std::vector<std::pair<std::int32_t, std::int32_t>> edges,
                   std::vector<float> features, std::size_t d,
                   std::vector<std::int32_t> labels,
                   std::size_t* dropped_self, std::size_t* dropped_dup) {
    std::size_t self_count = 0, dup_count = 0;
    std::set<std::pair<std::int32_t, std::int32_t>> uniq;
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
            data_error("Graph::build: edge endpoint out of range");
        if (u == v) {
            ++self_count;
            continue;
        }
        if (u > v) std::swap(u, v);
        if (!uniq.emplace(u, v).second) ++dup_count;
    }
    if (dropped_self) *dropped_self = self_count;
    if (dropped_dup) *dropped_dup = dup_count;

    Graph g;
    g.n = n;
    g.d = d;
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.c = 0;
    for (std::int32_t y : g.labels) g.c = std::max<std::size_t>(g.c, static_cast<std::size_t>(y) + 1);
    if (g.c == 0) g.c = 1;

    std::vector<std::size_t> deg(n, 0);
    for (const auto& [u, v] : uniq) {
        ++deg[static_cast<std::size_t>(u)];
        ++deg[static_cast<std::size_t>(v)];
    }
    g.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + deg[i];
    g.neighbors.resize(g.offsets.back());
    std::vector<std::size_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (const auto& [u, v] : uniq) {
        g.neighbors[cursor[static_cast<std::size_t>(u)]++] = v;
        g.neighbors[cursor[static_cast<std::size_t>(v)]++] = u;
    }
    for (std::size_t u = 0; u < n; ++u)
        std::sort(g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[u]),
                  g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[u + 1]));
    g.check_invariants();
    return g;
}

NormalizedAdjacency normalized_adjacency(const Graph& g) {
    NormalizedAdjacency a;
    a.n = g.n;
    a.offsets.assign(g.n + 1, 0);
    std::vector<double> inv_sqrt(g.n);
    for (std::size_t u = 0; u < g.n; ++u)
        inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u)) + 1.0);
    for (std::size_t u = 0; u < g.n; ++u) a.offsets[u + 1] = a.offsets[u] + g.degree(u) + 1;
    a.cols.resize(a.offsets.back());
    a.values.resize(a.offsets.back());
    for (std::size_t u = 0; u < g.n; ++u) {
        std::size_t w = a.offsets[u];
        bool placed_diag = false;
        for (std::size_t e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
            const std::int32_t v = g.neighbors[e];
            if (!placed_diag && static_cast<std::size_t>(v) > u) {
                a.cols[w] = static_cast<std::int32_t>(u);
                a.values[w] = inv_sqrt[u] * inv_sqrt[u];
                ++w;
                placed_diag = true;
            }
            a.cols[w] = v;
            a.values[w] = inv_sqrt[u] * inv_sqrt[static_cast<std::size_t>(v)];
            ++w;
        }
        if (!placed_diag) {
            a.cols[w] = static_cast<std::int32_t>(u);
            a.values[w] = inv_sqrt[u] * inv_sqrt[u];
        }
    }
    return a;
}

double edge_homophily(const Graph& g) {
    if (g.n == 0) data_error("edge_homophily: empty graph");
    std::size_t same = 0, total = 0;
    for (std::size_t u = 0; u < g.n; ++u)
        for (std::size_t e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
            const std::size_t v = static_cast<std::size_t>(g.neighbors[e]);
            if (v <= u) continue; // count each undirected edge once
            ++total;
            if (g.labels[u] == g.labels[v]) ++same;
        }
    if (total == 0) return 1.0;
    return static_cast<double>(same) / static_cast<double>(total);
}

std::vector<std::uint8_t> SplitAssignment::mask(Role r) const {
    std::vector<std::uint8_t> m(roles.size(), 0);
    for (std::size_t i = 0; i < roles.size(); ++i) m[i] = roles[i] == r ? 1 : 0;
    return m;
}

std::size_t SplitAssignment::count(Role r) const {
    std::size_t c = 0;
    for (Role x : roles) c += x == r ? 1 : 0;
    return c;
}

SplitAssignment make_split(const Graph& g, SplitKind kind, std::uint64_t seed) {
    SplitAssignment out;
    out.kind = kind;
    out.seed = seed;
    out.roles.assign(g.n, Role::test);

    std::vector<std::vector<std::int32_t>> members(g.c);
    for (std::size_t i = 0; i < g.n; ++i)
        members[static_cast<std::size_t>(g.labels[i])].push_back(static_cast<std::int32_t>(i));

    const double train_frac = kind == SplitKind::dense ? 0.50 : 0.025;
    const double val_frac = kind == SplitKind::dense ? 0.25 : 0.025;
    const std::size_t min_members = kind == SplitKind::dense ? 3 : 2;

    for (std::size_t cls = 0; cls < g.c; ++cls) {
        auto& ids = members[cls];
        if (ids.empty()) continue;
        if (ids.size() < min_members)
            data_error("make_split: class " + std::to_string(cls) + " has only " +
                       std::to_string(ids.size()) + " members");
        Rng rng(seed_stream(seed, 0x59717, cls));
        // Fisher-Yates with the portable index draw
        for (std::size_t i = ids.size() - 1; i > 0; --i)
            std::swap(ids[i], ids[uniform_index(rng, i + 1)]);
        const std::size_t m = ids.size();
        std::size_t n_train = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(m))));
        std::size_t n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(m))));
        if (n_train + n_val > m)
            data_error("make_split: class " + std::to_string(cls) + " too small for split minimums");
        for (std::size_t i = 0; i < n_train; ++i)
            out.roles[static_cast<std::size_t>(ids[i])] = Role::train;
        for (std::size_t i = n_train; i < n_train + n_val; ++i)
            out.roles[static_cast<std::size_t>(ids[i])] = Role::validation;
    }
    return out;
}

std::size_t SbmSpec::total_nodes() const {
    return std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0});
}

void SbmSpec::validate() const {
    if (block_sizes.empty()) data_error("SbmSpec: no blocks");
    for (std::size_t s : block_sizes)
        if (s == 0) data_error("SbmSpec: zero block size");
    if (intra_prob < 0.0 || intra_prob > 1.0 || inter_prob < 0.0 || inter_prob > 1.0)
        data_error("SbmSpec: probabilities must be in [0,1]");
    if (feature_dim == 0) data_error("SbmSpec: feature_dim must be positive");
    if (noise < 0.0) data_error("SbmSpec: negative noise");
}

Graph generate_sbm(const SbmSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n = spec.total_nodes();
    std::vector<std::int32_t> labels(n);
    std::size_t at = 0;
    for (std::size_t b = 0; b < spec.blocks(); ++b)
        for (std::size_t i = 0; i < spec.block_sizes[b]; ++i) labels[at++] = static_cast<std::int32_t>(b);

    Rng edge_rng(seed_stream(seed, 0xedbe5));
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v) {
            const double p = labels[u] == labels[v] ? spec.intra_prob : spec.inter_prob;
            if (uniform01(edge_rng) < p)
                edges.emplace_back(static_cast<std::int32_t>(u), static_cast<std::int32_t>(v));
        }

    Rng feat_rng(seed_stream(seed, 0xfea75));
    std::vector<float> features(n * spec.feature_dim);
    for (std::size_t u = 0; u < n; ++u) {
        const std::size_t axis = static_cast<std::size_t>(labels[u]) % spec.feature_dim;
        for (std::size_t j = 0; j < spec.feature_dim; ++j) {
            double v = spec.noise * normal01(feat_rng);
            if (j == axis) v += spec.mean_separation;
            features[u * spec.feature_dim + j] = static_cast<float>(v);
        }
    }
    return Graph::build(n, std::move(edges), std::move(features), spec.feature_dim,
                        std::move(labels));
}

// ---- file I/O --------------------------------------------------------------

Graph load_graph(const std::string& feature_path, const std::string& edge_path,
                 const std::string& label_path, LoadReport* report) {
    std::ifstream ff(feature_path);
    if (!ff) data_error("cannot open feature file " + feature_path);
    std::vector<float> features;
    std::size_t d = 0, n = 0;
    std::string line;
    for (std::size_t lineno = 1; std::getline(ff, line); ++lineno) {
        if (line.empty()) continue;
        std::vector<float> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(field, &pos);
                while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
                if (pos != field.size()) throw std::invalid_argument(field);
                if (!std::isfinite(v)) throw std::invalid_argument(field);
                row.push_back(static_cast<float>(v));
            } catch (const std::exception&) {
                line_error(feature_path, lineno, "malformed feature value '" + field + "'");
            }
        }
        if (row.empty()) line_error(feature_path, lineno, "empty feature row");
        if (d == 0)
            d = row.size();
        else if (row.size() != d)
            line_error(feature_path, lineno, "expected " + std::to_string(d) + " features, got " +
                                                 std::to_string(row.size()));
        features.insert(features.end(), row.begin(), row.end());
        ++n;
    }
    if (n == 0) data_error(feature_path + ": no feature rows");

    std::ifstream lf(label_path);
    if (!lf) data_error("cannot open label file " + label_path);
    std::vector<std::int32_t> labels;
    for (std::size_t lineno = 1; std::getline(lf, line); ++lineno) {
        if (line.empty()) continue;
        try {
            std::size_t pos = 0;
            const long v = std::stol(line, &pos);
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            if (pos != line.size() || v < 0) throw std::invalid_argument(line);
            labels.push_back(static_cast<std::int32_t>(v));
        } catch (const std::exception&) {
            line_error(label_path, lineno, "malformed label '" + line + "'");
        }
    }
    if (labels.size() != n)
        data_error(label_path + ": " + std::to_string(labels.size()) + " labels for " +
                   std::to_string(n) + " nodes");

    std::ifstream ef(edge_path);
    if (!ef) data_error("cannot open edge file " + edge_path);
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    for (std::size_t lineno = 1; std::getline(ef, line); ++lineno) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        long u = -1, v = -1;
        std::string rest;
        if (!(ss >> u >> v) || (ss >> rest))
            line_error(edge_path, lineno, "expected 'u v'");
        if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
            line_error(edge_path, lineno, "node id out of range [0," + std::to_string(n) + ")");
        edges.emplace_back(static_cast<std::int32_t>(u), static_cast<std::int32_t>(v));
    }

    std::size_t dropped_self = 0, dropped_dup = 0;
    Graph g = Graph::build(n, std::move(edges), std::move(features), d, std::move(labels),
                           &dropped_self, &dropped_dup);
    if (report) {
        report->dropped_self_loops = dropped_self;
        report->dropped_duplicates = dropped_dup;
    }
    if (dropped_self + dropped_dup > 0)
        std::fprintf(stderr, "warning: %s: dropped %zu self-loop and %zu duplicate edge lines\n",
                     edge_path.c_str(), dropped_self, dropped_dup);
    return g;
}

void save_graph(const Graph& g, const std::string& feature_path,
                const std::string& edge_path, const std::string& label_path) {
    std::ofstream ff(feature_path);
    if (!ff) data_error("cannot write " + feature_path);
    ff.precision(9);
    for (std::size_t u = 0; u < g.n; ++u) {
        for (std::size_t j = 0; j < g.d; ++j) ff << (j ? "," : "") << g.features[u * g.d + j];
        ff << '\n';
    }
    std::ofstream ef(edge_path);
    if (!ef) data_error("cannot write " + edge_path);
    for (std::size_t u = 0; u < g.n; ++u)
        for (std::size_t e = g.offsets[u]; e < g.offsets[u + 1]; ++e)
            if (static_cast<std::size_t>(g.neighbors[e]) > u)
                ef << u << ' ' << g.neighbors[e] << '\n';
    std::ofstream lf(label_path);
    if (!lf) data_error("cannot write " + label_path);
    for (std::int32_t y : g.labels) lf << y << '\n';
}

} // namespace swapgt
