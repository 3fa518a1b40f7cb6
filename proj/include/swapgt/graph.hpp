#pragma once

#include "swapgt/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace swapgt {

/// Undirected attributed graph in CSR form.
///
/// Each undirected edge is stored in both endpoint rows; `edge_count` counts
/// it once. Self-loops are never stored (normalization injects its own), and
/// features are float32 bulk storage, widened to 64-bit wherever arithmetic
/// correctness matters. Immutable after construction.
struct Graph {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t c = 0;
    std::vector<std::size_t> offsets;     // n+1
    std::vector<std::int32_t> neighbors;  // sorted per row
    std::vector<float> features;          // n*d row-major
    std::vector<std::int32_t> labels;     // n, values in [0, c)

    std::size_t edge_count() const { return neighbors.size() / 2; }
    std::size_t degree(std::size_t u) const { return offsets[u + 1] - offsets[u]; }
    const std::int32_t* row_begin(std::size_t u) const { return neighbors.data() + offsets[u]; }
    const std::int32_t* row_end(std::size_t u) const { return neighbors.data() + offsets[u + 1]; }

    /// Feature row widened to doubles.
    std::vector<double> feature_row(std::size_t u) const;

    /// Validates every structural invariant; throws on violation.
    void check_invariants() const;

    /// From an undirected edge list. Duplicates and self-loops are dropped;
    /// the counts of dropped lines are reported through the optional outs.
    static Graph build(std::size_t n, std::vector<std::pair<std::int32_t, std::int32_t>> edges,
                       std::vector<float> features, std::size_t d,
                       std::vector<std::int32_t> labels,
                       std::size_t* dropped_self = nullptr,
                       std::size_t* dropped_dup = nullptr);
};

/// Symmetric normalized adjacency with self-loops, CSR.
/// Entry (i,j) = ((deg_i+1)(deg_j+1))^(-1/2) on the pattern of A+I.
struct NormalizedAdjacency {
    std::size_t n = 0;
    std::vector<std::size_t> offsets;
    std::vector<std::int32_t> cols;
    std::vector<double> values;
};

NormalizedAdjacency normalized_adjacency(const Graph& g);

/// Fraction of undirected edges joining same-label endpoints.
/// Defined as 1.0 on an empty edge set.
double edge_homophily(const Graph& g);

enum class SplitKind { dense, sparse };
enum class Role : std::uint8_t { train = 0, validation = 1, test = 2 };

struct SplitAssignment {
    std::vector<Role> roles;
    SplitKind kind = SplitKind::dense;
    std::uint64_t seed = 0;

    std::vector<std::uint8_t> mask(Role r) const;
    std::size_t count(Role r) const;
};

/// Per-class stratified split. Dense: 50% train / 25% val / rest test.
/// Sparse: 2.5% / 2.5% / 95%. Train and val counts are floored with a
/// minimum of 1 node each per class. Deterministic given seed.
SplitAssignment make_split(const Graph& g, SplitKind kind, std::uint64_t seed);

/// Stochastic block model used as the synthetic data generator.
struct SbmSpec {
    std::vector<std::size_t> block_sizes;
    double intra_prob = 0.1;
    double inter_prob = 0.01;
    std::size_t feature_dim = 8;
    double mean_separation = 2.0; // distance scale between class means
    double noise = 1.0;           // per-dimension Gaussian sigma

    std::size_t blocks() const { return block_sizes.size(); }
    std::size_t total_nodes() const;
    void validate() const;
};

/// Block labels become class labels; features are the class mean plus
/// N(0, noise^2) per dimension. Deterministic given seed.
Graph generate_sbm(const SbmSpec& spec, std::uint64_t seed);

// ---- file I/O --------------------------------------------------------------

struct LoadReport {
    std::size_t dropped_self_loops = 0;
    std::size_t dropped_duplicates = 0;
};

/// Feature file: CSV of d reals per line, line index = node id.
/// Edge file: whitespace "u v" pairs, 0-based, undirected.
/// Label file: one integer per line.
/// Malformed input reports the offending file and line number.
Graph load_graph(const std::string& feature_path, const std::string& edge_path,
                 const std::string& label_path, LoadReport* report = nullptr);

/// Writes the three files back out; load_graph round-trips to an equal graph.
void save_graph(const Graph& g, const std::string& feature_path,
                const std::string& edge_path, const std::string& label_path);

} // namespace swapgt
