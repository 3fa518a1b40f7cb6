#pragma once

#include "swapgt/rng.hpp"
#include "swapgt/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace swapgt {

struct Node;
using Var = std::shared_ptr<Node>;

/// One vertex of the backward tape.
///
/// `backprop`, when set, pulls this node's accumulated gradient into the
/// gradients of its inputs. Built once per forward pass; a pass owns its
/// intermediates, so independent passes can run concurrently as long as they
/// do not share mutable leaves.
struct Node {
    Tensor value;
    Tensor grad; // allocated on demand, same shape as value
    bool requires_grad = false;
    std::vector<Var> inputs;
    std::function<void(Node&)> backprop;
    const char* op = "leaf";

    Tensor& grad_buf() {
        if (grad.empty()) grad = Tensor(value.shape());
        return grad;
    }
};

Var make_leaf(Tensor value, bool requires_grad);
Var constant(Tensor value);

// ---- differentiable primitives ------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var add_rowvec(const Var& a, const Var& v);
Var scale(const Var& a, double m);
/// Elementwise m*a + c.
Var affine(const Var& a, double m, double c);
Var concat_cols(const std::vector<Var>& parts);
Var mean_axis0(const Var& a);
/// Rows come in consecutive blocks of `block`; per block, mean of rows
/// [start, block). Output has one row per block.
Var block_mean(const Var& a, std::size_t block, std::size_t start);
/// Each row repeated `times` times consecutively.
Var block_repeat(const Var& a, std::size_t times);
Var gather_rows(const Var& a, std::vector<std::int64_t> idx);
Var row_softmax(const Var& a);
Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
Var gelu(const Var& a);
/// Inverted dropout; identity when !training or rate == 0. Mask is drawn at
/// build time from `rng`, so a frozen stream gives a frozen mask.
Var dropout(const Var& a, double rate, Rng& rng, bool training);
/// Per-sequence scaled attention scores: rows of q and k come in blocks of
/// `seqlen`; per block S = Q K^T / sqrt(cols). Output (B*seqlen) x seqlen.
Var seq_scores(const Var& q, const Var& k, std::size_t seqlen);
/// Per-sequence mixing: per block O = P V with P (seqlen x seqlen) rows and
/// V (seqlen x dv) rows.
Var seq_mix(const Var& p, const Var& v, std::size_t seqlen);
/// Cosine of matching rows of a and b; zero-norm rows give cosine 0 with a
/// zero (sub)gradient. Output R x 1.
Var rowwise_cosine(const Var& a, const Var& b);
Var mean_all(const Var& a);
/// Mean over masked rows of -log softmax(logits)[label]. Log-sum-exp based.
Var softmax_cross_entropy(const Var& logits, std::vector<std::int32_t> labels,
                          std::vector<std::uint8_t> mask);

/// Reverse pass from a scalar node. Gradients accumulate into every
/// requires_grad node reachable from `loss`.
void backward(const Var& loss);

// ---- parameters ----------------------------------------------------------

/// Named parameter tensors with their gradient accumulators. Iteration order
/// is insertion order, which makes optimizer sweeps and serialization
/// deterministic.
class ParamStore {
public:
    Var create(const std::string& name, Tensor init);
    const Var& at(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    void zero_grad();
    std::size_t total_size() const;
    bool all_finite() const;

    /// Deep copy of current values (snapshots for early stopping).
    std::vector<Tensor> snapshot_values() const;
    void restore_values(const std::vector<Tensor>& values);

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Var> by_name_;
};

/// Central-difference gradient check. `loss_fn` rebuilds the forward graph
/// from the current parameter values and returns a scalar node. Returns the
/// maximum relative error max(|a-n| / max(|a|,|n|,1e-8)) over all parameter
/// coordinates.
double grad_check(const std::function<Var()>& loss_fn, ParamStore& params, double eps);

} // namespace swapgt
