#include "swapgt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace swapgt {

namespace {

constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

Var make_node(const char* op, Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

void require_matrix(const Var& a, const char* op) {
    if (a->value.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": expected a matrix, got rank " +
                                    std::to_string(a->value.rank()));
}

[[noreturn]] void shape_error(const char* op, const Var& a, const Var& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->value.shape_str() + " vs " + b->value.shape_str());
}

} // namespace

Var make_leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

Var constant(Tensor value) { return make_leaf(std::move(value), false); }

Var matmul(const Var& a, const Var& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t R = a->value.rows(), K = a->value.cols(), C = b->value.cols();
    if (b->value.rows() != K) shape_error("matmul", a, b);
    Tensor out = Tensor::matrix(R, C);
    const double* A = a->value.data();
    const double* B = b->value.data();
    double* O = out.data();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
            const double ark = A[r * K + k];
            if (ark == 0.0) continue;
            const double* brow = B + k * C;
            double* orow = O + r * C;
            for (std::size_t c = 0; c < C; ++c) orow[c] += ark * brow[c];
        }
    return make_node("matmul", std::move(out), {a, b}, [R, K, C](Node& n) {
        const double* G = n.grad.data();
        const Var& a = n.inputs[0];
        const Var& b = n.inputs[1];
        if (a->requires_grad) {
            // dA[r,k] = dot(G row r, B row k): contiguous on both sides
            double* dA = a->grad_buf().data();
            const double* B = b->value.data();
            for (std::size_t r = 0; r < R; ++r) {
                const double* grow = G + r * C;
                double* darow = dA + r * K;
                for (std::size_t k = 0; k < K; ++k) {
                    const double* brow = B + k * C;
                    double acc = 0.0;
                    for (std::size_t c = 0; c < C; ++c) acc += grow[c] * brow[c];
                    darow[k] += acc;
                }
            }
        }
        if (b->requires_grad) {
            double* dB = b->grad_buf().data();
            const double* A = a->value.data();
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t k = 0; k < K; ++k) {
                    const double ark = A[r * K + k];
                    if (ark == 0.0) continue;
                    const double* grow = G + r * C;
                    double* dbrow = dB + k * C;
                    for (std::size_t c = 0; c < C; ++c) dbrow[c] += ark * grow[c];
                }
        }
    });
}

Var add(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) shape_error("add", a, b);
    Tensor out = a->value;
    const double* B = b->value.data();
    double* O = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) O[i] += B[i];
    return make_node("add", std::move(out), {a, b}, [](Node& n) {
        const double* G = n.grad.data();
        for (int which = 0; which < 2; ++which) {
            const Var& in = n.inputs[which];
            if (!in->requires_grad) continue;
            double* D = in->grad_buf().data();
            for (std::size_t i = 0; i < n.grad.size(); ++i) D[i] += G[i];
        }
    });
}

Var add_rowvec(const Var& a, const Var& v) {
    require_matrix(a, "add_rowvec");
    if (v->value.rank() != 1 || v->value.size() != a->value.cols())
        shape_error("add_rowvec", a, v);
    const std::size_t R = a->value.rows(), C = a->value.cols();
    Tensor out = a->value;
    const double* V = v->value.data();
    for (std::size_t r = 0; r < R; ++r) {
        double* orow = out.data() + r * C;
        for (std::size_t c = 0; c < C; ++c) orow[c] += V[c];
    }
    return make_node("add_rowvec", std::move(out), {a, v}, [R, C](Node& n) {
        const double* G = n.grad.data();
        if (n.inputs[0]->requires_grad) {
            double* D = n.inputs[0]->grad_buf().data();
            for (std::size_t i = 0; i < R * C; ++i) D[i] += G[i];
        }
        if (n.inputs[1]->requires_grad) {
            double* D = n.inputs[1]->grad_buf().data();
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) D[c] += G[r * C + c];
        }
    });
}

Var scale(const Var& a, double m) { return affine(a, m, 0.0); }

Var affine(const Var& a, double m, double c) {
    Tensor out = a->value;
    double* O = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) O[i] = m * O[i] + c;
    return make_node("affine", std::move(out), {a}, [m](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        double* D = n.inputs[0]->grad_buf().data();
        const double* G = n.grad.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) D[i] += m * G[i];
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t R = parts[0]->value.rows();
    std::size_t C = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols");
        if (p->value.rows() != R) shape_error("concat_cols", parts[0], p);
        C += p->value.cols();
    }
    Tensor out = Tensor::matrix(R, C);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p->value.cols();
        for (std::size_t r = 0; r < R; ++r)
            std::copy_n(p->value.data() + r * pc, pc, out.data() + r * C + off);
        off += pc;
    }
    return make_node("concat_cols", std::move(out), parts, [R, C](Node& n) {
        const double* G = n.grad.data();
        std::size_t off = 0;
        for (const auto& in : n.inputs) {
            const std::size_t pc = in->value.cols();
            if (in->requires_grad) {
                double* D = in->grad_buf().data();
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < pc; ++c)
                        D[r * pc + c] += G[r * C + off + c];
            }
            off += pc;
        }
    });
}

Var block_mean(const Var& a, std::size_t block, std::size_t start) {
    require_matrix(a, "block_mean");
    const std::size_t R = a->value.rows(), C = a->value.cols();
    if (block == 0 || R % block != 0)
        throw std::invalid_argument("block_mean: rows not divisible by block");
    if (start >= block)
        throw std::invalid_argument("block_mean: empty row range");
    const std::size_t nb = R / block;
    const double inv = 1.0 / static_cast<double>(block - start);
    Tensor out = Tensor::matrix(nb, C);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = start; j < block; ++j) {
            const double* row = a->value.data() + (b * block + j) * C;
            double* orow = out.data() + b * C;
            for (std::size_t c = 0; c < C; ++c) orow[c] += row[c] * inv;
        }
    return make_node("block_mean", std::move(out), {a}, [block, start, nb, C, inv](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        double* D = n.inputs[0]->grad_buf().data();
        const double* G = n.grad.data();
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t j = start; j < block; ++j) {
                double* drow = D + (b * block + j) * C;
                const double* grow = G + b * C;
                for (std::size_t c = 0; c < C; ++c) drow[c] += grow[c] * inv;
            }
    });
}

Var mean_axis0(const Var& a) {
    require_matrix(a, "mean_axis0");
    return block_mean(a, a->value.rows(), 0);
}

Var block_repeat(const Var& a, std::size_t times) {
    require_matrix(a, "block_repeat");
    if (times == 0) throw std::invalid_argument("block_repeat: times == 0");
    const std::size_t R = a->value.rows(), C = a->value.cols();
    Tensor out = Tensor::matrix(R * times, C);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t t = 0; t < times; ++t)
            std::copy_n(a->value.data() + r * C, C, out.data() + (r * times + t) * C);
    return make_node("block_repeat", std::move(out), {a}, [R, C, times](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        double* D = n.inputs[0]->grad_buf().data();
        const double* G = n.grad.data();
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t t = 0; t < times; ++t) {
                const double* grow = G + (r * times + t) * C;
                double* drow = D + r * C;
                for (std::size_t c = 0; c < C; ++c) drow[c] += grow[c];
            }
    });
}

Var gather_rows(const Var& a, std::vector<std::int64_t> idx) {
    require_matrix(a, "gather_rows");
    const std::size_t R = a->value.rows(), C = a->value.cols();
    for (std::int64_t i : idx)
        if (i < 0 || static_cast<std::size_t>(i) >= R)
            throw std::out_of_range("gather_rows: row index out of range");
    Tensor out = Tensor::matrix(idx.size(), C);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(a->value.data() + static_cast<std::size_t>(idx[r]) * C, C,
                    out.data() + r * C);
    return make_node("gather_rows", std::move(out), {a},
                     [idx = std::move(idx), C](Node& n) {
                         if (!n.inputs[0]->requires_grad) return;
                         double* D = n.inputs[0]->grad_buf().data();
                         const double* G = n.grad.data();
                         for (std::size_t r = 0; r < idx.size(); ++r) {
                             double* drow = D + static_cast<std::size_t>(idx[r]) * C;
                             const double* grow = G + r * C;
                             for (std::size_t c = 0; c < C; ++c) drow[c] += grow[c];
                         }
                     });
}

Var row_softmax(const Var& a) {
    require_matrix(a, "row_softmax");
    const std::size_t R = a->value.rows(), C = a->value.cols();
    if (C == 0) throw std::invalid_argument("row_softmax: empty rows");
    Tensor out = Tensor::matrix(R, C);
    for (std::size_t r = 0; r < R; ++r) {
        const double* x = a->value.data() + r * C;
        double* p = out.data() + r * C;
        double m = x[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, x[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            p[c] = std::exp(x[c] - m);
            z += p[c];
        }
        const double invz = 1.0 / z;
        for (std::size_t c = 0; c < C; ++c) p[c] *= invz;
    }
    return make_node("row_softmax", std::move(out), {a}, [R, C](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        double* D = n.inputs[0]->grad_buf().data();
        const double* G = n.grad.data();
        const double* P = n.value.data();
        for (std::size_t r = 0; r < R; ++r) {
            const double* g = G + r * C;
            const double* p = P + r * C;
            double dot = 0.0;
            for (std::size_t c = 0; c < C; ++c) dot += g[c] * p[c];
            double* d = D + r * C;
            for (std::size_t c = 0; c < C; ++c) d[c] += p[c] * (g[c] - dot);
        }
    });
}

Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps) {
    require_matrix(a, "layer_norm");
    const std::size_t R = a->value.rows(), C = a->value.cols();
    if (gamma->value.rank() != 1 || gamma->value.size() != C) shape_error("layer_norm", a, gamma);
    if (beta->value.rank() != 1 || beta->value.size() != C) shape_error("layer_norm", a, beta);
    Tensor out = Tensor::matrix(R, C);
    // xhat and inv_std are needed by the backward pass
    auto xhat = std::make_shared<Tensor>(Tensor::matrix(R, C));
    auto inv_std = std::make_shared<std::vector<double>>(R);
    const double* gm = gamma->value.data();
    const double* bt = beta->value.data();
    for (std::size_t r = 0; r < R; ++r) {
        const double* x = a->value.data() + r * C;
        double mu = 0.0;
        for (std::size_t c = 0; c < C; ++c) mu += x[c];
        mu /= static_cast<double>(C);
        double var = 0.0;
        for (std::size_t c = 0; c < C; ++c) var += (x[c] - mu) * (x[c] - mu);
        var /= static_cast<double>(C);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        double* xh = xhat->data() + r * C;
        double* o = out.data() + r * C;
        for (std::size_t c = 0; c < C; ++c) {
            xh[c] = (x[c] - mu) * is;
            o[c] = gm[c] * xh[c] + bt[c];
        }
    }
    return make_node("layer_norm", std::move(out), {a, gamma, beta},
                     [R, C, xhat, inv_std](Node& n) {
                         const double* G = n.grad.data();
                         const double* XH = xhat->data();
                         const Var& a = n.inputs[0];
                         const Var& gamma = n.inputs[1];
                         const Var& beta = n.inputs[2];
                         if (gamma->requires_grad) {
                             double* dg = gamma->grad_buf().data();
                             for (std::size_t r = 0; r < R; ++r)
                                 for (std::size_t c = 0; c < C; ++c)
                                     dg[c] += G[r * C + c] * XH[r * C + c];
                         }
                         if (beta->requires_grad) {
                             double* db = beta->grad_buf().data();
                             for (std::size_t r = 0; r < R; ++r)
                                 for (std::size_t c = 0; c < C; ++c) db[c] += G[r * C + c];
                         }
                         if (a->requires_grad) {
                             double* D = a->grad_buf().data();
                             const double* gm = gamma->value.data();
                             for (std::size_t r = 0; r < R; ++r) {
                                 const double* g = G + r * C;
                                 const double* xh = XH + r * C;
                                 double mean_gh = 0.0, mean_ghx = 0.0;
                                 for (std::size_t c = 0; c < C; ++c) {
                                     const double gh = g[c] * gm[c];
                                     mean_gh += gh;
                                     mean_ghx += gh * xh[c];
                                 }
                                 mean_gh /= static_cast<double>(C);
                                 mean_ghx /= static_cast<double>(C);
                                 const double is = (*inv_std)[r];
                                 double* d = D + r * C;
                                 for (std::size_t c = 0; c < C; ++c) {
                                     const double gh = g[c] * gm[c];
                                     d[c] += is * (gh - mean_gh - xh[c] * mean_ghx);
                                 }
                             }
                         }
                     });
}

Var gelu(const Var& a) {
    Tensor out = a->value;
    double* O = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = O[i];
        const double u = kGeluC * (x + kGeluA * x * x * x);
        O[i] = 0.5 * x * (1.0 + std::tanh(u));
    }
    return make_node("gelu", std::move(out), {a}, [](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        double* D = n.inputs[0]->grad_buf().data();
        const double* G = n.grad.data();
        const double* X = n.inputs[0]->value.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double x = X[i];
            const double u = kGeluC * (x + kGeluA * x * x * x);
            const double th = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
            D[i] += G[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
        }
    });
}

Var dropout(const Var& a, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return a;
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(a->value.size());
    Tensor out = a->value;
    double* O = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = uniform01(rng) < rate ? 0.0 : keep_scale;
        (*mask)[i] = m;
        O[i] *= m;
    }
    return make_node("dropout", std::move(out), {a}, [mask](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        double* D = n.inputs[0]->grad_buf().data();
        const double* G = n.grad.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) D[i] += G[i] * (*mask)[i];
    });
}

Var seq_scores(const Var& q, const Var& k, std::size_t seqlen) {
    require_matrix(q, "seq_scores");
    require_matrix(k, "seq_scores");
    if (!q->value.same_shape(k->value)) shape_error("seq_scores", q, k);
    const std::size_t R = q->value.rows(), D = q->value.cols();
    if (seqlen == 0 || R % seqlen != 0)
        throw std::invalid_argument("seq_scores: rows not divisible by seqlen");
    const std::size_t B = R / seqlen;
    const double sc = 1.0 / std::sqrt(static_cast<double>(D));
    Tensor out = Tensor::matrix(R, seqlen);
    for (std::size_t b = 0; b < B; ++b) {
        const double* Q = q->value.data() + b * seqlen * D;
        const double* K = k->value.data() + b * seqlen * D;
        double* O = out.data() + b * seqlen * seqlen;
        for (std::size_t i = 0; i < seqlen; ++i)
            for (std::size_t j = 0; j < seqlen; ++j) {
                double dot = 0.0;
                for (std::size_t d = 0; d < D; ++d) dot += Q[i * D + d] * K[j * D + d];
                O[i * seqlen + j] = dot * sc;
            }
    }
    return make_node("seq_scores", std::move(out), {q, k}, [B, seqlen, D, sc](Node& n) {
        const double* G = n.grad.data();
        const Var& q = n.inputs[0];
        const Var& k = n.inputs[1];
        const double* Q = q->value.data();
        const double* K = k->value.data();
        double* dQ = q->requires_grad ? q->grad_buf().data() : nullptr;
        double* dK = k->requires_grad ? k->grad_buf().data() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
            const double* g = G + b * seqlen * seqlen;
            const std::size_t base = b * seqlen * D;
            for (std::size_t i = 0; i < seqlen; ++i)
                for (std::size_t j = 0; j < seqlen; ++j) {
                    const double gs = g[i * seqlen + j] * sc;
                    if (gs == 0.0) continue;
                    if (dQ)
                        for (std::size_t d = 0; d < D; ++d)
                            dQ[base + i * D + d] += gs * K[base + j * D + d];
                    if (dK)
                        for (std::size_t d = 0; d < D; ++d)
                            dK[base + j * D + d] += gs * Q[base + i * D + d];
                }
        }
    });
}

Var seq_mix(const Var& p, const Var& v, std::size_t seqlen) {
    require_matrix(p, "seq_mix");
    require_matrix(v, "seq_mix");
    const std::size_t R = p->value.rows(), D = v->value.cols();
    if (p->value.cols() != seqlen || v->value.rows() != R || seqlen == 0 || R % seqlen != 0)
        shape_error("seq_mix", p, v);
    const std::size_t B = R / seqlen;
    Tensor out = Tensor::matrix(R, D);
    for (std::size_t b = 0; b < B; ++b) {
        const double* P = p->value.data() + b * seqlen * seqlen;
        const double* V = v->value.data() + b * seqlen * D;
        double* O = out.data() + b * seqlen * D;
        for (std::size_t i = 0; i < seqlen; ++i)
            for (std::size_t j = 0; j < seqlen; ++j) {
                const double pij = P[i * seqlen + j];
                if (pij == 0.0) continue;
                for (std::size_t d = 0; d < D; ++d) O[i * D + d] += pij * V[j * D + d];
            }
    }
    return make_node("seq_mix", std::move(out), {p, v}, [B, seqlen, D](Node& n) {
        const double* G = n.grad.data();
        const Var& p = n.inputs[0];
        const Var& v = n.inputs[1];
        const double* P = p->value.data();
        const double* V = v->value.data();
        double* dP = p->requires_grad ? p->grad_buf().data() : nullptr;
        double* dV = v->requires_grad ? v->grad_buf().data() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
            const double* g = G + b * seqlen * D;
            const std::size_t pbase = b * seqlen * seqlen;
            const std::size_t vbase = b * seqlen * D;
            for (std::size_t i = 0; i < seqlen; ++i)
                for (std::size_t j = 0; j < seqlen; ++j) {
                    if (dP) {
                        double dot = 0.0;
                        for (std::size_t d = 0; d < D; ++d)
                            dot += g[i * D + d] * V[vbase + j * D + d];
                        dP[pbase + i * seqlen + j] += dot;
                    }
                    if (dV) {
                        const double pij = P[pbase + i * seqlen + j];
                        if (pij == 0.0) continue;
                        for (std::size_t d = 0; d < D; ++d)
                            dV[vbase + j * D + d] += pij * g[i * D + d];
                    }
                }
        }
    });
}

Var rowwise_cosine(const Var& a, const Var& b) {
    require_matrix(a, "rowwise_cosine");
    require_matrix(b, "rowwise_cosine");
    if (!a->value.same_shape(b->value)) shape_error("rowwise_cosine", a, b);
    const std::size_t R = a->value.rows(), C = a->value.cols();
    Tensor out = Tensor::matrix(R, 1);
    for (std::size_t r = 0; r < R; ++r) {
        const double* x = a->value.data() + r * C;
        const double* y = b->value.data() + r * C;
        double dot = 0.0, nx = 0.0, ny = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            dot += x[c] * y[c];
            nx += x[c] * x[c];
            ny += y[c] * y[c];
        }
        out[r] = (nx == 0.0 || ny == 0.0) ? 0.0 : dot / (std::sqrt(nx) * std::sqrt(ny));
    }
    return make_node("rowwise_cosine", std::move(out), {a, b}, [R, C](Node& n) {
        const double* G = n.grad.data();
        const Var& a = n.inputs[0];
        const Var& b = n.inputs[1];
        double* dA = a->requires_grad ? a->grad_buf().data() : nullptr;
        double* dB = b->requires_grad ? b->grad_buf().data() : nullptr;
        for (std::size_t r = 0; r < R; ++r) {
            const double g = G[r];
            if (g == 0.0) continue;
            const double* x = a->value.data() + r * C;
            const double* y = b->value.data() + r * C;
            double dot = 0.0, nx2 = 0.0, ny2 = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                dot += x[c] * y[c];
                nx2 += x[c] * x[c];
                ny2 += y[c] * y[c];
            }
            if (nx2 == 0.0 || ny2 == 0.0) continue; // cosine pinned to 0, zero subgradient
            const double nx = std::sqrt(nx2), ny = std::sqrt(ny2);
            const double inv = 1.0 / (nx * ny);
            const double cosv = dot * inv;
            if (dA)
                for (std::size_t c = 0; c < C; ++c)
                    dA[r * C + c] += g * (y[c] * inv - cosv * x[c] / nx2);
            if (dB)
                for (std::size_t c = 0; c < C; ++c)
                    dB[r * C + c] += g * (x[c] * inv - cosv * y[c] / ny2);
        }
    });
}

Var mean_all(const Var& a) {
    const std::size_t N = a->value.size();
    if (N == 0) throw std::invalid_argument("mean_all: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a->value[i];
    Tensor out = Tensor::scalar(s / static_cast<double>(N));
    return make_node("mean_all", std::move(out), {a}, [N](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        double* D = n.inputs[0]->grad_buf().data();
        const double g = n.grad[0] / static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i) D[i] += g;
    });
}

Var softmax_cross_entropy(const Var& logits, std::vector<std::int32_t> labels,
                          std::vector<std::uint8_t> mask) {
    require_matrix(logits, "softmax_cross_entropy");
    const std::size_t R = logits->value.rows(), C = logits->value.cols();
    if (labels.size() != R || mask.size() != R)
        throw std::invalid_argument("softmax_cross_entropy: labels/mask length mismatch");
    std::size_t m = 0;
    for (std::size_t r = 0; r < R; ++r) {
        if (!mask[r]) continue;
        ++m;
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= C)
            throw std::out_of_range("softmax_cross_entropy: label out of range");
    }
    if (m == 0) throw std::invalid_argument("softmax_cross_entropy: empty mask");
    const double invm = 1.0 / static_cast<double>(m);
    double loss = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        if (!mask[r]) continue;
        const double* x = logits->value.data() + r * C;
        double mx = x[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, x[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(x[c] - mx);
        loss += (std::log(z) + mx) - x[labels[r]];
    }
    Tensor out = Tensor::scalar(loss * invm);
    return make_node("softmax_cross_entropy", std::move(out), {logits},
                     [R, C, invm, labels = std::move(labels), mask = std::move(mask)](Node& n) {
                         if (!n.inputs[0]->requires_grad) return;
                         const double g = n.grad[0] * invm;
                         double* D = n.inputs[0]->grad_buf().data();
                         const double* X = n.inputs[0]->value.data();
                         for (std::size_t r = 0; r < R; ++r) {
                             if (!mask[r]) continue;
                             const double* x = X + r * C;
                             double mx = x[0];
                             for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, x[c]);
                             double z = 0.0;
                             for (std::size_t c = 0; c < C; ++c) z += std::exp(x[c] - mx);
                             const double invz = 1.0 / z;
                             for (std::size_t c = 0; c < C; ++c) {
                                 double p = std::exp(x[c] - mx) * invz;
                                 if (static_cast<std::int32_t>(c) == labels[r]) p -= 1.0;
                                 D[r * C + c] += g * p;
                             }
                         }
                     });
}

void backward(const Var& loss) {
    if (loss->value.size() != 1)
        throw std::invalid_argument("backward: loss must be a scalar");
    // iterative post-order DFS
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next].get();
            ++next;
            if (child->requires_grad && seen.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    loss->grad_buf()[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

// ---- ParamStore ------------------------------------------------------------

Var ParamStore::create(const std::string& name, Tensor init) {
    if (by_name_.count(name))
        throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    if (!init.all_finite())
        throw std::invalid_argument("ParamStore: non-finite init for " + name);
    Var v = make_leaf(std::move(init), true);
    order_.push_back(name);
    by_name_.emplace(name, v);
    return v;
}

const Var& ParamStore::at(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
        throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
}

bool ParamStore::has(const std::string& name) const { return by_name_.count(name) != 0; }

void ParamStore::zero_grad() {
    for (const auto& name : order_) {
        Tensor& g = by_name_[name]->grad;
        if (!g.empty()) g.fill(0.0);
    }
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += by_name_.at(name)->value.size();
    return n;
}

bool ParamStore::all_finite() const {
    for (const auto& name : order_)
        if (!by_name_.at(name)->value.all_finite()) return false;
    return true;
}

std::vector<Tensor> ParamStore::snapshot_values() const {
    std::vector<Tensor> out;
    out.reserve(order_.size());
    for (const auto& name : order_) out.push_back(by_name_.at(name)->value);
    return out;
}

void ParamStore::restore_values(const std::vector<Tensor>& values) {
    if (values.size() != order_.size())
        throw std::invalid_argument("ParamStore: snapshot size mismatch");
    for (std::size_t i = 0; i < order_.size(); ++i) {
        Var& p = by_name_[order_[i]];
        if (!p->value.same_shape(values[i]))
            throw std::invalid_argument("ParamStore: snapshot shape mismatch");
        p->value = values[i];
    }
}

// ---- gradient checker ------------------------------------------------------

double grad_check(const std::function<Var()>& loss_fn, ParamStore& params, double eps) {
    if (eps < 1e-7 || eps > 1e-3)
        throw std::invalid_argument("grad_check: eps must be in [1e-7, 1e-3]");
    params.zero_grad();
    Var loss = loss_fn();
    if (!loss->value.all_finite())
        throw std::runtime_error("grad_check: non-finite loss at probe point");
    backward(loss);

    std::vector<Tensor> analytic;
    for (const auto& name : params.names()) {
        const Var& p = params.at(name);
        analytic.push_back(p->grad.empty() ? Tensor(p->value.shape()) : p->grad);
    }

    double max_rel = 0.0;
    std::size_t pi = 0;
    for (const auto& name : params.names()) {
        Var p = params.at(name);
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + eps;
            const double fp = loss_fn()->value[0];
            p->value[i] = orig - eps;
            const double fm = loss_fn()->value[0];
            p->value[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw std::runtime_error("grad_check: non-finite loss at probe point");
            const double num = (fp - fm) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - num) /
                               std::max({std::abs(a), std::abs(num), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
        ++pi;
    }
    return max_rel;
}

} // namespace swapgt
