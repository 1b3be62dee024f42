#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "graphssl/errors.hpp"
#include "graphssl/tensor.hpp"

namespace graphssl {

enum class OpKind {
    Leaf,
    Constant,
    MatMul,
    MatMulNT,
    Transpose,
    Add,
    Sub,
    Mul,
    Neg,
    Scale,
    AddScalar,
    AddRowVec,
    Relu,
    Softplus,
    Exp,
    Log,
    PowConst,
    SumAll,
    MeanAll,
    SelectMask,
    RowLogSumExp,
    SpMM,
    SegmentSum,
    SegmentMean,
    ConcatCols,
    ReplaceRows,
    GatherRows,
    L2NormalizeRows,
    RowsDot,
    SoftmaxCrossEntropy,
    CosineSimilarity,
};

struct TapeNode;
using Value = std::shared_ptr<TapeNode>;

// One node of the reverse-mode tape: the op that produced it, its parents,
// the cached forward output and (during backward) the accumulated adjoint.
// A tape is confined to a single thread for its lifetime.
struct TapeNode {
    OpKind kind;
    std::vector<Value> inputs;
    Tensor out;
    Tensor adjoint;  // allocated lazily by backward(); always out-shaped
    bool requires_grad = false;
    bool grad_seen = false;
    // Pushes this node's adjoint into its inputs' adjoints. Captures any
    // op-specific constant payload (masks, indices, sparse structure).
    std::function<void(TapeNode&)> backprop;
};

inline Value make_node(OpKind kind, std::vector<Value> inputs, Tensor out,
                       std::function<void(TapeNode&)> backprop) {
    out.check_finite("op output");
    auto node = std::make_shared<TapeNode>();
    node->kind = kind;
    node->inputs = std::move(inputs);
    node->out = std::move(out);
    node->backprop = std::move(backprop);
    for (const auto& in : node->inputs) {
        if (in->requires_grad) node->requires_grad = true;
    }
    return node;
}

inline Value constant(Tensor t) {
    t.check_finite("constant");
    auto node = std::make_shared<TapeNode>();
    node->kind = OpKind::Constant;
    node->out = std::move(t);
    node->requires_grad = false;
    return node;
}

inline Value parameter(Tensor t) {
    t.check_finite("parameter");
    auto node = std::make_shared<TapeNode>();
    node->kind = OpKind::Leaf;
    node->out = std::move(t);
    node->requires_grad = true;
    return node;
}

namespace detail {

inline void accumulate(TapeNode& target, const Tensor& delta) {
    if (!target.requires_grad) return;
    if (target.adjoint.empty()) target.adjoint = Tensor::zeros(target.out.shape());
    for (std::size_t i = 0; i < delta.size(); ++i) target.adjoint[i] += delta[i];
}

inline const Tensor& adj(TapeNode& n) { return n.adjoint; }

inline void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + t.shape_str());
}

inline double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double stable_softplus(double z) {
    // max(z,0) + log(1+e^{-|z|}): never overflows for large |z|.
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix ops

inline Value matmul(const Value& a, const Value& b) {
    detail::require_rank2(a->out, "matmul");
    detail::require_rank2(b->out, "matmul");
    const std::size_t m = a->out.rows(), k = a->out.cols(), k2 = b->out.rows(), n = b->out.cols();
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions disagree, " + a->out.shape_str() + " x " +
                             b->out.shape_str());
    }
    Tensor out = Tensor::zeros({m, n});
    {
        const double* A = a->out.data();
        const double* B = b->out.data();
        double* C = out.data();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                if (aip == 0.0) continue;
                const double* Bp = B + p * n;
                double* Ci = C + i * n;
                for (std::size_t j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
            }
        }
    }
    return make_node(OpKind::MatMul, {a, b}, std::move(out), [m, k, n](TapeNode& node) {
        const Tensor& g = node.adjoint;
        TapeNode& A = *node.inputs[0];
        TapeNode& B = *node.inputs[1];
        if (A.requires_grad) {
            Tensor da = Tensor::zeros({m, k});
            // dA = g * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) da[i * k + p] += gij * B.out[p * n + j];
                }
            detail::accumulate(A, da);
        }
        if (B.requires_grad) {
            Tensor db = Tensor::zeros({k, n});
            // dB = A^T * g
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = A.out[i * k + p];
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * g[i * n + j];
                }
            detail::accumulate(B, db);
        }
    });
}

// a * b^T for row-major embeddings; avoids materializing transposes.
inline Value matmul_nt(const Value& a, const Value& b) {
    detail::require_rank2(a->out, "matmul_nt");
    detail::require_rank2(b->out, "matmul_nt");
    const std::size_t m = a->out.rows(), k = a->out.cols(), n = b->out.rows();
    if (k != b->out.cols()) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " + a->out.shape_str() + " x " +
                             b->out.shape_str() + "^T");
    }
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a->out[i * k + p] * b->out[j * k + p];
            out[i * n + j] = s;
        }
    return make_node(OpKind::MatMulNT, {a, b}, std::move(out), [m, k, n](TapeNode& node) {
        const Tensor& g = node.adjoint;
        TapeNode& A = *node.inputs[0];
        TapeNode& B = *node.inputs[1];
        if (A.requires_grad) {
            Tensor da = Tensor::zeros({m, k});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) da[i * k + p] += gij * B.out[j * k + p];
                }
            detail::accumulate(A, da);
        }
        if (B.requires_grad) {
            Tensor db = Tensor::zeros({n, k});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) db[j * k + p] += gij * A.out[i * k + p];
                }
            detail::accumulate(B, db);
        }
    });
}

inline Value transpose(const Value& a) {
    detail::require_rank2(a->out, "transpose");
    const std::size_t m = a->out.rows(), n = a->out.cols();
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a->out[i * n + j];
    return make_node(OpKind::Transpose, {a}, std::move(out), [m, n](TapeNode& node) {
        Tensor da = Tensor::zeros({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) da[i * n + j] = node.adjoint[j * m + i];
        detail::accumulate(*node.inputs[0], da);
    });
}

// out = S * h, S a constant sparse operator.
inline Value spmm(const SparseMatrix& s, const Value& h) {
    detail::require_rank2(h->out, "spmm");
    if (h->out.rows() != s.n) {
        throw DimensionError("spmm: operator size " + std::to_string(s.n) + " vs input " +
                             h->out.shape_str());
    }
    const std::size_t d = h->out.cols();
    Tensor out = Tensor::zeros({s.n, d});
    for (std::size_t k = 0; k < s.val.size(); ++k) {
        const double v = s.val[k];
        const double* src = h->out.data() + s.col[k] * d;
        double* dst = out.data() + s.row[k] * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += v * src[j];
    }
    // Backward applies S^T.
    return make_node(OpKind::SpMM, {h}, std::move(out), [s, d](TapeNode& node) {
        TapeNode& H = *node.inputs[0];
        if (!H.requires_grad) return;
        Tensor dh = Tensor::zeros(H.out.shape());
        for (std::size_t k = 0; k < s.val.size(); ++k) {
            const double v = s.val[k];
            const double* src = node.adjoint.data() + s.row[k] * d;
            double* dst = dh.data() + s.col[k] * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += v * src[j];
        }
        detail::accumulate(H, dh);
    });
}

// ---------------------------------------------------------------------------
// Elementwise ops

namespace detail {

inline void require_same_shape(const Value& a, const Value& b, const char* op) {
    if (!a->out.same_shape(b->out)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a->out.shape_str() + " vs " +
                             b->out.shape_str());
    }
}

}  // namespace detail

inline Value add(const Value& a, const Value& b) {
    detail::require_same_shape(a, b, "add");
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->out[i];
    return make_node(OpKind::Add, {a, b}, std::move(out), [](TapeNode& node) {
        detail::accumulate(*node.inputs[0], node.adjoint);
        detail::accumulate(*node.inputs[1], node.adjoint);
    });
}

inline Value sub(const Value& a, const Value& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->out[i];
    return make_node(OpKind::Sub, {a, b}, std::move(out), [](TapeNode& node) {
        detail::accumulate(*node.inputs[0], node.adjoint);
        TapeNode& B = *node.inputs[1];
        if (B.requires_grad) {
            Tensor db = node.adjoint;
            for (std::size_t i = 0; i < db.size(); ++i) db[i] = -db[i];
            detail::accumulate(B, db);
        }
    });
}

inline Value mul(const Value& a, const Value& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->out[i];
    return make_node(OpKind::Mul, {a, b}, std::move(out), [](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        TapeNode& B = *node.inputs[1];
        if (A.requires_grad) {
            Tensor da = node.adjoint;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= B.out[i];
            detail::accumulate(A, da);
        }
        if (B.requires_grad) {
            Tensor db = node.adjoint;
            for (std::size_t i = 0; i < db.size(); ++i) db[i] *= A.out[i];
            detail::accumulate(B, db);
        }
    });
}

inline Value neg(const Value& a) {
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -out[i];
    return make_node(OpKind::Neg, {a}, std::move(out), [](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = node.adjoint;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] = -da[i];
        detail::accumulate(A, da);
    });
}

inline Value scale(const Value& a, double c) {
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return make_node(OpKind::Scale, {a}, std::move(out), [c](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = node.adjoint;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= c;
        detail::accumulate(A, da);
    });
}

inline Value add_scalar(const Value& a, double c) {
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
    return make_node(OpKind::AddScalar, {a}, std::move(out), [](TapeNode& node) {
        detail::accumulate(*node.inputs[0], node.adjoint);
    });
}

// m[i,:] + v for every row i.
inline Value add_rowvec(const Value& m, const Value& v) {
    detail::require_rank2(m->out, "add_rowvec");
    if (v->out.rank() != 1 || v->out.size() != m->out.cols()) {
        throw DimensionError("add_rowvec: " + m->out.shape_str() + " vs " + v->out.shape_str());
    }
    const std::size_t r = m->out.rows(), c = m->out.cols();
    Tensor out = m->out;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += v->out[j];
    return make_node(OpKind::AddRowVec, {m, v}, std::move(out), [r, c](TapeNode& node) {
        detail::accumulate(*node.inputs[0], node.adjoint);
        TapeNode& V = *node.inputs[1];
        if (V.requires_grad) {
            Tensor dv = Tensor::zeros({c});
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) dv[j] += node.adjoint[i * c + j];
            detail::accumulate(V, dv);
        }
    });
}

inline Value relu(const Value& a) {
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
    return make_node(OpKind::Relu, {a}, std::move(out), [](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = node.adjoint;
        for (std::size_t i = 0; i < da.size(); ++i) {
            if (A.out[i] <= 0.0) da[i] = 0.0;
        }
        detail::accumulate(A, da);
    });
}

// log(1 + e^z) via the overflow-safe form; gradient is the logistic sigmoid.
inline Value softplus(const Value& a) {
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::stable_softplus(out[i]);
    return make_node(OpKind::Softplus, {a}, std::move(out), [](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = node.adjoint;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= detail::stable_sigmoid(A.out[i]);
        detail::accumulate(A, da);
    });
}

inline Value vexp(const Value& a) {
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    return make_node(OpKind::Exp, {a}, std::move(out), [](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = node.adjoint;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= node.out[i];
        detail::accumulate(A, da);
    });
}

inline Value vlog(const Value& a) {
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] <= 0.0) throw NumericError("log of non-positive value");
        out[i] = std::log(out[i]);
    }
    return make_node(OpKind::Log, {a}, std::move(out), [](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = node.adjoint;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] /= A.out[i];
        detail::accumulate(A, da);
    });
}

// x^p elementwise for constant p >= 1; inputs must be non-negative.
inline Value pow_const(const Value& a, double p) {
    if (p < 1.0) throw ContractError("pow_const: exponent must be >= 1");
    Tensor out = a->out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0.0) throw NumericError("pow_const of negative value");
        out[i] = std::pow(out[i], p);
    }
    return make_node(OpKind::PowConst, {a}, std::move(out), [p](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = node.adjoint;
        for (std::size_t i = 0; i < da.size(); ++i) {
            da[i] *= p == 1.0 ? 1.0 : p * std::pow(A.out[i], p - 1.0);
        }
        detail::accumulate(A, da);
    });
}

// ---------------------------------------------------------------------------
// Reductions and selections

inline Value sum_all(const Value& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a->out.size(); ++i) s += a->out[i];
    return make_node(OpKind::SumAll, {a}, Tensor::scalar(s), [](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        detail::accumulate(A, Tensor::full(A.out.shape(), node.adjoint[0]));
    });
}

inline Value mean_all(const Value& a) {
    if (a->out.size() == 0) throw ContractError("mean_all on empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < a->out.size(); ++i) s += a->out[i];
    const double inv = 1.0 / static_cast<double>(a->out.size());
    return make_node(OpKind::MeanAll, {a}, Tensor::scalar(s * inv), [inv](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        detail::accumulate(A, Tensor::full(A.out.shape(), node.adjoint[0] * inv));
    });
}

// Flattens the entries where mask != 0, in row-major order.
inline Value select_mask(const Value& a, const Tensor& mask) {
    if (!a->out.same_shape(mask)) {
        throw DimensionError("select_mask: mask shape " + mask.shape_str() + " vs " + a->out.shape_str());
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0.0) idx.push_back(i);
    }
    Tensor out = Tensor::zeros({idx.size()});
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = a->out[idx[i]];
    return make_node(OpKind::SelectMask, {a}, std::move(out), [idx](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = Tensor::zeros(A.out.shape());
        for (std::size_t i = 0; i < idx.size(); ++i) da[idx[i]] += node.adjoint[i];
        detail::accumulate(A, da);
    });
}

// Per-row log(sum over masked entries of e^{a_ij}), max-shifted for overflow
// safety. Rows with an empty mask are a contract violation.
inline Value row_logsumexp_masked(const Value& a, const Tensor& mask) {
    detail::require_rank2(a->out, "row_logsumexp_masked");
    if (!a->out.same_shape(mask)) {
        throw DimensionError("row_logsumexp_masked: mask shape mismatch");
    }
    const std::size_t r = a->out.rows(), c = a->out.cols();
    Tensor out = Tensor::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            if (mask[i * c + j] != 0.0) mx = std::max(mx, a->out[i * c + j]);
        }
        if (!std::isfinite(mx)) throw ContractError("row_logsumexp_masked: empty mask row");
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (mask[i * c + j] != 0.0) s += std::exp(a->out[i * c + j] - mx);
        }
        out[i] = mx + std::log(s);
    }
    return make_node(OpKind::RowLogSumExp, {a}, std::move(out), [mask, r, c](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        if (!A.requires_grad) return;
        Tensor da = Tensor::zeros({r, c});
        for (std::size_t i = 0; i < r; ++i) {
            const double gi = node.adjoint[i];
            if (gi == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) {
                if (mask[i * c + j] != 0.0) {
                    da[i * c + j] = gi * std::exp(A.out[i * c + j] - node.out[i]);
                }
            }
        }
        detail::accumulate(A, da);
    });
}

// Per-graph sum of node rows; graph_id maps each row to its graph.
inline Value segment_sum(const Value& h, const std::vector<int>& graph_id, std::size_t n_graphs) {
    detail::require_rank2(h->out, "segment_sum");
    if (graph_id.size() != h->out.rows()) throw DimensionError("segment_sum: graph_id size mismatch");
    const std::size_t d = h->out.cols();
    Tensor out = Tensor::zeros({n_graphs, d});
    for (std::size_t i = 0; i < graph_id.size(); ++i) {
        double* dst = out.data() + static_cast<std::size_t>(graph_id[i]) * d;
        const double* src = h->out.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    return make_node(OpKind::SegmentSum, {h}, std::move(out), [graph_id, d](TapeNode& node) {
        TapeNode& H = *node.inputs[0];
        if (!H.requires_grad) return;
        Tensor dh = Tensor::zeros(H.out.shape());
        for (std::size_t i = 0; i < graph_id.size(); ++i) {
            const double* src = node.adjoint.data() + static_cast<std::size_t>(graph_id[i]) * d;
            double* dst = dh.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
        }
        detail::accumulate(H, dh);
    });
}

inline Value segment_mean(const Value& h, const std::vector<int>& graph_id, std::size_t n_graphs) {
    detail::require_rank2(h->out, "segment_mean");
    if (graph_id.size() != h->out.rows()) throw DimensionError("segment_mean: graph_id size mismatch");
    std::vector<double> count(n_graphs, 0.0);
    for (int g : graph_id) count[static_cast<std::size_t>(g)] += 1.0;
    for (std::size_t g = 0; g < n_graphs; ++g) {
        if (count[g] == 0.0) throw ContractError("segment_mean: empty graph segment");
    }
    const std::size_t d = h->out.cols();
    Tensor out = Tensor::zeros({n_graphs, d});
    for (std::size_t i = 0; i < graph_id.size(); ++i) {
        const std::size_t g = static_cast<std::size_t>(graph_id[i]);
        for (std::size_t j = 0; j < d; ++j) out[g * d + j] += h->out[i * d + j] / count[g];
    }
    return make_node(OpKind::SegmentMean, {h}, std::move(out), [graph_id, count, d](TapeNode& node) {
        TapeNode& H = *node.inputs[0];
        if (!H.requires_grad) return;
        Tensor dh = Tensor::zeros(H.out.shape());
        for (std::size_t i = 0; i < graph_id.size(); ++i) {
            const std::size_t g = static_cast<std::size_t>(graph_id[i]);
            for (std::size_t j = 0; j < d; ++j) dh[i * d + j] = node.adjoint[g * d + j] / count[g];
        }
        detail::accumulate(H, dh);
    });
}

inline Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const std::size_t r = parts[0]->out.rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        detail::require_rank2(p->out, "concat_cols");
        if (p->out.rows() != r) throw DimensionError("concat_cols: row count mismatch");
        total += p->out.cols();
    }
    Tensor out = Tensor::zeros({r, total});
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const std::size_t c = p->out.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i * total + off + j] = p->out[i * c + j];
        off += c;
    }
    return make_node(OpKind::ConcatCols, parts, std::move(out), [offsets, r, total](TapeNode& node) {
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            TapeNode& P = *node.inputs[k];
            if (!P.requires_grad) continue;
            const std::size_t c = P.out.cols();
            Tensor dp = Tensor::zeros({r, c});
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) dp[i * c + j] = node.adjoint[i * total + offsets[k] + j];
            detail::accumulate(P, dp);
        }
    });
}

// Copy of m with rows[k] <- v. Gradient into m skips the replaced rows; the
// row vector accumulates over every row it filled.
inline Value replace_rows(const Value& m, const Value& v, const std::vector<std::size_t>& rows) {
    detail::require_rank2(m->out, "replace_rows");
    const std::size_t c = m->out.cols();
    if (v->out.rank() != 1 || v->out.size() != c) {
        throw DimensionError("replace_rows: row vector shape " + v->out.shape_str());
    }
    Tensor out = m->out;
    for (std::size_t r : rows) {
        if (r >= m->out.rows()) throw DimensionError("replace_rows: row index out of range");
        for (std::size_t j = 0; j < c; ++j) out[r * c + j] = v->out[j];
    }
    return make_node(OpKind::ReplaceRows, {m, v}, std::move(out), [rows, c](TapeNode& node) {
        TapeNode& M = *node.inputs[0];
        TapeNode& V = *node.inputs[1];
        if (M.requires_grad) {
            Tensor dm = node.adjoint;
            for (std::size_t r : rows)
                for (std::size_t j = 0; j < c; ++j) dm[r * c + j] = 0.0;
            detail::accumulate(M, dm);
        }
        if (V.requires_grad) {
            Tensor dv = Tensor::zeros({c});
            for (std::size_t r : rows)
                for (std::size_t j = 0; j < c; ++j) dv[j] += node.adjoint[r * c + j];
            detail::accumulate(V, dv);
        }
    });
}

inline Value gather_rows(const Value& m, const std::vector<std::size_t>& idx) {
    detail::require_rank2(m->out, "gather_rows");
    const std::size_t c = m->out.cols();
    Tensor out = Tensor::zeros({idx.size(), c});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= m->out.rows()) throw DimensionError("gather_rows: index out of range");
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m->out[idx[i] * c + j];
    }
    return make_node(OpKind::GatherRows, {m}, std::move(out), [idx, c](TapeNode& node) {
        TapeNode& M = *node.inputs[0];
        if (!M.requires_grad) return;
        Tensor dm = Tensor::zeros(M.out.shape());
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) dm[idx[i] * c + j] += node.adjoint[i * c + j];
        detail::accumulate(M, dm);
    });
}

// Each row scaled to unit L2 norm. Zero rows are degenerate inputs.
inline Value l2_normalize_rows(const Value& m) {
    detail::require_rank2(m->out, "l2_normalize_rows");
    const std::size_t r = m->out.rows(), c = m->out.cols();
    Tensor out = m->out;
    std::vector<double> norms(r);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += out[i * c + j] * out[i * c + j];
        // clamp so augmentation-induced zero embeddings stay finite
        const double nrm = std::max(std::sqrt(s), 1e-12);
        norms[i] = nrm;
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= nrm;
    }
    return make_node(OpKind::L2NormalizeRows, {m}, std::move(out), [norms, r, c](TapeNode& node) {
        TapeNode& M = *node.inputs[0];
        if (!M.requires_grad) return;
        Tensor dm = Tensor::zeros({r, c});
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += node.adjoint[i * c + j] * node.out[i * c + j];
            for (std::size_t j = 0; j < c; ++j) {
                dm[i * c + j] = (node.adjoint[i * c + j] - dot * node.out[i * c + j]) / norms[i];
            }
        }
        detail::accumulate(M, dm);
    });
}

// Row-wise dot product of two equal-shape matrices -> vector.
inline Value rows_dot(const Value& a, const Value& b) {
    detail::require_same_shape(a, b, "rows_dot");
    detail::require_rank2(a->out, "rows_dot");
    const std::size_t r = a->out.rows(), c = a->out.cols();
    Tensor out = Tensor::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += a->out[i * c + j] * b->out[i * c + j];
        out[i] = s;
    }
    return make_node(OpKind::RowsDot, {a, b}, std::move(out), [r, c](TapeNode& node) {
        TapeNode& A = *node.inputs[0];
        TapeNode& B = *node.inputs[1];
        if (A.requires_grad) {
            Tensor da = Tensor::zeros({r, c});
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) da[i * c + j] = node.adjoint[i] * B.out[i * c + j];
            detail::accumulate(A, da);
        }
        if (B.requires_grad) {
            Tensor db = Tensor::zeros({r, c});
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) db[i * c + j] = node.adjoint[i] * A.out[i * c + j];
            detail::accumulate(B, db);
        }
    });
}

// Mean over rows of -log softmax(logits)[label], log-sum-exp stabilized.
inline Value softmax_cross_entropy(const Value& logits, const std::vector<int>& labels) {
    detail::require_rank2(logits->out, "softmax_cross_entropy");
    const std::size_t n = logits->out.rows(), c = logits->out.cols();
    if (n == 0) throw ContractError("softmax_cross_entropy: empty batch");
    if (labels.size() != n) throw DimensionError("softmax_cross_entropy: label count mismatch");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ContractError("softmax_cross_entropy: label out of range");
        }
    }
    double loss = 0.0;
    std::vector<double> lse(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = logits->out[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits->out[i * c + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(logits->out[i * c + j] - mx);
        lse[i] = mx + std::log(s);
        loss += lse[i] - logits->out[i * c + static_cast<std::size_t>(labels[i])];
    }
    loss /= static_cast<double>(n);
    return make_node(OpKind::SoftmaxCrossEntropy, {logits}, Tensor::scalar(loss),
                     [labels, lse, n, c](TapeNode& node) {
                         TapeNode& L = *node.inputs[0];
                         if (!L.requires_grad) return;
                         const double g = node.adjoint[0] / static_cast<double>(n);
                         Tensor dl = Tensor::zeros({n, c});
                         for (std::size_t i = 0; i < n; ++i) {
                             for (std::size_t j = 0; j < c; ++j) {
                                 double p = std::exp(L.out[i * c + j] - lse[i]);
                                 dl[i * c + j] = g * (p - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0));
                             }
                         }
                         detail::accumulate(L, dl);
                     });
}

// Cosine similarity of two vectors, clamped to [-1,1] after rounding.
inline Value cosine_similarity(const Value& u, const Value& v) {
    if (u->out.rank() != 1 || v->out.rank() != 1 || u->out.size() != v->out.size()) {
        throw DimensionError("cosine_similarity: " + u->out.shape_str() + " vs " + v->out.shape_str());
    }
    const std::size_t d = u->out.size();
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        uu += u->out[i] * u->out[i];
        vv += v->out[i] * v->out[i];
        uv += u->out[i] * v->out[i];
    }
    if (uu == 0.0 || vv == 0.0) throw DegenerateInputError("cosine_similarity: zero-norm input");
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    const double c = std::clamp(uv / (nu * nv), -1.0, 1.0);
    return make_node(OpKind::CosineSimilarity, {u, v}, Tensor::scalar(c), [nu, nv, c, d](TapeNode& node) {
        TapeNode& U = *node.inputs[0];
        TapeNode& V = *node.inputs[1];
        const double g = node.adjoint[0];
        if (U.requires_grad) {
            Tensor du = Tensor::zeros({d});
            for (std::size_t i = 0; i < d; ++i) {
                du[i] = g * (V.out[i] / (nu * nv) - c * U.out[i] / (nu * nu));
            }
            detail::accumulate(U, du);
        }
        if (V.requires_grad) {
            Tensor dv = Tensor::zeros({d});
            for (std::size_t i = 0; i < d; ++i) {
                dv[i] = g * (U.out[i] / (nu * nv) - c * V.out[i] / (nv * nv));
            }
            detail::accumulate(V, dv);
        }
    });
}

// ---------------------------------------------------------------------------
// Backward pass

// Reverse-mode sweep from a scalar loss. Adjoints are zero-initialized and
// accumulate additively across fan-out; forward values are never mutated.
// Visits each reachable node exactly once (iterative, so deep tapes are safe).
inline void backward(const Value& loss) {
    if (loss->out.size() != 1) {
        throw ContractError("backward: loss must be scalar, got " + loss->out.shape_str());
    }
    // Post-order topological sort.
    std::vector<TapeNode*> order;
    std::unordered_set<TapeNode*> seen;
    std::vector<std::pair<TapeNode*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            TapeNode* child = node->inputs[next].get();
            ++next;
            if (child->requires_grad && seen.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (TapeNode* n : order) {
        n->adjoint = Tensor();
        n->grad_seen = false;
    }
    loss->adjoint = Tensor::full(loss->out.shape(), 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TapeNode* n = *it;
        if (n->kind == OpKind::Leaf || n->kind == OpKind::Constant) continue;
        if (n->adjoint.empty()) continue;  // unreachable from loss
        n->backprop(*n);
    }
}

// Gradient of a leaf after backward(); zeros if the loss never touched it.
inline Tensor grad(const Value& leaf) {
    if (leaf->adjoint.empty()) return Tensor::zeros(leaf->out.shape());
    return leaf->adjoint;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

// Central-difference check of an analytic gradient. f builds a fresh scalar
// loss from a tensor; returns the worst relative error under symmetric
// normalization |a-b| / max(floor, |a|+|b|).
inline double grad_check(const std::function<Value(const Value&)>& f, const Tensor& x, double eps,
                         double floor = 1e-4) {
    if (eps < 1e-7 || eps > 1e-3) throw ConfigError("grad_check: eps outside [1e-7, 1e-3]");
    Value leaf = parameter(x);
    Value loss = f(leaf);
    backward(loss);
    Tensor analytic = grad(leaf);
    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = f(constant(probe))->out.item();
        probe[i] = orig - eps;
        const double fm = f(constant(probe))->out.item();
        probe[i] = orig;
        const double fd = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic[i] - fd) / std::max(floor, std::abs(analytic[i]) + std::abs(fd));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace graphssl
