#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "graphssl/autodiff.hpp"
#include "graphssl/encoders.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/params.hpp"

namespace graphssl {

struct MaskSpec {
    double mask_rate = 0.5;
    double replace_rate = 0.15;

    void validate() const {
        if (mask_rate < 0.0 || mask_rate > 1.0) throw ConfigError("mask_rate outside [0,1]");
        if (replace_rate < 0.0 || replace_rate > 1.0) throw ConfigError("replace_rate outside [0,1]");
    }
};

// Exactly round(rate * n) distinct indices, uniform over subsets, ascending.
inline std::vector<std::size_t> sample_mask(std::size_t n_nodes, double mask_rate,
                                            std::uint64_t seed) {
    if (n_nodes == 0) throw ContractError("sample_mask: empty node set");
    const std::size_t count = static_cast<std::size_t>(
        std::lround(mask_rate * static_cast<double>(n_nodes)));
    Rng rng(seed);
    return rng.sample_without_replacement(n_nodes, std::min(count, n_nodes));
}

// Mask bookkeeping for one batch: which rows carry the learnable token, which
// were swapped with another node's features, and the feature matrix with the
// swaps already burned in (token rows are substituted on the tape).
struct MaskedBatch {
    std::vector<std::size_t> masked;      // all masked rows, ascending, global indices
    std::vector<std::size_t> token_rows;  // masked minus replaced
    std::vector<std::size_t> replaced;
    Tensor x_base;
};

// Masks each graph independently at mask_rate, then swaps a replace_rate
// fraction of the union with features of other batch nodes.
inline MaskedBatch build_masked_batch(const Batch& batch, const MaskSpec& spec,
                                      std::uint64_t seed) {
    spec.validate();
    MaskedBatch mb;
    mb.x_base = batch.x;
    for (std::size_t gi = 0; gi < batch.n_graphs; ++gi) {
        const std::size_t off = batch.offsets[gi];
        const std::size_t n_g = batch.offsets[gi + 1] - off;
        for (std::size_t v : sample_mask(n_g, spec.mask_rate, sub_seed(seed, gi))) {
            mb.masked.push_back(off + v);
        }
    }
    const std::size_t n_replace = static_cast<std::size_t>(
        std::lround(spec.replace_rate * static_cast<double>(mb.masked.size())));
    Rng rng(sub_seed(seed, "replace"));
    std::vector<bool> is_replaced(mb.masked.size(), false);
    for (std::size_t pos : rng.sample_without_replacement(mb.masked.size(), n_replace)) {
        is_replaced[pos] = true;
    }
    const std::size_t d = batch.d;
    for (std::size_t k = 0; k < mb.masked.size(); ++k) {
        const std::size_t v = mb.masked[k];
        if (!is_replaced[k]) {
            mb.token_rows.push_back(v);
            continue;
        }
        mb.replaced.push_back(v);
        std::size_t src = rng.uniform_index(batch.n_nodes - 1);
        if (src >= v) ++src;
        for (std::size_t j = 0; j < d; ++j) mb.x_base[v * d + j] = batch.x[src * d + j];
    }
    return mb;
}

inline void register_mask_tokens(ParamStore& store, std::size_t d_x, std::size_t d_h,
                                 std::uint64_t init_seed) {
    auto init_vec = [&](const std::string& name, std::size_t d) {
        if (store.contains(name)) return;
        const double limit = std::sqrt(6.0 / static_cast<double>(1 + d));
        Rng rng(sub_seed(init_seed, name));
        Tensor& t = store.zeros(name, {d});
        for (std::size_t i = 0; i < d; ++i) t[i] = rng.uniform(-limit, limit);
    };
    init_vec("mask.x", d_x);
    init_vec("mask.h", d_h);
}

inline void register_decoder(ParamStore& store, std::size_t d_h, std::size_t d_x,
                             std::uint64_t init_seed) {
    store.glorot("dec.W", d_h, d_x, init_seed);
    store.zeros("dec.b", {d_x});
}

// X with masked rows set to the learnable token x_[M] (replaced rows keep
// their swapped features). Unmasked rows pass through bit-identical.
inline Value apply_feature_mask(TapeParams& tp, const MaskedBatch& mb) {
    Value x_m = tp.leaf("mask.x");
    return replace_rows(constant(mb.x_base), x_m, mb.token_rows);
}

// Encode the masked features, re-mask every masked row of H with h_[M], then
// decode with the 1-layer GCN (linear output, width d_x).
inline Value remask_and_decode(TapeParams& tp, const Encoder& enc, const Batch& batch,
                               const Value& x_tilde, const std::vector<std::size_t>& masked) {
    Value h = enc.forward(tp, batch, x_tilde).back();
    Value h_tilde = replace_rows(h, tp.leaf("mask.h"), masked);
    const SparseMatrix op = batch.gcn_operator();
    return add_rowvec(matmul(spmm(op, h_tilde), tp.leaf("dec.W")), tp.leaf("dec.b"));
}

struct SceResult {
    Value loss;
    std::size_t skipped = 0;  // masked rows with zero original features
};

// Scaled cosine error over masked nodes: per-graph mean of (1 - cos)^gamma,
// then mean over the graphs that contributed. Zero-feature targets cannot be
// scored by cosine; they are skipped and tallied.
inline SceResult sce_loss(const Tensor& x, const Value& z, const std::vector<std::size_t>& masked,
                          double gamma, const Batch& batch) {
    if (gamma < 1.0) throw ConfigError("sce_loss: gamma must be >= 1");
    const std::size_t d = x.cols();
    std::vector<std::size_t> contributing;
    SceResult res;
    for (std::size_t v : masked) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm2 += x[v * d + j] * x[v * d + j];
        if (norm2 > 0.0) {
            contributing.push_back(v);
        } else {
            ++res.skipped;
        }
    }
    if (contributing.empty()) {
        throw DegenerateInputError("sce_loss: every masked node has zero features");
    }
    // targets, L2-normalized as constants
    Tensor xt = Tensor::zeros({contributing.size(), d});
    for (std::size_t k = 0; k < contributing.size(); ++k) {
        const std::size_t v = contributing[k];
        double norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm2 += x[v * d + j] * x[v * d + j];
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t j = 0; j < d; ++j) xt[k * d + j] = x[v * d + j] * inv;
    }
    std::vector<double> per_graph_count(batch.n_graphs, 0.0);
    for (std::size_t v : contributing) {
        per_graph_count[static_cast<std::size_t>(batch.graph_id[v])] += 1.0;
    }
    std::size_t graphs_hit = 0;
    for (double c : per_graph_count) {
        if (c > 0.0) ++graphs_hit;
    }
    Tensor weights = Tensor::zeros({contributing.size()});
    for (std::size_t k = 0; k < contributing.size(); ++k) {
        const double cnt = per_graph_count[static_cast<std::size_t>(batch.graph_id[contributing[k]])];
        weights[k] = 1.0 / (cnt * static_cast<double>(graphs_hit));
    }
    Value zn = l2_normalize_rows(gather_rows(z, contributing));
    Value cos = rows_dot(constant(xt), zn);
    // relu guards the fp case cos = 1 + ulp; the gradient there is zero anyway
    Value err = pow_const(relu(add_scalar(neg(cos), 1.0)), gamma);
    res.loss = sum_all(mul(err, constant(weights)));
    return res;
}

// Masked-reconstruction loss for one batch; the full GraphMAE unsupervised
// objective.
inline SceResult graphmae_unsup_loss(TapeParams& tp, const Encoder& enc, const Batch& batch,
                                     const MaskSpec& spec, double gamma, std::uint64_t seed) {
    const MaskedBatch mb = build_masked_batch(batch, spec, seed);
    Value x_tilde = apply_feature_mask(tp, mb);
    Value z = remask_and_decode(tp, enc, batch, x_tilde, mb.masked);
    return sce_loss(batch.x, z, mb.masked, gamma, batch);
}

inline Value graphmae_logits(TapeParams& tp, const Encoder& enc, const Batch& batch,
                             std::size_t n_classes, std::uint64_t init_seed) {
    Value hg = mean_readout(enc.forward(tp, batch, constant(batch.x)).back(), batch);
    return classify_logits(tp, hg, n_classes, init_seed);
}

struct GraphmaeSemiParts {
    Value total;
    double l_sup = 0.0;
    double l_unsup = 0.0;
    std::size_t skipped = 0;
};

// L_sup on the labeled batch (no masking on the supervised path) plus
// alpha * masked-reconstruction on the combined batch.
inline GraphmaeSemiParts graphmae_semi_loss(TapeParams& tp, const Encoder& enc,
                                            const Batch& labeled, const Batch& combined,
                                            const MaskSpec& spec, double alpha, double gamma,
                                            std::size_t n_classes, std::uint64_t init_seed,
                                            std::uint64_t mask_seed) {
    if (labeled.n_graphs == 0) throw ContractError("graphmae_semi_loss: empty labeled batch");
    for (int y : labeled.labels) {
        if (y < 0) throw ContractError("graphmae_semi_loss: unlabeled claim in labeled batch");
    }
    GraphmaeSemiParts parts;
    Value l_sup = softmax_cross_entropy(
        graphmae_logits(tp, enc, labeled, n_classes, init_seed), labeled.labels);
    parts.l_sup = l_sup->out.item();
    if (alpha == 0.0) {
        // decoder and tokens stay outside the tape: no gradient reaches them
        parts.total = l_sup;
        return parts;
    }
    SceResult unsup = graphmae_unsup_loss(tp, enc, combined, spec, gamma, mask_seed);
    parts.l_unsup = unsup.loss->out.item();
    parts.skipped = unsup.skipped;
    parts.total = add(l_sup, scale(unsup.loss, alpha));
    return parts;
}

}  // namespace graphssl
