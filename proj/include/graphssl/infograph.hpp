#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphssl/autodiff.hpp"
#include "graphssl/encoders.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/params.hpp"

namespace graphssl {

// Jensen-Shannon MI estimator: mean over positives of -sp(-T) minus mean over
// negatives of sp(T). Always <= 0; its supremum 0 is approached as positives
// diverge to +inf and negatives to -inf.
inline Value jsd_mi(const Value& pos_scores, const Value& neg_scores) {
    if (pos_scores->out.size() == 0) throw ContractError("jsd_mi: no positive scores");
    if (neg_scores->out.size() == 0) {
        throw ContractError("jsd_mi: no negative scores (batch must hold >= 2 graphs)");
    }
    Value pos_term = neg(mean_all(softplus(neg(pos_scores))));
    Value neg_term = mean_all(softplus(neg_scores));
    return sub(pos_term, neg_term);
}

// Bilinear discriminator: two 1-hidden-layer projections into a shared d_p
// space, score = dot of projections. Parameter names "{prefix}.a.*" (first
// argument side) and "{prefix}.b.*".
struct Discriminator {
    std::string prefix;
    std::size_t d_a = 0;
    std::size_t d_b = 0;
    std::size_t d_p = 64;
    std::uint64_t init_seed = 0;

    void register_params(ParamStore& store) const {
        store.glorot(prefix + ".a.W0", d_a, d_p, init_seed);
        store.zeros(prefix + ".a.b0", {d_p});
        store.glorot(prefix + ".a.W1", d_p, d_p, init_seed);
        store.zeros(prefix + ".a.b1", {d_p});
        store.glorot(prefix + ".b.W0", d_b, d_p, init_seed);
        store.zeros(prefix + ".b.b0", {d_p});
        store.glorot(prefix + ".b.W1", d_p, d_p, init_seed);
        store.zeros(prefix + ".b.b1", {d_p});
    }

    Value project(TapeParams& tp, const Value& h, const char* side) const {
        const std::string s = prefix + "." + side;
        Value hid = relu(add_rowvec(matmul(h, tp.leaf(s + ".W0")), tp.leaf(s + ".b0")));
        return add_rowvec(matmul(hid, tp.leaf(s + ".W1")), tp.leaf(s + ".b1"));
    }

    // Score matrix [rows(a) x rows(b)].
    Value scores(TapeParams& tp, const Value& a, const Value& b) const {
        register_params(tp.store());
        return matmul_nt(project(tp, a, "a"), project(tp, b, "b"));
    }
};

namespace detail {

// 0/1 masks over an [n x g] node-vs-graph score matrix: positives where the
// node belongs to the graph, negatives everywhere else.
inline std::pair<Tensor, Tensor> membership_masks(const std::vector<int>& graph_id, std::size_t g) {
    const std::size_t n = graph_id.size();
    Tensor pos = Tensor::zeros({n, g});
    Tensor negm = Tensor::full({n, g}, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        pos[i * g + static_cast<std::size_t>(graph_id[i])] = 1.0;
        negm[i * g + static_cast<std::size_t>(graph_id[i])] = 0.0;
    }
    return {pos, negm};
}

inline std::pair<Tensor, Tensor> diag_masks(std::size_t g) {
    Tensor pos = Tensor::identity(g);
    Tensor negm = Tensor::full({g, g}, 1.0);
    for (std::size_t i = 0; i < g; ++i) negm[i * g + i] = 0.0;
    return {pos, negm};
}

}  // namespace detail

// Node-graph MI loss over a batch: -(n_nodes/|G|) * jsd_mi(pos, neg), with
// positives (v, graph of v) and negatives every cross pairing in the batch.
inline Value infograph_unsup_loss(TapeParams& tp, const Encoder& enc, const Discriminator& disc,
                                  const Batch& batch) {
    if (batch.n_graphs < 2) {
        throw ContractError("infograph_unsup_loss: batch must hold >= 2 graphs");
    }
    std::vector<Value> layers = enc.forward(tp, batch, constant(batch.x));
    Value nodes = layer_concat_nodes(layers);
    Value graphs = layer_concat_sum_readout(layers, batch);
    Value s = disc.scores(tp, nodes, graphs);
    auto [pos_mask, neg_mask] = detail::membership_masks(batch.graph_id, batch.n_graphs);
    Value mi = jsd_mi(select_mask(s, pos_mask), select_mask(s, neg_mask));
    const double factor =
        -static_cast<double>(batch.n_nodes) / static_cast<double>(batch.n_graphs);
    return scale(mi, factor);
}

// Twin-encoder consistency: MI between the two encoders' embeddings of the
// same claim, negatives = cross-claim pairings. Returns -(mean MI), >= 0 at
// zero scores.
inline Value consistency_loss(TapeParams& tp, const Encoder& enc_phi, const Encoder& enc_psi,
                              const Discriminator& disc, const Batch& batch) {
    if (batch.n_graphs < 2) throw ContractError("consistency_loss: batch must hold >= 2 graphs");
    Value g_phi = layer_concat_sum_readout(enc_phi.forward(tp, batch, constant(batch.x)), batch);
    Value g_psi = layer_concat_sum_readout(enc_psi.forward(tp, batch, constant(batch.x)), batch);
    Value s = disc.scores(tp, g_phi, g_psi);
    auto [pos_mask, neg_mask] = detail::diag_masks(batch.n_graphs);
    return neg(jsd_mi(select_mask(s, pos_mask), select_mask(s, neg_mask)));
}

inline Value infograph_logits(TapeParams& tp, const Encoder& enc, const Batch& batch,
                              std::size_t n_classes, std::uint64_t init_seed) {
    Value hg = layer_concat_sum_readout(enc.forward(tp, batch, constant(batch.x)), batch);
    return classify_logits(tp, hg, n_classes, init_seed);
}

struct InfographSemiParts {
    Value total;
    double l_sup = 0.0;
    double l_unsup = 0.0;
    double l_cons = 0.0;
};

// Supervised loss on the labeled batch through encoder phi plus alpha-weighted
// node-graph MI and beta-weighted consistency on the combined batch through
// encoder psi (MI) and both encoders (consistency).
inline InfographSemiParts infograph_semi_loss(TapeParams& tp, const Encoder& enc_phi,
                                              const Encoder& enc_psi, const Discriminator& d1,
                                              const Discriminator& d2, const Batch& labeled,
                                              const Batch& combined, double alpha, double beta,
                                              std::size_t n_classes, std::uint64_t init_seed) {
    if (labeled.n_graphs == 0) throw ContractError("infograph_semi_loss: empty labeled batch");
    for (int y : labeled.labels) {
        if (y < 0) throw ContractError("infograph_semi_loss: unlabeled claim in labeled batch");
    }
    InfographSemiParts parts;
    Value l_sup = softmax_cross_entropy(
        infograph_logits(tp, enc_phi, labeled, n_classes, init_seed), labeled.labels);
    Value l_unsup = infograph_unsup_loss(tp, enc_psi, d1, combined);
    Value l_cons = consistency_loss(tp, enc_phi, enc_psi, d2, combined);
    parts.l_sup = l_sup->out.item();
    parts.l_unsup = l_unsup->out.item();
    parts.l_cons = l_cons->out.item();
    parts.total = add(l_sup, add(scale(l_unsup, alpha), scale(l_cons, beta)));
    return parts;
}

}  // namespace graphssl
