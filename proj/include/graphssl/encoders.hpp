#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphssl/autodiff.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/params.hpp"

namespace graphssl {

enum class EncoderKind { GCN, GIN, ResGCN };

inline const char* encoder_kind_name(EncoderKind k) {
    switch (k) {
        case EncoderKind::GCN: return "gcn";
        case EncoderKind::GIN: return "gin";
        case EncoderKind::ResGCN: return "resgcn";
    }
    return "gcn";
}

struct EncoderConfig {
    EncoderKind kind = EncoderKind::GCN;
    std::size_t layers = 2;
    std::size_t d_in = 128;
    std::size_t d_h = 64;
};

// Message-passing encoder over a batched graph. Parameters are named
// "{prefix}.l{i}.*" and created deterministically from (init_seed, name), so
// two encoders with different prefixes never share weights.
class Encoder {
public:
    Encoder(EncoderConfig cfg, std::string prefix, std::uint64_t init_seed)
        : cfg_(cfg), prefix_(std::move(prefix)), seed_(init_seed) {
        if (cfg_.layers < 1) throw ConfigError("encoder needs at least 1 layer");
        if (cfg_.d_h < 2) throw ConfigError("encoder hidden dim must be >= 2");
    }

    const EncoderConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }
    std::size_t out_dim() const { return cfg_.d_h; }
    std::size_t concat_dim() const { return cfg_.layers * cfg_.d_h; }

    void register_params(ParamStore& store) const {
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            const std::size_t din = l == 0 ? cfg_.d_in : cfg_.d_h;
            if (cfg_.kind == EncoderKind::GIN) {
                store.glorot(lname(l, "mlp0.W"), din, cfg_.d_h, seed_);
                store.zeros(lname(l, "mlp0.b"), {cfg_.d_h});
                store.glorot(lname(l, "mlp1.W"), cfg_.d_h, cfg_.d_h, seed_);
                store.zeros(lname(l, "mlp1.b"), {cfg_.d_h});
            } else {
                store.glorot(lname(l, "W"), din, cfg_.d_h, seed_);
                store.zeros(lname(l, "b"), {cfg_.d_h});
            }
        }
    }

    // Per-layer node embeddings, one [n_nodes x d_h] value per layer.
    // x is the node feature matrix (may be a masked or augmented variant).
    std::vector<Value> forward(TapeParams& tp, const Batch& batch, const Value& x) const {
        if (x->out.rows() != batch.n_nodes || x->out.cols() != cfg_.d_in) {
            throw DimensionError("encoder forward: features " + x->out.shape_str() + " vs batch " +
                                 std::to_string(batch.n_nodes) + " x " + std::to_string(cfg_.d_in));
        }
        register_params(tp.store());
        std::vector<Value> out;
        out.reserve(cfg_.layers);
        switch (cfg_.kind) {
            case EncoderKind::GCN: {
                const SparseMatrix op = batch.gcn_operator();
                Value h = x;
                for (std::size_t l = 0; l < cfg_.layers; ++l) {
                    Value pre = add_rowvec(matmul(spmm(op, h), tp.leaf(lname(l, "W"))),
                                           tp.leaf(lname(l, "b")));
                    h = l + 1 < cfg_.layers ? relu(pre) : pre;
                    out.push_back(h);
                }
                break;
            }
            case EncoderKind::ResGCN: {
                const SparseMatrix op = batch.gcn_operator();
                Value h = x;
                for (std::size_t l = 0; l < cfg_.layers; ++l) {
                    Value pre = add_rowvec(matmul(spmm(op, h), tp.leaf(lname(l, "W"))),
                                           tp.leaf(lname(l, "b")));
                    Value act = l + 1 < cfg_.layers ? relu(pre) : pre;
                    // skip connection whenever input width matches output width
                    h = h->out.cols() == cfg_.d_h ? add(act, h) : act;
                    out.push_back(h);
                }
                break;
            }
            case EncoderKind::GIN: {
                const SparseMatrix op = batch.gin_operator(0.0);
                Value h = x;
                for (std::size_t l = 0; l < cfg_.layers; ++l) {
                    Value agg = spmm(op, h);
                    Value hid = relu(add_rowvec(matmul(agg, tp.leaf(lname(l, "mlp0.W"))),
                                                tp.leaf(lname(l, "mlp0.b"))));
                    h = add_rowvec(matmul(hid, tp.leaf(lname(l, "mlp1.W"))),
                                   tp.leaf(lname(l, "mlp1.b")));
                    out.push_back(h);
                }
                break;
            }
        }
        return out;
    }

private:
    std::string lname(std::size_t layer, const char* tail) const {
        return prefix_ + ".l" + std::to_string(layer) + "." + tail;
    }

    EncoderConfig cfg_;
    std::string prefix_;
    std::uint64_t seed_;
};

// Sum readout of each layer's node embeddings, concatenated: [g x layers*d_h].
inline Value layer_concat_sum_readout(const std::vector<Value>& layers, const Batch& batch) {
    std::vector<Value> parts;
    parts.reserve(layers.size());
    for (const Value& h : layers) parts.push_back(segment_sum(h, batch.graph_id, batch.n_graphs));
    return parts.size() == 1 ? parts[0] : concat_cols(parts);
}

// Node embeddings concatenated across layers: [n x layers*d_h].
inline Value layer_concat_nodes(const std::vector<Value>& layers) {
    return layers.size() == 1 ? layers[0] : concat_cols(layers);
}

inline Value mean_readout(const Value& final_layer, const Batch& batch) {
    return segment_mean(final_layer, batch.graph_id, batch.n_graphs);
}

// Linear classification head, parameters "{prefix}.W" / "{prefix}.b".
inline Value classify_logits(TapeParams& tp, const Value& graph_embed, std::size_t n_classes,
                             std::uint64_t init_seed, const std::string& prefix = "head") {
    if (n_classes < 2) throw ConfigError("classifier needs at least 2 classes");
    Value w = tp.glorot(prefix + ".W", graph_embed->out.cols(), n_classes, init_seed);
    Value b = tp.zeros(prefix + ".b", {n_classes});
    return add_rowvec(matmul(graph_embed, w), b);
}

inline void register_head(ParamStore& store, std::size_t d_in, std::size_t n_classes,
                          std::uint64_t init_seed, const std::string& prefix = "head") {
    store.glorot(prefix + ".W", d_in, n_classes, init_seed);
    store.zeros(prefix + ".b", {n_classes});
}

}  // namespace graphssl
