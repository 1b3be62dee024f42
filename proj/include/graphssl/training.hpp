#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "graphssl/augment.hpp"
#include "graphssl/autodiff.hpp"
#include "graphssl/corpus.hpp"
#include "graphssl/encoders.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/graphmae.hpp"
#include "graphssl/infograph.hpp"
#include "graphssl/joao.hpp"
#include "graphssl/metrics.hpp"
#include "graphssl/params.hpp"

namespace graphssl {

enum class Method { InfoGraph, JOAO, GraphMAE };
enum class Phase { Pretrain, Finetune, Semi };
enum class AblationMode { Full, SupOnly, SslLabeledOnly };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::InfoGraph: return "infograph";
        case Method::JOAO: return "joao";
        case Method::GraphMAE: return "graphmae";
    }
    return "infograph";
}

inline Method method_from_name(const std::string& s) {
    if (s == "infograph") return Method::InfoGraph;
    if (s == "joao") return Method::JOAO;
    if (s == "graphmae") return Method::GraphMAE;
    throw ConfigError("unknown method '" + s + "'");
}

struct TrainConfig {
    Method method = Method::InfoGraph;
    double alpha = 0.3;
    double beta = 0.3;
    double lambda = 1.0;
    double gamma = 2.0;
    double lr = 1e-3;
    double lower_lr = 0.01;
    double aug_ratio = 0.2;
    double mask_rate = 0.5;
    double replace_rate = 0.15;
    std::size_t epochs_pretrain = 50;
    std::size_t epochs_finetune = 100;
    std::size_t batch_size = 32;
    std::size_t labeled_per_batch = 16;
    std::size_t patience = 10;
    std::size_t d_h = 64;
    std::size_t layers = 2;
    std::size_t d_p = 64;
    std::uint64_t seed = 0;
};

struct EpochLog {
    std::size_t epoch = 0;
    std::optional<double> l_sup, l_unsup, l_consistency, l_dist, val_acc;
};

// Each method trains the encoder family named for it.
inline EncoderKind method_encoder_kind(Method m) {
    switch (m) {
        case Method::InfoGraph: return EncoderKind::GIN;
        case Method::JOAO: return EncoderKind::ResGCN;
        case Method::GraphMAE: return EncoderKind::GCN;
    }
    return EncoderKind::GCN;
}

// A method's parameters plus enough structure to rebuild its forward passes.
// "enc" is always the encoder the classifier reads; InfoGraph's semi strategy
// adds the twin "enc2" for the unsupervised path.
struct Model {
    Method method = Method::InfoGraph;
    Phase phase = Phase::Semi;
    std::size_t d_x = 0;
    std::size_t n_classes = 2;
    TrainConfig cfg;
    ParamStore params;
    AugmentationPolicy policy = AugmentationPolicy::uniform();
    std::uint64_t init_seed = 0;

    EncoderConfig enc_config() const {
        EncoderConfig ec;
        ec.kind = method_encoder_kind(method);
        ec.layers = cfg.layers;
        ec.d_in = d_x;
        ec.d_h = cfg.d_h;
        return ec;
    }

    Encoder encoder(const std::string& prefix = "enc") const {
        return Encoder(enc_config(), prefix, init_seed);
    }

    // InfoGraph reads its layer-concat readout; the others the final mean.
    std::size_t head_in_dim() const {
        return method == Method::InfoGraph ? cfg.layers * cfg.d_h : cfg.d_h;
    }

    Discriminator disc1() const {
        const std::size_t d = cfg.layers * cfg.d_h;
        return Discriminator{"d1", d, d, cfg.d_p, init_seed};
    }

    Discriminator disc2() const {
        const std::size_t d = cfg.layers * cfg.d_h;
        return Discriminator{"d2", d, d, cfg.d_p, init_seed};
    }
};

inline Model build_model(Method method, Phase phase, std::size_t d_x, std::size_t n_classes,
                         const TrainConfig& cfg) {
    Model m;
    m.method = method;
    m.phase = phase;
    m.d_x = d_x;
    m.n_classes = n_classes;
    m.cfg = cfg;
    m.init_seed = sub_seed(cfg.seed, "init");
    m.encoder().register_params(m.params);
    const bool with_ssl = phase != Phase::Finetune;
    const bool with_head = phase != Phase::Pretrain;
    if (with_head) register_head(m.params, m.head_in_dim(), n_classes, m.init_seed);
    if (with_ssl) {
        switch (method) {
            case Method::InfoGraph:
                m.disc1().register_params(m.params);
                if (phase == Phase::Semi) {
                    m.encoder("enc2").register_params(m.params);
                    m.disc2().register_params(m.params);
                }
                break;
            case Method::JOAO:
                break;  // the policy lives outside the parameter store
            case Method::GraphMAE:
                register_mask_tokens(m.params, d_x, cfg.d_h, m.init_seed);
                register_decoder(m.params, cfg.d_h, d_x, m.init_seed);
                break;
        }
    }
    return m;
}

// Fresh finetune-phase model whose encoder weights are copied from a
// pretrained model; SSL-specific parameters stay behind.
inline Model transfer_encoder(const Model& pretrained, std::size_t n_classes,
                              const TrainConfig& cfg) {
    Model m = build_model(pretrained.method, Phase::Finetune, pretrained.d_x, n_classes, cfg);
    pretrained.params.copy_prefix_into("enc.", m.params);
    return m;
}

// ---------------------------------------------------------------------------
// Forward passes

inline Value model_logits(const Model& model, TapeParams& tp, const Batch& batch) {
    const Encoder enc = model.encoder();
    if (model.method == Method::InfoGraph) {
        return infograph_logits(tp, enc, batch, model.n_classes, model.init_seed);
    }
    Value hg = mean_readout(enc.forward(tp, batch, constant(batch.x)).back(), batch);
    return classify_logits(tp, hg, model.n_classes, model.init_seed);
}

inline Value supervised_loss(const Model& model, TapeParams& tp, const Batch& labeled) {
    if (labeled.n_graphs == 0) throw ContractError("supervised_loss: empty batch");
    for (int y : labeled.labels) {
        if (y < 0) throw ContractError("supervised_loss: unlabeled claim in labeled batch");
    }
    return softmax_cross_entropy(model_logits(model, tp, labeled), labeled.labels);
}

inline std::vector<const GraphData*> gather_graphs(const std::vector<GraphData>& pool,
                                                   const std::vector<std::size_t>& idx) {
    std::vector<const GraphData*> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(&pool[i]);
    return out;
}

inline std::vector<int> predict(Model& model, const std::vector<const GraphData*>& graphs,
                                std::size_t chunk = 256) {
    std::vector<int> preds;
    preds.reserve(graphs.size());
    for (std::size_t start = 0; start < graphs.size(); start += chunk) {
        const std::size_t end = std::min(start + chunk, graphs.size());
        std::vector<const GraphData*> part(graphs.begin() + static_cast<long>(start),
                                           graphs.begin() + static_cast<long>(end));
        const Batch b = make_batch(part);
        TapeParams tp(model.params);
        const Tensor logits = model_logits(model, tp, b)->out;
        for (std::size_t g = 0; g < b.n_graphs; ++g) {
            int best = 0;
            for (std::size_t c = 1; c < model.n_classes; ++c) {
                if (logits[g * model.n_classes + c] > logits[g * model.n_classes + best]) {
                    best = static_cast<int>(c);
                }
            }
            preds.push_back(best);
        }
    }
    return preds;
}

inline double accuracy_on(Model& model, const std::vector<GraphData>& pool,
                          const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw ContractError("accuracy_on: empty evaluation set");
    const std::vector<const GraphData*> graphs = gather_graphs(pool, idx);
    const std::vector<int> preds = predict(model, graphs);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        if (preds[k] == graphs[k]->label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(graphs.size());
}

// ---------------------------------------------------------------------------
// Step functions

struct StepLosses {
    std::optional<double> l_sup, l_unsup, l_cons, l_dist;
};

// One unsupervised optimization step on a batch of graphs.
inline StepLosses pretrain_step(Model& model, Adam& adam, const std::vector<const GraphData*>& graphs,
                                std::uint64_t step_seed) {
    StepLosses out;
    switch (model.method) {
        case Method::InfoGraph: {
            TapeParams tp(model.params);
            const Batch b = make_batch(graphs);
            Value loss = infograph_unsup_loss(tp, model.encoder(), model.disc1(), b);
            out.l_unsup = loss->out.item();
            backward(loss);
            adam.step(model.params, tp);
            break;
        }
        case Method::JOAO: {
            TapeParams tp(model.params);
            JoaoLoss res = joao_contrastive_loss(tp, model.encoder(), graphs, model.policy,
                                                 model.cfg.aug_ratio, step_seed);
            out.l_unsup = res.total->out.item();
            backward(res.total);
            adam.step(model.params, tp);
            model.policy = policy_ascent_step(model.policy, res.table, model.cfg.lambda,
                                              model.cfg.lower_lr);
            out.l_dist = distribution_penalty(model.policy);
            break;
        }
        case Method::GraphMAE: {
            TapeParams tp(model.params);
            const Batch b = make_batch(graphs);
            MaskSpec spec{model.cfg.mask_rate, model.cfg.replace_rate};
            SceResult res = graphmae_unsup_loss(tp, model.encoder(), b, spec, model.cfg.gamma,
                                                step_seed);
            out.l_unsup = res.loss->out.item();
            backward(res.loss);
            adam.step(model.params, tp);
            break;
        }
    }
    return out;
}

// One semi-supervised step: labeled graphs feed the supervised term, the
// combined set feeds the method's SSL terms. SupOnly skips the SSL terms
// entirely (their parameters stay off the tape).
inline StepLosses semi_step(Model& model, Adam& adam, const std::vector<const GraphData*>& labeled,
                            const std::vector<const GraphData*>& combined, AblationMode mode,
                            std::uint64_t step_seed) {
    StepLosses out;
    const Batch lb = make_batch(labeled);
    if (mode == AblationMode::SupOnly) {
        TapeParams tp(model.params);
        Value loss = supervised_loss(model, tp, lb);
        out.l_sup = loss->out.item();
        backward(loss);
        adam.step(model.params, tp);
        return out;
    }
    switch (model.method) {
        case Method::InfoGraph: {
            TapeParams tp(model.params);
            const Batch cb = make_batch(combined);
            InfographSemiParts parts = infograph_semi_loss(
                tp, model.encoder(), model.encoder("enc2"), model.disc1(), model.disc2(), lb, cb,
                model.cfg.alpha, model.cfg.beta, model.n_classes, model.init_seed);
            out.l_sup = parts.l_sup;
            out.l_unsup = parts.l_unsup;
            out.l_cons = parts.l_cons;
            backward(parts.total);
            adam.step(model.params, tp);
            break;
        }
        case Method::JOAO: {
            TapeParams tp(model.params);
            Value l_sup = supervised_loss(model, tp, lb);
            JoaoLoss res = joao_contrastive_loss(tp, model.encoder(), combined, model.policy,
                                                 model.cfg.aug_ratio, step_seed);
            out.l_sup = l_sup->out.item();
            out.l_unsup = res.total->out.item();
            Value total = add(l_sup, scale(res.total, model.cfg.alpha));
            backward(total);
            adam.step(model.params, tp);
            model.policy = policy_ascent_step(model.policy, res.table, model.cfg.lambda,
                                              model.cfg.lower_lr);
            out.l_dist = distribution_penalty(model.policy);
            break;
        }
        case Method::GraphMAE: {
            TapeParams tp(model.params);
            const Batch cb = make_batch(combined);
            MaskSpec spec{model.cfg.mask_rate, model.cfg.replace_rate};
            GraphmaeSemiParts parts =
                graphmae_semi_loss(tp, model.encoder(), lb, cb, spec, model.cfg.alpha,
                                   model.cfg.gamma, model.n_classes, model.init_seed, step_seed);
            out.l_sup = parts.l_sup;
            if (model.cfg.alpha != 0.0) out.l_unsup = parts.l_unsup;
            backward(parts.total);
            adam.step(model.params, tp);
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Epoch loops

namespace detail {

// Deterministic cycling sampler over a pool: shuffles, deals, reshuffles.
class CyclingSampler {
public:
    CyclingSampler(std::size_t n, std::uint64_t seed) : seed_(seed) {
        pool_.resize(n);
        for (std::size_t i = 0; i < n; ++i) pool_[i] = i;
        reshuffle();
    }

    std::vector<std::size_t> take(std::size_t k) {
        std::vector<std::size_t> out;
        out.reserve(k);
        while (out.size() < k) {
            if (pos_ == pool_.size()) reshuffle();
            out.push_back(pool_[pos_++]);
        }
        return out;
    }

private:
    void reshuffle() {
        Rng rng(sub_seed(seed_, refills_++));
        rng.shuffle(pool_);
        pos_ = 0;
    }

    std::vector<std::size_t> pool_;
    std::size_t pos_ = 0;
    std::uint64_t seed_;
    std::uint64_t refills_ = 0;
};

inline std::vector<std::vector<std::size_t>> epoch_chunks(std::vector<std::size_t> order,
                                                          std::size_t chunk_size,
                                                          std::uint64_t shuffle_seed,
                                                          std::size_t min_chunk) {
    Rng rng(shuffle_seed);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t start = 0; start < order.size(); start += chunk_size) {
        const std::size_t end = std::min(start + chunk_size, order.size());
        chunks.emplace_back(order.begin() + static_cast<long>(start),
                            order.begin() + static_cast<long>(end));
    }
    // a tail too small for the contrastive terms folds into its predecessor
    if (chunks.size() > 1 && chunks.back().size() < min_chunk) {
        auto tail = chunks.back();
        chunks.pop_back();
        chunks.back().insert(chunks.back().end(), tail.begin(), tail.end());
    }
    return chunks;
}

inline void merge_losses(std::vector<StepLosses>& steps, EpochLog& log) {
    auto avg = [&](auto pick) -> std::optional<double> {
        double s = 0.0;
        std::size_t n = 0;
        for (const StepLosses& st : steps) {
            if (auto v = pick(st)) {
                s += *v;
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return s / static_cast<double>(n);
    };
    log.l_sup = avg([](const StepLosses& s) { return s.l_sup; });
    log.l_unsup = avg([](const StepLosses& s) { return s.l_unsup; });
    log.l_consistency = avg([](const StepLosses& s) { return s.l_cons; });
    log.l_dist = avg([](const StepLosses& s) { return s.l_dist; });
}

}  // namespace detail

struct TrainResult {
    Model model;
    std::vector<EpochLog> log;
    std::vector<std::string> policy_csvs;  // one per epoch for JOAO, else empty
    double best_val_acc = 0.0;
    std::size_t best_epoch = 0;
};

// Unsupervised pretraining over the corpus's unlabeled pool. No validation
// signal exists at this stage, so all epochs run.
inline TrainResult run_pretrain(const Corpus& corpus, const TrainConfig& cfg) {
    if (corpus.unlabeled.empty()) throw ContractError("run_pretrain: unlabeled pool is empty");
    TrainResult res;
    res.model = build_model(cfg.method, Phase::Pretrain, corpus.d_x, corpus.n_classes(), cfg);
    Adam adam(cfg.lr);
    std::vector<std::size_t> pool(corpus.unlabeled.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    const std::uint64_t step_base = sub_seed(cfg.seed, "pretrain-step");
    std::uint64_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs_pretrain; ++epoch) {
        const auto chunks = detail::epoch_chunks(pool, cfg.batch_size,
                                                 sub_seed(cfg.seed, "batch", epoch), 2);
        std::vector<StepLosses> steps;
        for (const auto& chunk : chunks) {
            if (chunk.size() < 2) continue;
            steps.push_back(pretrain_step(res.model, adam,
                                          gather_graphs(corpus.unlabeled, chunk),
                                          sub_seed(step_base, step)));
            ++step;
        }
        EpochLog lg;
        lg.epoch = epoch;
        detail::merge_losses(steps, lg);
        res.log.push_back(lg);
        if (cfg.method == Method::JOAO) res.policy_csvs.push_back(res.model.policy.to_csv());
    }
    return res;
}

namespace detail {

inline void assert_no_leak(const Corpus& corpus, const std::vector<std::size_t>& train,
                           const std::vector<std::size_t>& test) {
    std::unordered_set<std::string> train_ids;
    for (std::size_t i : train) train_ids.insert(corpus.labeled[i].claim_id);
    for (std::size_t i : test) {
        if (train_ids.count(corpus.labeled[i].claim_id)) {
            throw ContractError("test claim '" + corpus.labeled[i].claim_id +
                                "' appears in the training set");
        }
    }
}

}  // namespace detail

// Supervised training of an already-built model on split.train with early
// stopping on split.val accuracy. Restores the best-validation parameters.
inline TrainResult run_supervised(Model model, const Corpus& corpus, const Split& split,
                                  const TrainConfig& cfg) {
    if (split.train.empty() || split.val.empty()) {
        throw ContractError("run_supervised: train and val must be nonempty");
    }
    detail::assert_no_leak(corpus, split.train, split.test);
    TrainResult res;
    res.model = std::move(model);
    Adam adam(cfg.lr);
    std::vector<std::size_t> train = split.train;
    std::sort(train.begin(), train.end());
    ParamStore best_params = res.model.params;
    double best_acc = -1.0;
    std::size_t best_epoch = 0, since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs_finetune; ++epoch) {
        const auto chunks = detail::epoch_chunks(train, cfg.batch_size,
                                                 sub_seed(cfg.seed, "batch", epoch), 1);
        std::vector<StepLosses> steps;
        for (const auto& chunk : chunks) {
            TapeParams tp(res.model.params);
            const Batch b = make_batch(gather_graphs(corpus.labeled, chunk));
            Value loss = supervised_loss(res.model, tp, b);
            StepLosses sl;
            sl.l_sup = loss->out.item();
            steps.push_back(sl);
            backward(loss);
            adam.step(res.model.params, tp);
        }
        EpochLog lg;
        lg.epoch = epoch;
        detail::merge_losses(steps, lg);
        lg.val_acc = accuracy_on(res.model, corpus.labeled, split.val);
        res.log.push_back(lg);
        if (*lg.val_acc > best_acc) {
            best_acc = *lg.val_acc;
            best_epoch = epoch;
            best_params = res.model.params;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    res.model.params = best_params;
    res.best_val_acc = best_acc;
    res.best_epoch = best_epoch;
    return res;
}

inline TrainResult run_finetune(const Model& pretrained, const Corpus& corpus, const Split& split,
                                const TrainConfig& cfg) {
    return run_supervised(transfer_encoder(pretrained, corpus.n_classes(), cfg), corpus, split, cfg);
}

inline TrainResult run_scratch(const Corpus& corpus, const Split& split, const TrainConfig& cfg) {
    return run_supervised(build_model(cfg.method, Phase::Finetune, corpus.d_x, corpus.n_classes(), cfg),
                          corpus, split, cfg);
}

// Joint semi-supervised training. Each step takes labeled_per_batch labeled
// claims and tops the batch up with unlabeled ones (Full mode); the epoch is
// one pass over the labeled pool.
inline TrainResult run_semi_supervised(const Corpus& corpus, const Split& split,
                                       const TrainConfig& cfg,
                                       AblationMode mode = AblationMode::Full) {
    if (split.train.empty() || split.val.empty()) {
        throw ContractError("run_semi_supervised: train and val must be nonempty");
    }
    if (mode == AblationMode::Full && corpus.unlabeled.empty()) {
        throw ContractError("run_semi_supervised: unlabeled pool is empty");
    }
    detail::assert_no_leak(corpus, split.train, split.test);
    TrainResult res;
    res.model = build_model(cfg.method, Phase::Semi, corpus.d_x, corpus.n_classes(), cfg);
    Adam adam(cfg.lr);
    std::vector<std::size_t> train = split.train;
    std::sort(train.begin(), train.end());
    const std::size_t per_batch = std::min(cfg.labeled_per_batch, train.size());
    const std::size_t unlabeled_per_batch =
        mode == AblationMode::Full ? cfg.batch_size - std::min(cfg.batch_size, per_batch) : 0;
    detail::CyclingSampler usampler(std::max<std::size_t>(corpus.unlabeled.size(), 1),
                                    sub_seed(cfg.seed, "ubatch"));
    const std::uint64_t step_base = sub_seed(cfg.seed, "semi-step");
    std::uint64_t step = 0;
    ParamStore best_params = res.model.params;
    AugmentationPolicy best_policy = res.model.policy;
    double best_acc = -1.0;
    std::size_t best_epoch = 0, since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs_finetune; ++epoch) {
        const auto chunks =
            detail::epoch_chunks(train, per_batch, sub_seed(cfg.seed, "batch", epoch), 1);
        std::vector<StepLosses> steps;
        for (const auto& chunk : chunks) {
            std::vector<const GraphData*> labeled = gather_graphs(corpus.labeled, chunk);
            std::vector<const GraphData*> combined = labeled;
            if (unlabeled_per_batch > 0) {
                for (std::size_t u : usampler.take(unlabeled_per_batch)) {
                    combined.push_back(&corpus.unlabeled[u]);
                }
            }
            if (mode != AblationMode::SupOnly && combined.size() < 2) continue;
            steps.push_back(semi_step(res.model, adam, labeled, combined, mode,
                                      sub_seed(step_base, step)));
            ++step;
        }
        EpochLog lg;
        lg.epoch = epoch;
        detail::merge_losses(steps, lg);
        lg.val_acc = accuracy_on(res.model, corpus.labeled, split.val);
        res.log.push_back(lg);
        if (cfg.method == Method::JOAO && mode != AblationMode::SupOnly) {
            res.policy_csvs.push_back(res.model.policy.to_csv());
        }
        if (*lg.val_acc > best_acc) {
            best_acc = *lg.val_acc;
            best_epoch = epoch;
            best_params = res.model.params;
            best_policy = res.model.policy;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    res.model.params = best_params;
    res.model.policy = best_policy;
    res.best_val_acc = best_acc;
    res.best_epoch = best_epoch;
    return res;
}

}  // namespace graphssl
