#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "graphssl/autodiff.hpp"
#include "graphssl/training.hpp"

namespace graphssl {

// Finite-difference audit of every loss construction the trainers optimize.
// Each case builds a tiny deterministic problem, takes analytic gradients for
// all parameters the loss touches, and compares against central differences.

struct GradSuiteCase {
    std::string name;
    double worst = 0.0;
};

namespace detail {

inline GraphData random_graph(std::uint64_t seed, std::size_t index, std::size_t d_x, int label) {
    Rng rng(sub_seed(seed, index));
    const std::size_t n = 3 + rng.uniform_index(5);
    PropagationTree tree;
    tree.n = n;
    tree.root = 0;
    tree.parent.assign(n, -1);
    for (std::size_t i = 1; i < n; ++i) {
        tree.parent[i] = static_cast<int>(rng.uniform_index(i));
    }
    GraphData g;
    g.claim_id = "g" + std::to_string(index);
    g.tree = std::move(tree);
    g.label = label;
    g.x = Tensor::zeros({n, d_x});
    for (std::size_t i = 0; i < g.x.size(); ++i) g.x[i] = 0.7 * rng.normal();
    return g;
}

inline std::vector<GraphData> random_graphs(std::uint64_t seed, std::size_t count, std::size_t d_x,
                                            bool labeled) {
    std::vector<GraphData> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(random_graph(seed, i, d_x, labeled ? static_cast<int>(i % 2) : -1));
    }
    return out;
}

inline std::vector<const GraphData*> ptrs_of(const std::vector<GraphData>& gs) {
    std::vector<const GraphData*> out;
    out.reserve(gs.size());
    for (const GraphData& g : gs) out.push_back(&g);
    return out;
}

// Gradients are checked at a generic point: fresh models have zero biases, and
// dead ReLU units then sit exactly on the kink where one-sided derivatives
// differ and finite differences are meaningless.
inline void jitter_params(ParamStore& store, std::uint64_t seed) {
    for (auto& [name, t] : store.raw()) {
        Rng rng(sub_seed(sub_seed(seed, "jitter"), name));
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.2 * rng.normal();
    }
}

// Sweeps every parameter the loss binds: analytic gradient from one backward
// pass, then two full rebuilds per scalar entry for the central difference.
inline double check_store(ParamStore& store, const std::function<Value(TapeParams&)>& build,
                          double eps, double floor = 1e-4) {
    if (eps < 1e-7 || eps > 1e-3) throw ContractError("check_store: eps outside [1e-7, 1e-3]");
    TapeParams tape(store);
    Value loss = build(tape);
    if (loss->out.size() != 1) throw ContractError("check_store: loss must be scalar");
    backward(loss);
    std::map<std::string, Tensor> analytic;
    for (const auto& [name, leaf] : tape.bound()) analytic[name] = grad(leaf);
    double worst = 0.0;
    for (auto& [name, ag] : analytic) {
        Tensor& t = store.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t[i];
            t[i] = orig + eps;
            TapeParams tp(store);
            const double fp = build(tp)->out.item();
            t[i] = orig - eps;
            TapeParams tm(store);
            const double fm = build(tm)->out.item();
            t[i] = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double err =
                std::abs(ag[i] - fd) / std::max(floor, std::abs(ag[i]) + std::abs(fd));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline TrainConfig tiny_train_config(Method m, std::uint64_t seed) {
    TrainConfig tc;
    tc.method = m;
    tc.d_h = 5;
    tc.layers = 2;
    tc.d_p = 4;
    tc.alpha = 0.3;
    tc.beta = 0.3;
    tc.lambda = 1.0;
    tc.gamma = 2.0;
    tc.aug_ratio = 0.3;
    tc.mask_rate = 0.5;
    tc.replace_rate = 0.3;
    tc.seed = seed;
    return tc;
}

constexpr std::size_t kTinyDx = 6;

inline double trial_supervised_ce(std::uint64_t seed, double eps) {
    const auto gs = random_graphs(seed, 4, kTinyDx, true);
    Model model = build_model(Method::GraphMAE, Phase::Finetune, kTinyDx, 2,
                              tiny_train_config(Method::GraphMAE, seed));
    jitter_params(model.params, seed);
    const Batch b = make_batch(ptrs_of(gs));
    return check_store(model.params,
                       [&](TapeParams& tp) { return supervised_loss(model, tp, b); }, eps);
}

inline double trial_infograph_mi(std::uint64_t seed, double eps) {
    const auto gs = random_graphs(seed, 4, kTinyDx, false);
    Model model = build_model(Method::InfoGraph, Phase::Pretrain, kTinyDx, 2,
                              tiny_train_config(Method::InfoGraph, seed));
    jitter_params(model.params, seed);
    const Batch b = make_batch(ptrs_of(gs));
    return check_store(
        model.params,
        [&](TapeParams& tp) { return infograph_unsup_loss(tp, model.encoder(), model.disc1(), b); },
        eps);
}

inline double trial_infograph_consistency(std::uint64_t seed, double eps) {
    const auto gs = random_graphs(seed, 4, kTinyDx, false);
    Model model = build_model(Method::InfoGraph, Phase::Semi, kTinyDx, 2,
                              tiny_train_config(Method::InfoGraph, seed));
    jitter_params(model.params, seed);
    const Batch b = make_batch(ptrs_of(gs));
    return check_store(model.params,
                       [&](TapeParams& tp) {
                           return consistency_loss(tp, model.encoder(), model.encoder("enc2"),
                                                   model.disc2(), b);
                       },
                       eps);
}

inline double trial_infograph_semi(std::uint64_t seed, double eps) {
    const auto labeled = random_graphs(seed, 4, kTinyDx, true);
    const auto extra = random_graphs(sub_seed(seed, "extra"), 2, kTinyDx, false);
    Model model = build_model(Method::InfoGraph, Phase::Semi, kTinyDx, 2,
                              tiny_train_config(Method::InfoGraph, seed));
    jitter_params(model.params, seed);
    const Batch lb = make_batch(ptrs_of(labeled));
    std::vector<const GraphData*> both = ptrs_of(labeled);
    for (const GraphData& g : extra) both.push_back(&g);
    const Batch cb = make_batch(both);
    return check_store(model.params,
                       [&](TapeParams& tp) {
                           return infograph_semi_loss(tp, model.encoder(), model.encoder("enc2"),
                                                      model.disc1(), model.disc2(), lb, cb, 0.3,
                                                      0.3, 2, model.init_seed)
                               .total;
                       },
                       eps);
}

inline double trial_joao_minmax(std::uint64_t seed, double eps) {
    const auto gs = random_graphs(seed, 4, kTinyDx, false);
    Model model = build_model(Method::JOAO, Phase::Pretrain, kTinyDx, 2,
                              tiny_train_config(Method::JOAO, seed));
    jitter_params(model.params, seed);
    const auto ptrs = ptrs_of(gs);
    Rng prng(sub_seed(seed, "policy"));
    AugmentationPolicy policy;
    for (double& v : policy.p) v = prng.uniform(0.0, 1.0);
    policy = simplex_project(policy);
    const std::uint64_t aug_seed = sub_seed(seed, "aug");
    // upper level: gradient of the policy-weighted contrastive loss wrt theta
    const double upper = check_store(
        model.params,
        [&](TapeParams& tp) {
            return joao_contrastive_loss(tp, model.encoder(), ptrs, policy, 0.3, aug_seed).total;
        },
        eps);
    // lower level: gradient of dot(p, l) + lambda * penalty wrt the policy
    TapeParams tp0(model.params);
    const JoaoLoss at_theta =
        joao_contrastive_loss(tp0, model.encoder(), ptrs, policy, 0.3, aug_seed);
    Tensor pt = Tensor::zeros({kPolicyCells});
    for (std::size_t i = 0; i < kPolicyCells; ++i) pt[i] = policy.p[i];
    const double lower = grad_check(
        [&](const Value& p) { return joao_lower_loss(p, at_theta.table, 1.0); }, pt, eps);
    return std::max(upper, lower);
}

inline double trial_graphmae_sce(std::uint64_t seed, double eps) {
    const auto gs = random_graphs(seed, 4, kTinyDx, false);
    Model model = build_model(Method::GraphMAE, Phase::Pretrain, kTinyDx, 2,
                              tiny_train_config(Method::GraphMAE, seed));
    jitter_params(model.params, seed);
    const Batch b = make_batch(ptrs_of(gs));
    const MaskSpec spec{0.5, 0.3};
    const std::uint64_t mask_seed = sub_seed(seed, "mask");
    return check_store(model.params,
                       [&](TapeParams& tp) {
                           return graphmae_unsup_loss(tp, model.encoder(), b, spec, 2.0, mask_seed)
                               .loss;
                       },
                       eps);
}

inline double trial_graphmae_semi(std::uint64_t seed, double eps) {
    const auto labeled = random_graphs(seed, 4, kTinyDx, true);
    const auto extra = random_graphs(sub_seed(seed, "extra"), 2, kTinyDx, false);
    Model model = build_model(Method::GraphMAE, Phase::Semi, kTinyDx, 2,
                              tiny_train_config(Method::GraphMAE, seed));
    jitter_params(model.params, seed);
    const Batch lb = make_batch(ptrs_of(labeled));
    std::vector<const GraphData*> both = ptrs_of(labeled);
    for (const GraphData& g : extra) both.push_back(&g);
    const Batch cb = make_batch(both);
    const MaskSpec spec{0.5, 0.3};
    const std::uint64_t mask_seed = sub_seed(seed, "mask");
    return check_store(model.params,
                       [&](TapeParams& tp) {
                           return graphmae_semi_loss(tp, model.encoder(), lb, cb, spec, 0.3, 2.0, 2,
                                                     model.init_seed, mask_seed)
                               .total;
                       },
                       eps);
}

}  // namespace detail

// Runs every construction `trials` times on fresh random problems and reports
// the worst relative error seen per construction.
inline std::vector<GradSuiteCase> run_gradient_suite(std::size_t trials = 20, double eps = 1e-6) {
    using TrialFn = double (*)(std::uint64_t, double);
    const std::pair<const char*, TrialFn> cases[] = {
        {"supervised_ce", &detail::trial_supervised_ce},
        {"infograph_mi", &detail::trial_infograph_mi},
        {"infograph_consistency", &detail::trial_infograph_consistency},
        {"infograph_semi", &detail::trial_infograph_semi},
        {"joao_minmax", &detail::trial_joao_minmax},
        {"graphmae_sce", &detail::trial_graphmae_sce},
        {"graphmae_semi", &detail::trial_graphmae_semi},
    };
    std::vector<GradSuiteCase> out;
    const std::uint64_t base = 0x5eedf00dULL;
    for (const auto& [name, fn] : cases) {
        GradSuiteCase c;
        c.name = name;
        for (std::size_t t = 0; t < trials; ++t) {
            c.worst = std::max(c.worst, fn(sub_seed(sub_seed(base, name), t), eps));
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace graphssl
