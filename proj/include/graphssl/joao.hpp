#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "graphssl/augment.hpp"
#include "graphssl/autodiff.hpp"
#include "graphssl/encoders.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/params.hpp"

namespace graphssl {

constexpr std::size_t kPolicyCells = 25;  // 5 x 5 augmentation pairs

// Joint sampling distribution over augmentation pairs, row-major: cell
// (i, j) = probability of applying kind i to view 1 and kind j to view 2.
struct AugmentationPolicy {
    std::array<double, kPolicyCells> p{};

    static AugmentationPolicy uniform() {
        AugmentationPolicy pol;
        pol.p.fill(1.0 / static_cast<double>(kPolicyCells));
        return pol;
    }

    double at(std::size_t i, std::size_t j) const { return p[i * 5 + j]; }

    void validate() const {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) throw ContractError("policy has a negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ContractError("policy mass " + std::to_string(sum) + " is not 1");
        }
    }

    std::string to_csv() const {
        std::string out = "A1/A2";
        for (const char* name : kAugKindNames) {
            out += ',';
            out += name;
        }
        out += '\n';
        char buf[32];
        for (std::size_t i = 0; i < 5; ++i) {
            out += kAugKindNames[i];
            for (std::size_t j = 0; j < 5; ++j) {
                std::snprintf(buf, sizeof(buf), ",%.17g", at(i, j));
                out += buf;
            }
            out += '\n';
        }
        return out;
    }
};

// Euclidean projection onto the probability simplex (sort and threshold).
inline std::vector<double> simplex_project(std::vector<double> v) {
    const std::size_t n = v.size();
    if (n == 0) throw ContractError("simplex_project: empty vector");
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t k = 0; k < n; ++k) {
        running += u[k];
        const double t = (running - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) {
            rho = k + 1;
            theta = t;
        }
    }
    (void)rho;
    for (double& x : v) x = std::max(x - theta, 0.0);
    return v;
}

inline AugmentationPolicy simplex_project(const AugmentationPolicy& raw) {
    std::vector<double> v(raw.p.begin(), raw.p.end());
    v = simplex_project(std::move(v));
    AugmentationPolicy out;
    std::copy(v.begin(), v.end(), out.p.begin());
    return out;
}

// L_dist = -1/2 * sum (p_ij - 1/25)^2; always <= 0, zero only at uniform.
inline double distribution_penalty(const AugmentationPolicy& policy) {
    const double u = 1.0 / static_cast<double>(kPolicyCells);
    double s = 0.0;
    for (double v : policy.p) s += (v - u) * (v - u);
    return -0.5 * s;
}

struct JoaoHyper {
    double lambda = 1.0;
    double aug_ratio = 0.2;
    double lower_lr = 0.01;
};

struct JoaoLoss {
    Value total;                          // sum_ij p_ij * l_ij, on the tape
    std::array<double, kPolicyCells> table{};  // detached l_ij values
};

namespace detail {

// One NT-Xent-style cell: positives are same-graph view pairs, negatives the
// per-anchor log-mean-exp over other graphs. sim is raw cosine (no
// temperature).
inline Value joao_cell_loss(const Value& z1n, const Value& z2n, std::size_t g) {
    Value sims = matmul_nt(z1n, z2n);  // [g x g] cosines
    auto masks = [&] {
        Tensor pos = Tensor::identity(g);
        Tensor off = Tensor::full({g, g}, 1.0);
        for (std::size_t i = 0; i < g; ++i) off[i * g + i] = 0.0;
        return std::make_pair(pos, off);
    }();
    Value pos_mean = mean_all(select_mask(sims, masks.first));
    Value lse = row_logsumexp_masked(sims, masks.second);
    Value neg_term = add_scalar(mean_all(lse), -std::log(static_cast<double>(g - 1)));
    return add(neg(pos_mean), neg_term);
}

}  // namespace detail

// Evaluates all 25 policy cells on one batch. Each (kind, side) view set is
// encoded once and reused across the cells that reference it; cell (i, j)
// contrasts side-1 views of kind i against side-2 views of kind j. View draws
// are keyed to (seed, side, kind, claim_id) so graph order cannot change them.
inline JoaoLoss joao_contrastive_loss(TapeParams& tp, const Encoder& enc,
                                      const std::vector<const GraphData*>& graphs,
                                      const AugmentationPolicy& policy, double aug_ratio,
                                      std::uint64_t seed) {
    const std::size_t g = graphs.size();
    if (g < 2) throw ContractError("joao_contrastive_loss: batch must hold >= 2 graphs");
    policy.validate();
    std::array<Value, 10> views;  // [side*5 + kind] -> normalized [g x d_h]
    for (std::size_t side = 0; side < 2; ++side) {
        for (std::size_t kind = 0; kind < 5; ++kind) {
            std::vector<GraphData> aug_graphs;
            aug_graphs.reserve(g);
            std::vector<const GraphData*> ptrs;
            ptrs.reserve(g);
            const std::uint64_t view_seed = sub_seed(seed, side * 5 + kind);
            for (const GraphData* gd : graphs) {
                aug_graphs.push_back(augment(*gd, static_cast<AugKind>(kind), aug_ratio,
                                             sub_seed(view_seed, fnv1a64(gd->claim_id))));
            }
            for (const GraphData& a : aug_graphs) ptrs.push_back(&a);
            const Batch b = make_batch(ptrs);
            Value emb = mean_readout(enc.forward(tp, b, constant(b.x)).back(), b);
            views[side * 5 + kind] = l2_normalize_rows(emb);
        }
    }
    JoaoLoss out;
    Value total;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            Value cell = detail::joao_cell_loss(views[i], views[5 + j], g);
            out.table[i * 5 + j] = cell->out.item();
            Value weighted = scale(cell, policy.at(i, j));
            total = total ? add(total, weighted) : weighted;
        }
    }
    out.total = total;
    return out;
}

// Lower-level objective as a tape expression of the policy (encoder fixed):
// dot(p, l) + lambda * (-1/2 |p - u|^2). Used by the gradient suite; the
// training loop uses the closed-form gradient below.
inline Value joao_lower_loss(const Value& p, const std::array<double, kPolicyCells>& table,
                             double lambda) {
    if (p->out.size() != kPolicyCells) throw DimensionError("joao_lower_loss: policy size");
    Tensor lt = Tensor::zeros({kPolicyCells});
    for (std::size_t i = 0; i < kPolicyCells; ++i) lt[i] = table[i];
    Value dot = sum_all(mul(p, constant(lt)));
    Value diff = add_scalar(p, -1.0 / static_cast<double>(kPolicyCells));
    Value penalty = scale(sum_all(mul(diff, diff)), -0.5);
    return add(dot, scale(penalty, lambda));
}

// Projected gradient ascent step on the policy: p <- proj(p + lr*(l - lambda*(p-u))).
inline AugmentationPolicy policy_ascent_step(const AugmentationPolicy& policy,
                                             const std::array<double, kPolicyCells>& table,
                                             double lambda, double lower_lr) {
    AugmentationPolicy next = policy;
    const double u = 1.0 / static_cast<double>(kPolicyCells);
    for (std::size_t i = 0; i < kPolicyCells; ++i) {
        next.p[i] = policy.p[i] + lower_lr * (table[i] - lambda * (policy.p[i] - u));
    }
    return simplex_project(next);
}

}  // namespace graphssl
