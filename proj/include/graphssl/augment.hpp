#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_set>
#include <vector>

#include "graphssl/errors.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/rng.hpp"

namespace graphssl {

enum class AugKind { NodeDrop = 0, Subgraph = 1, EdgePert = 2, AttrMask = 3, Identical = 4 };

constexpr std::array<const char*, 5> kAugKindNames = {"NodeDrop", "Subgraph", "EdgePert",
                                                      "AttrMask", "Identical"};

namespace detail {

// Rebuilds a GraphData keeping `kept` (must contain the root). Each kept
// node's parent becomes its nearest kept ancestor.
inline GraphData induce_subtree(const GraphData& g, const std::vector<bool>& kept) {
    std::vector<int> new_index(g.tree.n, -1);
    std::size_t n_new = 0;
    for (std::size_t i = 0; i < g.tree.n; ++i) {
        if (kept[i]) new_index[i] = static_cast<int>(n_new++);
    }
    GraphData out;
    out.claim_id = g.claim_id;
    out.label = g.label;
    out.tree.n = n_new;
    out.tree.parent.assign(n_new, -1);
    const std::size_t d = g.x.cols();
    out.x = Tensor::zeros({n_new, d});
    for (std::size_t i = 0; i < g.tree.n; ++i) {
        if (!kept[i]) continue;
        const std::size_t ni = static_cast<std::size_t>(new_index[i]);
        for (std::size_t j = 0; j < d; ++j) out.x[ni * d + j] = g.x[i * d + j];
        if (i == g.tree.root) {
            out.tree.root = ni;
            continue;
        }
        int anc = g.tree.parent[i];
        while (anc >= 0 && !kept[static_cast<std::size_t>(anc)]) {
            anc = g.tree.parent[static_cast<std::size_t>(anc)];
        }
        out.tree.parent[ni] = new_index[static_cast<std::size_t>(anc)];
    }
    return out;
}

inline std::vector<std::size_t> non_root_sample(const PropagationTree& t, std::size_t count,
                                                Rng& rng) {
    std::vector<std::size_t> others;
    others.reserve(t.n - 1);
    for (std::size_t i = 0; i < t.n; ++i) {
        if (i != t.root) others.push_back(i);
    }
    std::vector<std::size_t> picked;
    for (std::size_t pos : rng.sample_without_replacement(others.size(), count)) {
        picked.push_back(others[pos]);
    }
    return picked;
}

}  // namespace detail

inline GraphData augment_node_drop(const GraphData& g, double ratio, Rng& rng) {
    const std::size_t n_drop = static_cast<std::size_t>(ratio * static_cast<double>(g.tree.n));
    if (n_drop == 0 || g.tree.n < 2) return g;
    std::vector<bool> kept(g.tree.n, true);
    for (std::size_t v : detail::non_root_sample(g.tree, n_drop, rng)) kept[v] = false;
    return detail::induce_subtree(g, kept);
}

// Random walk from the root over tree neighbors until ceil((1-ratio)*|V|)
// distinct nodes are visited. A visited set grown this way always contains
// each node's parent, so the induced parent links need no reconnection.
inline GraphData augment_subgraph(const GraphData& g, double ratio, Rng& rng) {
    const std::size_t target = static_cast<std::size_t>(
        std::ceil((1.0 - ratio) * static_cast<double>(g.tree.n)));
    if (target >= g.tree.n || target == 0) return g;
    std::vector<std::vector<std::size_t>> nbr(g.tree.n);
    for (const auto& e : g.tree.edges()) {
        nbr[e[0]].push_back(e[1]);
        nbr[e[1]].push_back(e[0]);
    }
    std::vector<bool> kept(g.tree.n, false);
    kept[g.tree.root] = true;
    std::size_t n_kept = 1;
    std::size_t cur = g.tree.root;
    const std::size_t step_cap = 50 * g.tree.n;
    for (std::size_t step = 0; step < step_cap && n_kept < target; ++step) {
        cur = nbr[cur][rng.uniform_index(nbr[cur].size())];
        if (!kept[cur]) {
            kept[cur] = true;
            ++n_kept;
        }
    }
    if (n_kept < target) {
        // walk stalled; top up in BFS order from the kept frontier
        std::deque<std::size_t> q;
        for (std::size_t i = 0; i < g.tree.n; ++i) {
            if (kept[i]) q.push_back(i);
        }
        while (n_kept < target && !q.empty()) {
            const std::size_t u = q.front();
            q.pop_front();
            for (std::size_t v : nbr[u]) {
                if (!kept[v] && n_kept < target) {
                    kept[v] = true;
                    ++n_kept;
                    q.push_back(v);
                }
            }
        }
    }
    return detail::induce_subtree(g, kept);
}

// Reassigns floor(ratio*(|V|-1)) children to new parents chosen uniformly
// outside their own subtree. The no-descendant rule keeps the result a tree.
inline GraphData augment_edge_pert(const GraphData& g, double ratio, Rng& rng) {
    const std::size_t n_edges = g.tree.n > 0 ? g.tree.n - 1 : 0;
    const std::size_t n_rewire = static_cast<std::size_t>(ratio * static_cast<double>(n_edges));
    if (n_rewire == 0) return g;
    GraphData out = g;
    std::vector<std::size_t> children = detail::non_root_sample(out.tree, n_rewire, rng);
    for (std::size_t c : children) {
        // current subtree of c under the evolving tree
        std::vector<bool> in_subtree(out.tree.n, false);
        in_subtree[c] = true;
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t v = 0; v < out.tree.n; ++v) {
                if (!in_subtree[v] && out.tree.parent[v] >= 0 &&
                    in_subtree[static_cast<std::size_t>(out.tree.parent[v])]) {
                    in_subtree[v] = true;
                    grew = true;
                }
            }
        }
        std::vector<std::size_t> candidates;
        for (std::size_t v = 0; v < out.tree.n; ++v) {
            if (!in_subtree[v] && static_cast<int>(v) != out.tree.parent[c]) candidates.push_back(v);
        }
        if (candidates.empty()) continue;
        out.tree.parent[c] = static_cast<int>(candidates[rng.uniform_index(candidates.size())]);
    }
    return out;
}

inline GraphData augment_attr_mask(const GraphData& g, double ratio, Rng& rng) {
    const std::size_t n_mask = static_cast<std::size_t>(ratio * static_cast<double>(g.tree.n));
    if (n_mask == 0 || g.tree.n < 2) return g;
    GraphData out = g;
    const std::size_t d = out.x.cols();
    for (std::size_t v : detail::non_root_sample(out.tree, n_mask, rng)) {
        for (std::size_t j = 0; j < d; ++j) out.x[v * d + j] = 0.0;
    }
    return out;
}

// The root is never dropped or masked; operators that cannot act on a graph
// this small return it unchanged.
inline GraphData augment(const GraphData& g, AugKind kind, double aug_ratio, std::uint64_t seed) {
    if (g.tree.n == 0) throw ContractError("augment: empty graph");
    if (aug_ratio <= 0.0 || aug_ratio >= 1.0) throw ConfigError("augment: ratio must be in (0,1)");
    Rng rng(seed);
    switch (kind) {
        case AugKind::NodeDrop: return augment_node_drop(g, aug_ratio, rng);
        case AugKind::Subgraph: return augment_subgraph(g, aug_ratio, rng);
        case AugKind::EdgePert: return augment_edge_pert(g, aug_ratio, rng);
        case AugKind::AttrMask: return augment_attr_mask(g, aug_ratio, rng);
        case AugKind::Identical: return g;
    }
    return g;
}

}  // namespace graphssl
