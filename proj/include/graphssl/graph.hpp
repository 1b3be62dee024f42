#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphssl/errors.hpp"
#include "graphssl/tensor.hpp"

namespace graphssl {

struct Post {
    std::string id;
    std::optional<std::string> parent;  // nullopt for the source post
    std::string text;
};

struct Claim {
    std::string claim_id;
    std::string label;
    std::vector<Post> posts;
};

// Reply tree of one claim. parent[i] is the index of post i's parent, -1 at
// the root. Validated on construction: exactly one root, every parent id
// resolves, and the parent relation is acyclic.
struct PropagationTree {
    std::size_t n = 0;
    std::vector<int> parent;
    std::size_t root = 0;

    std::vector<std::vector<std::size_t>> children() const {
        std::vector<std::vector<std::size_t>> ch(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (parent[i] >= 0) ch[static_cast<std::size_t>(parent[i])].push_back(i);
        }
        return ch;
    }

    // Undirected edge list, one entry per (parent, child) pair.
    std::vector<std::array<std::size_t, 2>> edges() const {
        std::vector<std::array<std::size_t, 2>> e;
        e.reserve(n == 0 ? 0 : n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (parent[i] >= 0) e.push_back({static_cast<std::size_t>(parent[i]), i});
        }
        return e;
    }

    std::vector<std::size_t> depths() const {
        std::vector<std::size_t> d(n, 0);
        // parent[i] was validated to come before cycles; walk up with a cap.
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t depth = 0;
            int cur = static_cast<int>(i);
            while (parent[static_cast<std::size_t>(cur)] >= 0) {
                cur = parent[static_cast<std::size_t>(cur)];
                ++depth;
            }
            d[i] = depth;
        }
        return d;
    }
};

inline PropagationTree build_tree(const Claim& claim) {
    const std::size_t n = claim.posts.size();
    if (n == 0) throw RecordError(claim.claim_id, "claim has no posts");
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!index.emplace(claim.posts[i].id, i).second) {
            throw RecordError(claim.claim_id, "duplicate post id '" + claim.posts[i].id + "'");
        }
    }
    PropagationTree t;
    t.n = n;
    t.parent.assign(n, -1);
    std::size_t roots = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = claim.posts[i].parent;
        if (!p.has_value()) {
            t.root = i;
            ++roots;
            continue;
        }
        auto it = index.find(*p);
        if (it == index.end()) {
            throw RecordError(claim.claim_id, "post '" + claim.posts[i].id +
                                                  "' references unknown parent '" + *p + "'");
        }
        if (it->second == i) {
            throw RecordError(claim.claim_id, "post '" + claim.posts[i].id + "' is its own parent");
        }
        t.parent[i] = static_cast<int>(it->second);
    }
    if (roots != 1) {
        throw RecordError(claim.claim_id,
                          "expected exactly one root post, found " + std::to_string(roots));
    }
    // Cycle check: walking up from any node must reach the root within n steps.
    for (std::size_t i = 0; i < n; ++i) {
        int cur = static_cast<int>(i);
        std::size_t steps = 0;
        while (t.parent[static_cast<std::size_t>(cur)] >= 0) {
            cur = t.parent[static_cast<std::size_t>(cur)];
            if (++steps > n) throw RecordError(claim.claim_id, "parent references form a cycle");
        }
    }
    return t;
}

// One claim ready for the models: tree structure, node features, label.
// label is a class index; -1 marks an unlabeled claim.
struct GraphData {
    std::string claim_id;
    PropagationTree tree;
    Tensor x;  // [n x d]
    int label = -1;
};

// A packed minibatch. Node rows of all graphs are stacked; graph_id maps each
// row back to its graph and offsets give contiguous per-graph ranges.
struct Batch {
    Tensor x;                                       // [n_nodes x d]
    std::vector<std::array<std::size_t, 2>> edges;  // undirected, global indices
    std::vector<int> graph_id;                      // per node
    std::vector<std::size_t> offsets;               // size n_graphs + 1
    std::vector<std::size_t> roots;                 // global root index per graph
    std::vector<int> labels;                        // per graph, -1 if unlabeled
    std::size_t n_graphs = 0;
    std::size_t n_nodes = 0;
    std::size_t d = 0;

    // Symmetric-normalized operator D^{-1/2} (A + I) D^{-1/2} over the
    // undirected edges, self-loops included in the degree.
    SparseMatrix gcn_operator() const {
        std::vector<double> deg(n_nodes, 1.0);
        for (const auto& e : edges) {
            deg[e[0]] += 1.0;
            deg[e[1]] += 1.0;
        }
        std::vector<double> dinv(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) dinv[i] = 1.0 / std::sqrt(deg[i]);
        SparseMatrix s;
        s.n = n_nodes;
        s.reserve(n_nodes + 2 * edges.size());
        for (std::size_t i = 0; i < n_nodes; ++i) s.add_entry(i, i, dinv[i] * dinv[i]);
        for (const auto& e : edges) {
            const double w = dinv[e[0]] * dinv[e[1]];
            s.add_entry(e[0], e[1], w);
            s.add_entry(e[1], e[0], w);
        }
        return s;
    }

    // Neighborhood-sum operator A + (1 + eps) I.
    SparseMatrix gin_operator(double eps) const {
        SparseMatrix s;
        s.n = n_nodes;
        s.reserve(n_nodes + 2 * edges.size());
        for (std::size_t i = 0; i < n_nodes; ++i) s.add_entry(i, i, 1.0 + eps);
        for (const auto& e : edges) {
            s.add_entry(e[0], e[1], 1.0);
            s.add_entry(e[1], e[0], 1.0);
        }
        return s;
    }
};

inline Batch make_batch(const std::vector<const GraphData*>& graphs) {
    if (graphs.empty()) throw ContractError("make_batch: empty batch");
    Batch b;
    b.n_graphs = graphs.size();
    b.d = graphs[0]->x.cols();
    b.offsets.push_back(0);
    for (const GraphData* g : graphs) {
        if (g->x.cols() != b.d) throw DimensionError("make_batch: feature width mismatch");
        if (g->x.rows() != g->tree.n) throw DimensionError("make_batch: feature rows vs tree size");
        b.n_nodes += g->tree.n;
        b.offsets.push_back(b.n_nodes);
    }
    b.x = Tensor::zeros({b.n_nodes, b.d});
    b.graph_id.resize(b.n_nodes);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const GraphData& g = *graphs[gi];
        const std::size_t off = b.offsets[gi];
        for (std::size_t i = 0; i < g.tree.n; ++i) {
            b.graph_id[off + i] = static_cast<int>(gi);
            for (std::size_t j = 0; j < b.d; ++j) b.x[(off + i) * b.d + j] = g.x[i * b.d + j];
        }
        for (const auto& e : g.tree.edges()) b.edges.push_back({off + e[0], off + e[1]});
        b.roots.push_back(off + g.tree.root);
        b.labels.push_back(g.label);
    }
    return b;
}

}  // namespace graphssl
