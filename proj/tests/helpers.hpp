#pragma once

// Shared oracles and builders for the test binaries. Everything here is
// implemented independently of the library's own code paths so the two sides
// can disagree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "graphssl/graph.hpp"
#include "graphssl/rng.hpp"
#include "graphssl/tensor.hpp"

namespace testutil {

// Euclidean projection onto the probability simplex by bisection on the
// shift tau in sum_i max(v_i - tau, 0) = 1.
inline std::vector<double> simplex_project_bisect(const std::vector<double>& v) {
    double lo = *std::min_element(v.begin(), v.end()) - 1.0;
    double hi = *std::max_element(v.begin(), v.end());
    for (int it = 0; it < 200; ++it) {
        const double tau = 0.5 * (lo + hi);
        double s = 0.0;
        for (double x : v) s += std::max(x - tau, 0.0);
        if (s > 1.0) {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    const double tau = 0.5 * (lo + hi);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - tau, 0.0);
    return out;
}

inline double chi_square_stat(const std::vector<std::size_t>& observed, double expected_each) {
    double stat = 0.0;
    for (std::size_t o : observed) {
        const double d = static_cast<double>(o) - expected_each;
        stat += d * d / expected_each;
    }
    return stat;
}

// Dense triple-loop matmul, the reference for every Tensor/autodiff product.
inline graphssl::Tensor dense_matmul(const graphssl::Tensor& a, const graphssl::Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    graphssl::Tensor c = graphssl::Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += a.at(i, t) * b.at(t, j);
            c[i * n + j] = s;
        }
    }
    return c;
}

inline graphssl::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                                      double scale = 1.0) {
    graphssl::Tensor t = graphssl::Tensor::zeros(std::move(shape));
    graphssl::Rng rng(seed);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

// Random tree on n nodes, node 0 the root, each later node attaching to a
// uniformly chosen predecessor.
inline graphssl::GraphData random_graph(std::size_t n, std::size_t d, std::uint64_t seed,
                                        const std::string& claim_id, int label = -1) {
    graphssl::Rng rng(seed);
    graphssl::GraphData g;
    g.claim_id = claim_id;
    g.label = label;
    g.tree.n = n;
    g.tree.root = 0;
    g.tree.parent.assign(n, -1);
    for (std::size_t i = 1; i < n; ++i) {
        g.tree.parent[i] = static_cast<int>(rng.uniform_index(i));
    }
    g.x = graphssl::Tensor::zeros({n, d});
    for (std::size_t i = 0; i < n * d; ++i) g.x[i] = 0.8 * rng.normal();
    return g;
}

// Applies a node permutation to a graph: node i of the output is node
// perm[i] of the input.
inline graphssl::GraphData permute_graph(const graphssl::GraphData& g,
                                         const std::vector<std::size_t>& perm) {
    const std::size_t n = g.tree.n;
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
    graphssl::GraphData out;
    out.claim_id = g.claim_id;
    out.label = g.label;
    out.tree.n = n;
    out.tree.parent.assign(n, -1);
    out.tree.root = inv[g.tree.root];
    const std::size_t d = g.x.cols();
    out.x = graphssl::Tensor::zeros({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = perm[i];
        if (g.tree.parent[src] >= 0) {
            out.tree.parent[i] = static_cast<int>(inv[static_cast<std::size_t>(g.tree.parent[src])]);
        }
        for (std::size_t j = 0; j < d; ++j) out.x[i * d + j] = g.x[src * d + j];
    }
    return out;
}

// Checks that a parent array still encodes a tree rooted at `root`: one -1
// entry, all others resolve, and every walk up terminates.
inline bool is_valid_tree(const graphssl::PropagationTree& t) {
    if (t.n == 0) return false;
    std::size_t roots = 0;
    for (std::size_t i = 0; i < t.n; ++i) {
        if (t.parent[i] < 0) {
            ++roots;
            if (i != t.root) return false;
        } else if (static_cast<std::size_t>(t.parent[i]) >= t.n) {
            return false;
        }
    }
    if (roots != 1) return false;
    for (std::size_t i = 0; i < t.n; ++i) {
        int cur = static_cast<int>(i);
        std::size_t steps = 0;
        while (t.parent[static_cast<std::size_t>(cur)] >= 0) {
            cur = t.parent[static_cast<std::size_t>(cur)];
            if (++steps > t.n) return false;
        }
    }
    return true;
}

}  // namespace testutil
