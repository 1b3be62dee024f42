#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "graphssl/errors.hpp"
#include "graphssl/featurize.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/rng.hpp"
#include "graphssl/sha256.hpp"

namespace graphssl {

using json = nlohmann::ordered_json;

// A parsed corpus. Claims keep their raw text for canonical re-serialization;
// graphs carry the featurized form the models consume. Index i of claims and
// graphs refer to the same claim. Immutable after construction.
struct Corpus {
    std::vector<std::string> label_set;
    std::size_t d_x = 0;
    std::vector<Claim> labeled_claims;
    std::vector<Claim> unlabeled_claims;
    std::vector<GraphData> labeled;
    std::vector<GraphData> unlabeled;

    int label_index(const std::string& label) const {
        for (std::size_t i = 0; i < label_set.size(); ++i) {
            if (label_set[i] == label) return static_cast<int>(i);
        }
        return -1;
    }

    std::size_t n_classes() const { return label_set.size(); }
};

namespace detail {

inline Claim claim_from_json(const json& rec) {
    if (!rec.is_object()) throw RecordError("record is not a JSON object");
    for (const auto& [key, _] : rec.items()) {
        if (key != "claim_id" && key != "label" && key != "posts") {
            throw RecordError("unknown key '" + key + "'");
        }
    }
    if (!rec.contains("claim_id") || !rec["claim_id"].is_string()) {
        throw RecordError("missing or non-string claim_id");
    }
    Claim c;
    c.claim_id = rec["claim_id"].get<std::string>();
    if (!rec.contains("label")) throw RecordError(c.claim_id, "missing label field");
    if (rec["label"].is_string()) {
        c.label = rec["label"].get<std::string>();
    } else if (!rec["label"].is_null()) {
        throw RecordError(c.claim_id, "label must be a string or null");
    }
    if (!rec.contains("posts") || !rec["posts"].is_array() || rec["posts"].empty()) {
        throw RecordError(c.claim_id, "posts must be a nonempty array");
    }
    for (const auto& p : rec["posts"]) {
        if (!p.is_object() || !p.contains("id") || !p["id"].is_string() || !p.contains("parent") ||
            !p.contains("text") || !p["text"].is_string()) {
            throw RecordError(c.claim_id, "post must have id (string), parent (string|null), text (string)");
        }
        Post post;
        post.id = p["id"].get<std::string>();
        if (p["parent"].is_string()) {
            post.parent = p["parent"].get<std::string>();
        } else if (!p["parent"].is_null()) {
            throw RecordError(c.claim_id, "post parent must be a string or null");
        }
        post.text = p["text"].get<std::string>();
        c.posts.push_back(std::move(post));
    }
    return c;
}

inline json claim_to_json(const Claim& c) {
    json rec;
    rec["claim_id"] = c.claim_id;
    if (c.label.empty()) {
        rec["label"] = nullptr;
    } else {
        rec["label"] = c.label;
    }
    json posts = json::array();
    for (const Post& p : c.posts) {
        json pj;
        pj["id"] = p.id;
        if (p.parent.has_value()) {
            pj["parent"] = *p.parent;
        } else {
            pj["parent"] = nullptr;
        }
        pj["text"] = p.text;
        posts.push_back(std::move(pj));
    }
    rec["posts"] = std::move(posts);
    return rec;
}

}  // namespace detail

// Claim.label uses "" for unlabeled internally; the wire format uses null.
inline std::string canonical_line(const Claim& c) { return detail::claim_to_json(c).dump(); }

inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const Claim& c : corpus.labeled_claims) {
        out += canonical_line(c);
        out += '\n';
    }
    for (const Claim& c : corpus.unlabeled_claims) {
        out += canonical_line(c);
        out += '\n';
    }
    return out;
}

inline Corpus parse_corpus_text(const std::string& text, const std::vector<std::string>& label_set,
                                std::size_t d_x = 128) {
    Corpus corpus;
    corpus.label_set = label_set;
    corpus.d_x = d_x;
    std::unordered_set<std::string> seen_ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        Claim claim = detail::claim_from_json(rec);
        if (!seen_ids.insert(claim.claim_id).second) {
            throw RecordError(claim.claim_id, "duplicate claim_id");
        }
        GraphData g;
        g.claim_id = claim.claim_id;
        g.tree = build_tree(claim);
        g.x = featurize_posts(claim.posts, d_x);
        if (claim.label.empty()) {
            g.label = -1;
            corpus.unlabeled.push_back(std::move(g));
            corpus.unlabeled_claims.push_back(std::move(claim));
        } else {
            g.label = corpus.label_index(claim.label);
            if (g.label < 0) {
                throw RecordError(claim.claim_id, "unknown label '" + claim.label + "'");
            }
            corpus.labeled.push_back(std::move(g));
            corpus.labeled_claims.push_back(std::move(claim));
        }
    }
    return corpus;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    out << content;
    if (!out) throw ParseError("write failed: " + path);
}

inline Corpus parse_corpus(const std::string& path, const std::vector<std::string>& label_set,
                           std::size_t d_x = 128) {
    return parse_corpus_text(read_file(path), label_set, d_x);
}

// Content hash over the exact file bytes, for results provenance.
inline std::string corpus_hash(const std::string& path) {
    return "sha256:" + sha256_hex(read_file(path));
}

inline json summarize_corpus(const Corpus& corpus) {
    json s;
    s["claims"] = corpus.labeled_claims.size() + corpus.unlabeled_claims.size();
    json per_class;
    for (const std::string& label : corpus.label_set) per_class[label] = 0;
    for (const Claim& c : corpus.labeled_claims) {
        per_class[c.label] = per_class[c.label].get<std::size_t>() + 1;
    }
    s["per_class"] = std::move(per_class);
    s["unlabeled"] = corpus.unlabeled_claims.size();
    std::size_t posts = 0;
    for (const Claim& c : corpus.labeled_claims) posts += c.posts.size();
    for (const Claim& c : corpus.unlabeled_claims) posts += c.posts.size();
    const std::size_t total = corpus.labeled_claims.size() + corpus.unlabeled_claims.size();
    s["avg_posts"] = total == 0 ? 0.0 : static_cast<double>(posts) / static_cast<double>(total);
    return s;
}

// ---------------------------------------------------------------------------
// Stratified splitting

struct Split {
    std::vector<std::size_t> train, val, test;  // indices into corpus.labeled
};

// Largest-remainder allocation of n items to the three ratios.
inline std::array<std::size_t, 3> allocate_counts(std::size_t n, const std::array<double, 3>& ratios) {
    std::array<std::size_t, 3> base{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double target = ratios[static_cast<std::size_t>(i)] * static_cast<double>(n);
        base[static_cast<std::size_t>(i)] = static_cast<std::size_t>(target);
        frac[static_cast<std::size_t>(i)] = target - static_cast<double>(base[static_cast<std::size_t>(i)]);
        assigned += base[static_cast<std::size_t>(i)];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (frac[static_cast<std::size_t>(i)] > frac[static_cast<std::size_t>(best)]) best = i;
        }
        base[static_cast<std::size_t>(best)] += 1;
        frac[static_cast<std::size_t>(best)] = -1.0;
        ++assigned;
    }
    return base;
}

// Stratified by label, deterministic given seed. Each class shuffles its own
// index pool with a class-specific sub-seed, then allocates train/val/test by
// largest remainder.
inline Split split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                          std::uint64_t seed) {
    const double rsum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(rsum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    Split split;
    for (std::size_t c = 0; c < corpus.label_set.size(); ++c) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < corpus.labeled.size(); ++i) {
            if (corpus.labeled[i].label == static_cast<int>(c)) pool.push_back(i);
        }
        const auto counts = allocate_counts(pool.size(), ratios);
        if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0) {
            throw StratifyError("class '" + corpus.label_set[c] + "' has " +
                                std::to_string(pool.size()) +
                                " claims, too few for every subset at the given ratios");
        }
        Rng rng(sub_seed(sub_seed(seed, "split"), c));
        rng.shuffle(pool);
        split.train.insert(split.train.end(), pool.begin(), pool.begin() + static_cast<long>(counts[0]));
        split.val.insert(split.val.end(), pool.begin() + static_cast<long>(counts[0]),
                         pool.begin() + static_cast<long>(counts[0] + counts[1]));
        split.test.insert(split.test.end(), pool.begin() + static_cast<long>(counts[0] + counts[1]),
                          pool.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

// Stratified k-claim subset of `pool` (indices into corpus.labeled), class
// counts by largest remainder over the pool's class proportions.
inline std::vector<std::size_t> stratified_subset(const Corpus& corpus,
                                                  const std::vector<std::size_t>& pool, std::size_t k,
                                                  std::uint64_t seed) {
    if (k > pool.size()) throw StratifyError("requested subset larger than pool");
    const std::size_t n_classes = corpus.n_classes();
    if (k < n_classes) throw StratifyError("subset size below class count");
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t idx : pool) {
        by_class[static_cast<std::size_t>(corpus.labeled[idx].label)].push_back(idx);
    }
    // per-class quota proportional to pool composition, at least 1
    std::vector<std::size_t> quota(n_classes, 0);
    std::vector<double> frac(n_classes, 0.0);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (by_class[c].empty()) throw StratifyError("class '" + corpus.label_set[c] + "' empty in pool");
        const double target =
            static_cast<double>(k) * static_cast<double>(by_class[c].size()) / static_cast<double>(pool.size());
        quota[c] = std::max<std::size_t>(1, static_cast<std::size_t>(target));
        frac[c] = target - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    while (assigned < k) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < n_classes; ++c) {
            if (frac[c] > frac[best]) best = c;
        }
        quota[best] += 1;
        frac[best] = -1.0;
        ++assigned;
    }
    while (assigned > k) {
        std::size_t best = 0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            if (quota[c] > quota[best]) best = c;
        }
        if (quota[best] <= 1) throw StratifyError("cannot satisfy per-class minimum at k");
        quota[best] -= 1;
        --assigned;
    }
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (quota[c] > by_class[c].size()) {
            throw StratifyError("class '" + corpus.label_set[c] + "' too small for quota");
        }
        Rng rng(sub_seed(sub_seed(seed, "subset"), c));
        for (std::size_t pos : rng.sample_without_replacement(by_class[c].size(), quota[c])) {
            out.push_back(by_class[c][pos]);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace graphssl
