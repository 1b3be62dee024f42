#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "graphssl/corpus.hpp"
#include "graphssl/errors.hpp"
#include "graphssl/rng.hpp"

namespace graphssl {

struct SynthConfig {
    std::size_t n_labeled = 200;
    std::size_t n_unlabeled = 2000;
    std::size_t vocab_size = 500;
    double avg_posts = 10.0;
    double class_separation = 0.5;
    std::uint64_t seed = 0;
    std::size_t d_x = 128;

    void validate() const {
        if (avg_posts < 2.0) throw ConfigError("avg_posts must be >= 2");
        if (class_separation < 0.0 || class_separation > 1.0) {
            throw ConfigError("class_separation must be in [0,1]");
        }
        if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4");
    }
};

namespace detail {

// Zipf-flavored baseline over the vocabulary; the rumor recipe draws from the
// same weights rotated half the vocabulary away, mixed in with probability
// class_separation. At separation 0 the two recipes emit identical text
// distributions.
class VocabSampler {
public:
    explicit VocabSampler(std::size_t vocab_size) : cum_(vocab_size) {
        double total = 0.0;
        for (std::size_t r = 0; r < vocab_size; ++r) {
            total += 1.0 / static_cast<double>(r + 3);
            cum_[r] = total;
        }
        for (double& c : cum_) c /= total;
    }

    std::size_t draw_baseline(Rng& rng) const {
        const double u = rng.uniform();
        const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
        return std::min(static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1);
    }

    std::size_t draw(Rng& rng, bool rumor, double separation) const {
        const std::size_t base = draw_baseline(rng);
        if (rumor && rng.uniform() < separation) {
            return (base + cum_.size() / 2) % cum_.size();
        }
        return base;
    }

private:
    std::vector<double> cum_;
};

inline std::string synth_text(Rng& rng, const VocabSampler& vocab, bool rumor, double separation,
                              std::size_t min_tokens, double extra_mean) {
    const std::size_t n = min_tokens + static_cast<std::size_t>(rng.poisson(extra_mean));
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) text += ' ';
        text += 'w';
        text += std::to_string(vocab.draw(rng, rumor, separation));
    }
    return text;
}

// Rumor trees grow chain-biased (each post tends to answer the latest one);
// non-rumor trees star-biased (posts tend to answer the source directly).
inline Claim synth_claim(const std::string& claim_id, const std::string& label, bool rumor_recipe,
                         const SynthConfig& cfg, const VocabSampler& vocab, Rng& rng) {
    Claim c;
    c.claim_id = claim_id;
    c.label = label;
    const std::size_t n_posts = 1 + static_cast<std::size_t>(rng.poisson(cfg.avg_posts - 1.0));
    for (std::size_t i = 0; i < n_posts; ++i) {
        Post p;
        p.id = "p" + std::to_string(i);
        if (i > 0) {
            std::size_t parent;
            if (rng.uniform() < 0.8) {
                parent = rumor_recipe ? i - 1 : 0;
            } else {
                parent = static_cast<std::size_t>(rng.uniform_index(i));
            }
            p.parent = "p" + std::to_string(parent);
        }
        const std::size_t min_tokens = i == 0 ? 4 : 2;
        p.text = synth_text(rng, vocab, rumor_recipe, cfg.class_separation, min_tokens, 5.0);
        c.posts.push_back(std::move(p));
    }
    return c;
}

}  // namespace detail

// Balanced binary corpus with labels alternating across claim index; the
// unlabeled pool mixes both recipes 50/50 with no label recorded.
inline Corpus generate_synthetic_corpus(const SynthConfig& cfg) {
    cfg.validate();
    detail::VocabSampler vocab(cfg.vocab_size);
    Corpus corpus;
    corpus.label_set = {"non-rumor", "rumor"};
    corpus.d_x = cfg.d_x;
    char idbuf[32];
    for (std::size_t i = 0; i < cfg.n_labeled; ++i) {
        const bool rumor = i % 2 == 1;
        std::snprintf(idbuf, sizeof(idbuf), "c%06zu", i);
        Rng rng(sub_seed(sub_seed(cfg.seed, "claim"), i));
        Claim c = detail::synth_claim(idbuf, rumor ? "rumor" : "non-rumor", rumor, cfg, vocab, rng);
        GraphData g;
        g.claim_id = c.claim_id;
        g.tree = build_tree(c);
        g.x = featurize_posts(c.posts, cfg.d_x);
        g.label = rumor ? 1 : 0;
        corpus.labeled.push_back(std::move(g));
        corpus.labeled_claims.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < cfg.n_unlabeled; ++i) {
        const bool rumor = i % 2 == 1;
        std::snprintf(idbuf, sizeof(idbuf), "u%06zu", i);
        Rng rng(sub_seed(sub_seed(cfg.seed, "uclaim"), i));
        Claim c = detail::synth_claim(idbuf, "", rumor, cfg, vocab, rng);
        GraphData g;
        g.claim_id = c.claim_id;
        g.tree = build_tree(c);
        g.x = featurize_posts(c.posts, cfg.d_x);
        g.label = -1;
        corpus.unlabeled.push_back(std::move(g));
        corpus.unlabeled_claims.push_back(std::move(c));
    }
    return corpus;
}

}  // namespace graphssl
