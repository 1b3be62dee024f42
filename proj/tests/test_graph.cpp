#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "graphssl/corpus.hpp"
#include "graphssl/errors.hpp"
#include "graphssl/featurize.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/synth.hpp"

#include "helpers.hpp"

using namespace graphssl;
using Catch::Approx;

static Claim chain_claim(std::size_t n) {
    Claim c;
    c.claim_id = "chain";
    c.label = "rumor";
    for (std::size_t i = 0; i < n; ++i) {
        Post p;
        p.id = "p" + std::to_string(i);
        if (i > 0) p.parent = "p" + std::to_string(i - 1);
        p.text = "tok" + std::to_string(i);
        c.posts.push_back(p);
    }
    return c;
}

// ---------------------------------------------------------------------------
// trees

TEST_CASE("build_tree accepts a chain and exposes depths and children") {
    const PropagationTree t = build_tree(chain_claim(5));
    REQUIRE(t.n == 5);
    REQUIRE(t.root == 0);
    REQUIRE(t.parent == std::vector<int>{-1, 0, 1, 2, 3});
    REQUIRE(t.depths() == std::vector<std::size_t>{0, 1, 2, 3, 4});
    const auto ch = t.children();
    REQUIRE(ch[0] == std::vector<std::size_t>{1});
    REQUIRE(ch[4].empty());
    REQUIRE(t.edges().size() == 4);
}

TEST_CASE("build_tree rejects malformed claims") {
    SECTION("no posts") {
        Claim c;
        c.claim_id = "x";
        REQUIRE_THROWS_AS(build_tree(c), RecordError);
    }
    SECTION("duplicate post id") {
        Claim c = chain_claim(3);
        c.posts[2].id = "p1";
        REQUIRE_THROWS_AS(build_tree(c), RecordError);
    }
    SECTION("unknown parent") {
        Claim c = chain_claim(3);
        c.posts[2].parent = "nope";
        REQUIRE_THROWS_AS(build_tree(c), RecordError);
    }
    SECTION("self parent") {
        Claim c = chain_claim(3);
        c.posts[2].parent = "p2";
        REQUIRE_THROWS_AS(build_tree(c), RecordError);
    }
    SECTION("two roots") {
        Claim c = chain_claim(3);
        c.posts[1].parent.reset();
        REQUIRE_THROWS_AS(build_tree(c), RecordError);
    }
    SECTION("cycle") {
        Claim c = chain_claim(4);
        c.posts[1].parent = "p3";  // 1 -> 3 -> 2 -> 1
        REQUIRE_THROWS_AS(build_tree(c), RecordError);
    }
}

TEST_CASE("make_batch packs offsets, roots and labels") {
    GraphData a = testutil::random_graph(3, 4, 1, "a", 0);
    GraphData b = testutil::random_graph(5, 4, 2, "b", 1);
    Batch batch = make_batch({&a, &b});
    REQUIRE(batch.n_graphs == 2);
    REQUIRE(batch.n_nodes == 8);
    REQUIRE(batch.d == 4);
    REQUIRE(batch.offsets == std::vector<std::size_t>{0, 3, 8});
    REQUIRE(batch.roots == std::vector<std::size_t>{0, 3});
    REQUIRE(batch.labels == std::vector<int>{0, 1});
    REQUIRE(batch.graph_id == std::vector<int>{0, 0, 0, 1, 1, 1, 1, 1});
    REQUIRE(batch.edges.size() == 2 + 4);
    for (std::size_t i = 0; i < 3 * 4; ++i) REQUIRE(batch.x[i] == a.x[i]);
    for (std::size_t i = 0; i < 5 * 4; ++i) REQUIRE(batch.x[3 * 4 + i] == b.x[i]);
}

TEST_CASE("gcn_operator matches the dense normalized adjacency") {
    GraphData g = testutil::random_graph(7, 3, 5, "g");
    Batch batch = make_batch({&g});
    const std::size_t n = batch.n_nodes;
    // dense oracle: D^{-1/2} (A+I) D^{-1/2}
    std::vector<double> adj(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) adj[i * n + i] = 1.0;
    for (const auto& e : batch.edges) {
        adj[e[0] * n + e[1]] = 1.0;
        adj[e[1] * n + e[0]] = 1.0;
    }
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) deg[i] += adj[i * n + j];
    }
    std::vector<double> want(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            want[i * n + j] = adj[i * n + j] / std::sqrt(deg[i] * deg[j]);
        }
    }
    std::vector<double> got(n * n, 0.0);
    const SparseMatrix s = batch.gcn_operator();
    for (std::size_t k = 0; k < s.val.size(); ++k) got[s.row[k] * n + s.col[k]] += s.val[k];
    for (std::size_t i = 0; i < n * n; ++i) REQUIRE(got[i] == Approx(want[i]).margin(1e-12));
}

TEST_CASE("gin_operator matches A plus scaled identity") {
    GraphData g = testutil::random_graph(6, 3, 8, "g");
    Batch batch = make_batch({&g});
    const std::size_t n = batch.n_nodes;
    const double eps = 0.25;
    std::vector<double> want(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) want[i * n + i] = 1.0 + eps;
    for (const auto& e : batch.edges) {
        want[e[0] * n + e[1]] += 1.0;
        want[e[1] * n + e[0]] += 1.0;
    }
    std::vector<double> got(n * n, 0.0);
    const SparseMatrix s = batch.gin_operator(eps);
    for (std::size_t k = 0; k < s.val.size(); ++k) got[s.row[k] * n + s.col[k]] += s.val[k];
    for (std::size_t i = 0; i < n * n; ++i) REQUIRE(got[i] == Approx(want[i]).margin(1e-12));
}

// ---------------------------------------------------------------------------
// featurization

TEST_CASE("tokenize lowercases ascii and splits on unicode spaces") {
    REQUIRE(tokenize("Hello  World") == std::vector<std::string>{"hello", "world"});
    REQUIRE(tokenize("  a\tb\nc ") == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(tokenize("").empty());
    // U+3000 ideographic space separates, CJK text passes through intact
    REQUIRE(tokenize("\xE8\xB0\xA3\xE8\xA8\x80\xE3\x80\x80ok") ==
            std::vector<std::string>{"\xE8\xB0\xA3\xE8\xA8\x80", "ok"});
}

TEST_CASE("featurize_text hashes into unit-norm buckets") {
    const Tensor v = featurize_text("a b c a", 16);
    double norm = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) norm += v[i] * v[i];
    REQUIRE(norm == Approx(1.0).epsilon(1e-12));
    // expected bucket pattern from the token hash
    Tensor want = Tensor::zeros({16});
    want[fnv1a64("a") % 16] += 2.0;
    want[fnv1a64("b") % 16] += 1.0;
    want[fnv1a64("c") % 16] += 1.0;
    double wn = 0.0;
    for (std::size_t i = 0; i < 16; ++i) wn += want[i] * want[i];
    for (std::size_t i = 0; i < 16; ++i) {
        REQUIRE(v[i] == Approx(want[i] / std::sqrt(wn)).margin(1e-12));
    }
    const Tensor zero = featurize_text("   ", 16);
    for (std::size_t i = 0; i < zero.size(); ++i) REQUIRE(zero[i] == 0.0);
    REQUIRE_THROWS_AS(featurize_text("x", 1), DimensionError);
}

// ---------------------------------------------------------------------------
// corpus io

static const std::vector<std::string> kLabels = {"non-rumor", "rumor"};

TEST_CASE("parse_corpus_text splits labeled and unlabeled claims") {
    const std::string text =
        R"({"claim_id":"c1","label":"rumor","posts":[{"id":"p0","parent":null,"text":"src"},{"id":"p1","parent":"p0","text":"re"}]})"
        "\n"
        R"({"claim_id":"c2","label":null,"posts":[{"id":"p0","parent":null,"text":"just text"}]})"
        "\n\n"
        R"({"claim_id":"c3","label":"non-rumor","posts":[{"id":"p0","parent":null,"text":"x"}]})"
        "\n";
    const Corpus c = parse_corpus_text(text, kLabels, 8);
    REQUIRE(c.labeled.size() == 2);
    REQUIRE(c.unlabeled.size() == 1);
    REQUIRE(c.labeled[0].claim_id == "c1");
    REQUIRE(c.labeled[0].label == 1);
    REQUIRE(c.labeled[1].label == 0);
    REQUIRE(c.unlabeled[0].label == -1);
    REQUIRE(c.labeled[0].tree.n == 2);
    REQUIRE(c.labeled[0].x.rows() == 2);
    REQUIRE(c.labeled[0].x.cols() == 8);
    REQUIRE(c.n_classes() == 2);
}

TEST_CASE("corpus serialization round-trips canonically") {
    SynthConfig cfg;
    cfg.n_labeled = 6;
    cfg.n_unlabeled = 3;
    cfg.vocab_size = 30;
    cfg.avg_posts = 4;
    cfg.seed = 5;
    cfg.d_x = 8;
    const Corpus a = generate_synthetic_corpus(cfg);
    const std::string text = serialize_corpus(a);
    const Corpus b = parse_corpus_text(text, a.label_set, a.d_x);
    REQUIRE(serialize_corpus(b) == text);
    REQUIRE(b.labeled.size() == a.labeled.size());
    REQUIRE(b.unlabeled.size() == a.unlabeled.size());
    for (std::size_t i = 0; i < a.labeled.size(); ++i) {
        REQUIRE(b.labeled[i].claim_id == a.labeled[i].claim_id);
        REQUIRE(b.labeled[i].label == a.labeled[i].label);
        REQUIRE(b.labeled[i].tree.parent == a.labeled[i].tree.parent);
        for (std::size_t j = 0; j < a.labeled[i].x.size(); ++j) {
            REQUIRE(b.labeled[i].x[j] == a.labeled[i].x[j]);
        }
    }
}

TEST_CASE("corpus parse errors carry context") {
    REQUIRE_THROWS_AS(parse_corpus_text("{oops\n", kLabels, 8), ParseError);
    try {
        parse_corpus_text("\n\n{oops\n", kLabels, 8);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
    }
    const std::string dup =
        R"({"claim_id":"c1","label":null,"posts":[{"id":"p0","parent":null,"text":"x"}]})"
        "\n"
        R"({"claim_id":"c1","label":null,"posts":[{"id":"p0","parent":null,"text":"x"}]})"
        "\n";
    REQUIRE_THROWS_AS(parse_corpus_text(dup, kLabels, 8), RecordError);
    REQUIRE_THROWS_AS(
        parse_corpus_text(
            R"({"claim_id":"c1","label":"who knows","posts":[{"id":"p0","parent":null,"text":"x"}]})",
            kLabels, 8),
        RecordError);
    REQUIRE_THROWS_AS(
        parse_corpus_text(
            R"({"claim_id":"c1","label":null,"posts":[],"extra":1})", kLabels, 8),
        RecordError);
    REQUIRE_THROWS_AS(
        parse_corpus_text(R"({"claim_id":"c1","label":null,"posts":[]})", kLabels, 8),
        RecordError);
    REQUIRE_THROWS_AS(
        parse_corpus_text(R"({"claim_id":"c1","posts":[{"id":"p0","parent":null,"text":"x"}]})",
                          kLabels, 8),
        RecordError);
}

TEST_CASE("corpus_hash prefixes sha256 of the exact bytes") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "gssl_hash_probe.jsonl").string();
    const std::string content = "{\"x\": 1}\nnot even parsed\n";
    write_file(path, content);
    REQUIRE(corpus_hash(path) == "sha256:" + sha256_hex(content));
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(read_file("/nonexistent/gssl"), ParseError);
}

// ---------------------------------------------------------------------------
// splitting

static Corpus tiny_corpus(std::size_t n_labeled, std::size_t n_unlabeled, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_labeled = n_labeled;
    cfg.n_unlabeled = n_unlabeled;
    cfg.vocab_size = 40;
    cfg.avg_posts = 4;
    cfg.seed = seed;
    cfg.d_x = 10;
    return generate_synthetic_corpus(cfg);
}

TEST_CASE("split_corpus partitions every claim exactly once, stratified") {
    const Corpus c = tiny_corpus(40, 0, 2);
    const Split s = split_corpus(c, {0.5, 0.25, 0.25}, 77);
    REQUIRE(s.train.size() == 20);
    REQUIRE(s.val.size() == 10);
    REQUIRE(s.test.size() == 10);
    std::vector<std::size_t> all;
    for (auto part : {&s.train, &s.val, &s.test}) {
        all.insert(all.end(), part->begin(), part->end());
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);
    // each part carries both classes at the stratified proportion
    for (auto part : {&s.train, &s.val, &s.test}) {
        std::size_t pos = 0;
        for (std::size_t idx : *part) pos += c.labeled[idx].label == 1 ? 1 : 0;
        REQUIRE(pos * 2 == part->size());
    }
    const Split again = split_corpus(c, {0.5, 0.25, 0.25}, 77);
    REQUIRE(again.train == s.train);
    REQUIRE(again.val == s.val);
    REQUIRE(again.test == s.test);
    const Split other = split_corpus(c, {0.5, 0.25, 0.25}, 78);
    REQUIRE(other.train != s.train);
}

TEST_CASE("split_corpus rejects bad ratios and starved classes") {
    const Corpus c = tiny_corpus(40, 0, 2);
    REQUIRE_THROWS_AS(split_corpus(c, {0.5, 0.4, 0.2}, 1), ConfigError);
    const Corpus small = tiny_corpus(4, 0, 3);
    // 2 claims per class cannot fill three subsets
    REQUIRE_THROWS_AS(split_corpus(small, {0.8, 0.1, 0.1}, 1), StratifyError);
}

TEST_CASE("stratified_subset draws balanced subsets deterministically") {
    const Corpus c = tiny_corpus(40, 0, 4);
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < c.labeled.size(); ++i) pool.push_back(i);
    const auto sub = stratified_subset(c, pool, 10, 55);
    REQUIRE(sub.size() == 10);
    std::set<std::size_t> uniq(sub.begin(), sub.end());
    REQUIRE(uniq.size() == 10);
    std::size_t pos = 0;
    for (std::size_t idx : sub) pos += c.labeled[idx].label == 1 ? 1 : 0;
    REQUIRE(pos == 5);
    REQUIRE(stratified_subset(c, pool, 10, 55) == sub);
    REQUIRE_THROWS_AS(stratified_subset(c, pool, 41, 55), StratifyError);
    REQUIRE_THROWS_AS(stratified_subset(c, pool, 1, 55), StratifyError);
}

TEST_CASE("allocate_counts uses largest remainders and sums to n") {
    const auto c = allocate_counts(10, {0.8, 0.1, 0.1});
    REQUIRE(c[0] + c[1] + c[2] == 10);
    REQUIRE(c[0] == 8);
    const auto odd = allocate_counts(7, {0.5, 0.25, 0.25});
    REQUIRE(odd[0] + odd[1] + odd[2] == 7);
    REQUIRE(odd[0] >= 3);
}

// ---------------------------------------------------------------------------
// synthetic corpus

TEST_CASE("synthetic corpus is deterministic and balanced") {
    SynthConfig cfg;
    cfg.n_labeled = 30;
    cfg.n_unlabeled = 10;
    cfg.vocab_size = 50;
    cfg.avg_posts = 5;
    cfg.seed = 9;
    cfg.d_x = 12;
    const Corpus a = generate_synthetic_corpus(cfg);
    const Corpus b = generate_synthetic_corpus(cfg);
    REQUIRE(serialize_corpus(a) == serialize_corpus(b));
    REQUIRE(a.labeled.size() == 30);
    REQUIRE(a.unlabeled.size() == 10);
    std::size_t rumors = 0;
    for (const GraphData& g : a.labeled) rumors += g.label == 1 ? 1 : 0;
    REQUIRE(rumors == 15);
    cfg.seed = 10;
    REQUIRE(serialize_corpus(generate_synthetic_corpus(cfg)) != serialize_corpus(a));
}

TEST_CASE("synthetic recipes separate structure by class") {
    SynthConfig cfg;
    cfg.n_labeled = 300;
    cfg.n_unlabeled = 0;
    cfg.vocab_size = 50;
    cfg.avg_posts = 8;
    cfg.seed = 14;
    cfg.d_x = 12;
    const Corpus c = generate_synthetic_corpus(cfg);
    double rumor_depth = 0.0, other_depth = 0.0;
    std::size_t rn = 0, on = 0;
    for (const GraphData& g : c.labeled) {
        const auto d = g.tree.depths();
        const double mx = static_cast<double>(*std::max_element(d.begin(), d.end()));
        if (g.label == 1) {
            rumor_depth += mx;
            ++rn;
        } else {
            other_depth += mx;
            ++on;
        }
    }
    // chain-biased rumor trees run deeper than star-biased non-rumor trees
    REQUIRE(rumor_depth / static_cast<double>(rn) > other_depth / static_cast<double>(on) + 1.0);
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.avg_posts = 1;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig{};
    cfg.class_separation = 1.5;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig{};
    cfg.vocab_size = 2;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("summarize_corpus counts labels posts and the unlabeled pool") {
    const Corpus c = tiny_corpus(10, 4, 6);
    const auto s = summarize_corpus(c);
    REQUIRE(s["claims"].get<std::size_t>() == 14);
    REQUIRE(s["unlabeled"].get<std::size_t>() == 4);
    REQUIRE(s["per_class"]["rumor"].get<std::size_t>() == 5);
    REQUIRE(s["per_class"]["non-rumor"].get<std::size_t>() == 5);
    REQUIRE(s["avg_posts"].get<double>() > 1.0);
}
