#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphssl/checkpoint.hpp"
#include "graphssl/config.hpp"
#include "graphssl/experiments.hpp"
#include "graphssl/metrics.hpp"
#include "graphssl/synth.hpp"
#include "graphssl/training.hpp"

#include "helpers.hpp"

using namespace graphssl;
using Catch::Approx;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// metrics

TEST_CASE("confusion metrics match an enumeration oracle") {
    Rng rng(3001);
    const std::size_t n_classes = 3, n = 200;
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        preds[i] = static_cast<int>(rng.uniform_index(n_classes));
        labels[i] = static_cast<int>(rng.uniform_index(n_classes));
    }
    const MetricsReport r = confusion_metrics(preds, labels, n_classes);
    std::size_t correct = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool p = preds[i] == static_cast<int>(c);
            const bool a = labels[i] == static_cast<int>(c);
            if (p && a) ++tp;
            if (p && !a) ++fp;
            if (!p && a) ++fn;
        }
        correct += tp;
        const double prec = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        const double rec = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
        const double f1 = prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
        REQUIRE(r.per_class[c].precision == Approx(prec).margin(1e-12));
        REQUIRE(r.per_class[c].recall == Approx(rec).margin(1e-12));
        REQUIRE(r.per_class[c].f1 == Approx(f1).margin(1e-12));
        REQUIRE(r.confusion[c][c] == tp);
        REQUIRE_FALSE(r.per_class[c].zero_predictions);
    }
    REQUIRE(r.accuracy == Approx(double(correct) / double(n)).margin(1e-12));
}

TEST_CASE("never-predicted classes are flagged") {
    const MetricsReport r = confusion_metrics({0, 0, 0}, {0, 1, 0}, 2);
    REQUIRE(r.per_class[1].zero_predictions);
    REQUIRE(r.per_class[1].precision == 0.0);
    REQUIRE(r.per_class[1].f1 == 0.0);
    REQUIRE(r.per_class[0].recall == 1.0);
    REQUIRE_THROWS_AS(confusion_metrics({}, {}, 2), ContractError);
    REQUIRE_THROWS_AS(confusion_metrics({0, 2}, {0, 1}, 2), ContractError);
    REQUIRE_THROWS_AS(confusion_metrics({0}, {0, 1}, 2), ContractError);
}

TEST_CASE("aggregation formats population statistics") {
    REQUIRE(mean_of({1.0, 2.0, 3.0}) == Approx(2.0));
    REQUIRE(population_std({1.0, 2.0, 3.0}) == Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    REQUIRE(population_std({5.0}) == 0.0);
    REQUIRE(format_mean_std(0.5, 0.125) == "0.500±0.125");
    REQUIRE(aggregate_runs({0.8, 0.9}) == format_mean_std(mean_of({0.8, 0.9}),
                                                          population_std({0.8, 0.9})));
}

// ---------------------------------------------------------------------------
// checkpoints

TEST_CASE("checkpoints round-trip parameters bit-exactly") {
    ParamStore store;
    store.glorot("enc.w", 4, 3, 9);
    store.zeros("enc.b", {3});
    store.raw()["head.W"] = testutil::random_tensor({3, 2}, 10);
    ordered_json meta;
    meta["format"] = "graphssl-model";
    meta["note"] = 42;
    const std::string buf = encode_checkpoint(store, meta);
    const Checkpoint ck = decode_checkpoint(buf);
    REQUIRE(ck.meta["note"] == 42);
    REQUIRE(ck.params.size() == 3);
    for (const auto& [name, t] : store.raw()) {
        const Tensor& got = ck.params.at(name);
        REQUIRE(got.shape() == t.shape());
        for (std::size_t i = 0; i < t.size(); ++i) REQUIRE(got[i] == t[i]);
    }

    const std::string path =
        (std::filesystem::temp_directory_path() / "gssl_test_ck.bin").string();
    save_checkpoint(path, store, meta);
    const Checkpoint loaded = load_checkpoint(path);
    REQUIRE(encode_checkpoint(loaded.params, loaded.meta) == buf);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint decoding rejects corruption") {
    ParamStore store;
    store.zeros("w", {2});
    ordered_json meta;
    meta["k"] = 1;
    std::string buf = encode_checkpoint(store, meta);
    std::string bad_magic = buf;
    bad_magic[0] = 'X';
    REQUIRE_THROWS_AS(decode_checkpoint(bad_magic), ParseError);
    REQUIRE_THROWS_AS(decode_checkpoint(buf.substr(0, buf.size() - 3)), ParseError);
    REQUIRE_THROWS_AS(decode_checkpoint(std::string("short")), ParseError);
    REQUIRE_THROWS_AS(load_checkpoint("/nonexistent/gssl.ckpt"), ParseError);
}

// ---------------------------------------------------------------------------
// config

TEST_CASE("config json round-trips and rejects unknown keys") {
    RunConfig cfg;
    cfg.method = "joao";
    cfg.alpha = 0.7;
    cfg.k_values = {5, 9};
    const ordered_json j = config_to_json(cfg);
    RunConfig back;
    apply_config_json(back, j, "roundtrip");
    REQUIRE(config_to_json(back) == j);

    RunConfig fresh;
    ordered_json bad;
    bad["not_a_key"] = 1;
    try {
        apply_config_json(fresh, bad, "test.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("test.json") != std::string::npos);
        REQUIRE(msg.find("not_a_key") != std::string::npos);
    }
}

TEST_CASE("config validation names the offending key") {
    auto expect_bad = [](RunConfig cfg, const std::string& needle) {
        try {
            cfg.validate();
            FAIL("expected ConfigError for " + needle);
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    RunConfig cfg;
    cfg.method = "unknown";
    expect_bad(cfg, "method");
    cfg = RunConfig{};
    cfg.aug_ratio = 1.0;
    expect_bad(cfg, "aug_ratio");
    cfg = RunConfig{};
    cfg.labeled_per_batch = 64;
    expect_bad(cfg, "labeled_per_batch");
    cfg = RunConfig{};
    cfg.k_values = {10, 10};
    expect_bad(cfg, "k_values");
    cfg = RunConfig{};
    cfg.split_ratios = {0.5, 0.3, 0.3};
    expect_bad(cfg, "split_ratios");
    cfg = RunConfig{};
    cfg.label_set = {"rumor"};
    expect_bad(cfg, "label_set");
    cfg = RunConfig{};
    cfg.gamma = 0.5;
    expect_bad(cfg, "gamma");
    RunConfig ok;
    ok.corpus = "x.jsonl";
    ok.validate();
}

TEST_CASE("flag overrides beat file values which beat defaults") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "gssl_test_cfg.json").string();
    write_file(path, R"({"alpha": 0.9, "epochs_pretrain": 7, "corpus": "c.jsonl"})");
    ordered_json flags;
    flags["alpha"] = 0.25;
    const RunConfig cfg = resolve_config(path, flags);
    REQUIRE(cfg.alpha == 0.25);          // flag wins
    REQUIRE(cfg.epochs_pretrain == 7);   // file wins over default
    REQUIRE(cfg.beta == 0.3);            // untouched default
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(resolve_config("/nonexistent/cfg.json", ordered_json::object()),
                      ParseError);
}

TEST_CASE("train config carries the hyperparameters over") {
    RunConfig cfg;
    cfg.method = "graphmae";
    cfg.gamma = 3.0;
    cfg.batch_size = 24;
    const TrainConfig tc = cfg.train();
    REQUIRE(tc.method == Method::GraphMAE);
    REQUIRE(tc.gamma == 3.0);
    REQUIRE(tc.batch_size == 24);
}

// ---------------------------------------------------------------------------
// training

static Corpus train_corpus(std::size_t n_labeled, std::size_t n_unlabeled, std::uint64_t seed) {
    SynthConfig s;
    s.n_labeled = n_labeled;
    s.n_unlabeled = n_unlabeled;
    s.vocab_size = 40;
    s.avg_posts = 5;
    s.class_separation = 0.8;
    s.seed = seed;
    s.d_x = 8;
    return generate_synthetic_corpus(s);
}

static TrainConfig tiny_cfg(Method m, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.method = m;
    cfg.d_h = 5;
    cfg.layers = 2;
    cfg.d_p = 4;
    cfg.batch_size = 8;
    cfg.labeled_per_batch = 4;
    cfg.epochs_pretrain = 2;
    cfg.epochs_finetune = 3;
    cfg.patience = 10;
    cfg.aug_ratio = 0.3;
    cfg.seed = seed;
    return cfg;
}

static std::string params_bytes(const ParamStore& p) {
    return encode_checkpoint(p, ordered_json::object());
}

TEST_CASE("supervised training is deterministic in the seed") {
    const Corpus corpus = train_corpus(20, 0, 9001);
    const Split split = split_corpus(corpus, {0.5, 0.25, 0.25}, 3);
    const TrainConfig cfg = tiny_cfg(Method::GraphMAE, 11);
    TrainResult a = run_scratch(corpus, split, cfg);
    TrainResult b = run_scratch(corpus, split, cfg);
    REQUIRE(params_bytes(a.model.params) == params_bytes(b.model.params));
    REQUIRE(epoch_log_jsonl(a.log) == epoch_log_jsonl(b.log));
    REQUIRE(a.best_val_acc == b.best_val_acc);
    TrainConfig other = cfg;
    other.seed = 12;
    TrainResult c = run_scratch(corpus, split, other);
    REQUIRE(params_bytes(a.model.params) != params_bytes(c.model.params));
}

TEST_CASE("training rejects train/test leakage") {
    const Corpus corpus = train_corpus(12, 0, 9002);
    Split split;
    split.train = {0, 1, 2, 3};
    split.val = {4, 5};
    split.test = {3, 6};  // claim 3 leaks
    REQUIRE_THROWS_AS(run_scratch(corpus, split, tiny_cfg(Method::GraphMAE, 1)), ContractError);
}

TEST_CASE("pretraining logs one unsupervised entry per epoch for each method") {
    const Corpus corpus = train_corpus(0, 12, 9003);
    for (Method m : {Method::InfoGraph, Method::JOAO, Method::GraphMAE}) {
        const TrainConfig cfg = tiny_cfg(m, 21);
        const TrainResult r = run_pretrain(corpus, cfg);
        REQUIRE(r.log.size() == cfg.epochs_pretrain);
        for (const EpochLog& e : r.log) {
            REQUIRE(e.l_unsup.has_value());
            REQUIRE_FALSE(e.l_sup.has_value());
            REQUIRE(std::isfinite(*e.l_unsup));
        }
        if (m == Method::JOAO) {
            REQUIRE(r.policy_csvs.size() == cfg.epochs_pretrain);
            r.model.policy.validate();
            for (const EpochLog& e : r.log) REQUIRE(e.l_dist.has_value());
        } else {
            REQUIRE(r.policy_csvs.empty());
            for (const EpochLog& e : r.log) REQUIRE_FALSE(e.l_dist.has_value());
        }
    }
}

TEST_CASE("epoch log lines serialize all six keys with explicit nulls") {
    EpochLog e;
    e.epoch = 4;
    e.l_sup = 0.5;
    e.val_acc = 0.75;
    const std::string line = epoch_log_jsonl({e});
    const auto j = ordered_json::parse(line);
    REQUIRE(j["epoch"] == 4);
    REQUIRE(j["l_sup"] == 0.5);
    REQUIRE(j["l_unsup"].is_null());
    REQUIRE(j["l_consistency"].is_null());
    REQUIRE(j["l_dist"].is_null());
    REQUIRE(j["val_acc"] == 0.75);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    REQUIRE(keys == std::vector<std::string>{"epoch", "l_sup", "l_unsup", "l_consistency",
                                             "l_dist", "val_acc"});
}

TEST_CASE("transfer keeps encoder weights and discards the rest") {
    const Corpus corpus = train_corpus(0, 10, 9004);
    const TrainConfig cfg = tiny_cfg(Method::GraphMAE, 31);
    const TrainResult pre = run_pretrain(corpus, cfg);
    Model fin = transfer_encoder(pre.model, 2, cfg);
    REQUIRE(fin.phase == Phase::Finetune);
    for (const auto& [name, t] : fin.params.raw()) {
        if (name.rfind("enc.", 0) == 0) {
            const Tensor& src = pre.model.params.at(name);
            for (std::size_t i = 0; i < t.size(); ++i) REQUIRE(t[i] == src[i]);
        }
    }
    // pretrain-only modules stay behind
    REQUIRE(pre.model.params.contains("dec.W"));
    REQUIRE_FALSE(fin.params.contains("dec.W"));
    REQUIRE(fin.params.contains("head.W"));
}

TEST_CASE("semi-supervised modes gate the auxiliary losses") {
    const Corpus corpus = train_corpus(16, 8, 9005);
    const Split split = split_corpus(corpus, {0.5, 0.25, 0.25}, 5);
    for (Method m : {Method::InfoGraph, Method::JOAO, Method::GraphMAE}) {
        TrainConfig cfg = tiny_cfg(m, 41);
        cfg.epochs_finetune = 2;
        const TrainResult sup = run_semi_supervised(corpus, split, cfg, AblationMode::SupOnly);
        for (const EpochLog& e : sup.log) {
            REQUIRE(e.l_sup.has_value());
            REQUIRE_FALSE(e.l_unsup.has_value());
            REQUIRE(e.val_acc.has_value());
        }
        const TrainResult full = run_semi_supervised(corpus, split, cfg, AblationMode::Full);
        for (const EpochLog& e : full.log) {
            REQUIRE(e.l_sup.has_value());
            REQUIRE(e.l_unsup.has_value());
        }
        if (m == Method::InfoGraph) {
            for (const EpochLog& e : full.log) REQUIRE(e.l_consistency.has_value());
        }
        if (m == Method::JOAO) {
            REQUIRE_FALSE(full.policy_csvs.empty());
        }
    }
    // the full mode needs an unlabeled pool
    const Corpus no_unlabeled = train_corpus(16, 0, 9006);
    const Split s2 = split_corpus(no_unlabeled, {0.5, 0.25, 0.25}, 5);
    REQUIRE_THROWS_AS(
        run_semi_supervised(no_unlabeled, s2, tiny_cfg(Method::GraphMAE, 1), AblationMode::Full),
        ContractError);
}

TEST_CASE("predict breaks ties toward the lowest class index") {
    const Corpus corpus = train_corpus(8, 0, 9007);
    TrainConfig cfg = tiny_cfg(Method::GraphMAE, 51);
    Model model = build_model(Method::GraphMAE, Phase::Finetune, corpus.d_x, 2, cfg);
    // zero the classifier so every logit ties at the bias
    for (auto& [name, t] : model.params.raw()) {
        if (name.rfind("head.", 0) == 0) {
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
        }
    }
    std::vector<const GraphData*> ptrs;
    for (const GraphData& g : corpus.labeled) ptrs.push_back(&g);
    for (int p : predict(model, ptrs)) REQUIRE(p == 0);
}

// ---------------------------------------------------------------------------
// experiments and model files

TEST_CASE("model checkpoints rebuild an equivalent model") {
    const Corpus corpus = train_corpus(0, 10, 9008);
    RunConfig rc;
    rc.method = "joao";
    rc.d_x = corpus.d_x;
    rc.d_h = 5;
    rc.d_p = 4;
    rc.layers = 2;
    rc.batch_size = 8;
    rc.labeled_per_batch = 4;
    rc.epochs_pretrain = 2;
    rc.corpus = "unused.jsonl";
    const TrainConfig tc = rc.train();
    const TrainResult pre = run_pretrain(corpus, tc);

    const ordered_json meta = model_meta(pre.model, rc, rc.label_set);
    REQUIRE(meta["format"] == "graphssl-model");
    Checkpoint ck;
    ck.meta = meta;
    ck.params = pre.model.params;
    const Model back = model_from_checkpoint(ck);
    REQUIRE(back.method == Method::JOAO);
    REQUIRE(back.d_x == corpus.d_x);
    REQUIRE(params_bytes(back.params) == params_bytes(pre.model.params));
    for (std::size_t i = 0; i < kPolicyCells; ++i) {
        REQUIRE(back.policy.p[i] == pre.model.policy.p[i]);
    }
    REQUIRE(checkpoint_label_set(ck) == rc.label_set);

    Checkpoint wrong = ck;
    wrong.meta["format"] = "other";
    REQUIRE_THROWS_AS(model_from_checkpoint(wrong), ParseError);
    Checkpoint missing = ck;
    missing.params.raw().erase(missing.params.raw().begin());
    REQUIRE_THROWS_AS(model_from_checkpoint(missing), ParseError);
    Checkpoint extra = ck;
    extra.params.raw()["rogue"] = Tensor::zeros({1});
    REQUIRE_THROWS_AS(model_from_checkpoint(extra), ParseError);
}

TEST_CASE("loading a pretrained checkpoint reproduces the in-memory finetune") {
    const Corpus corpus = train_corpus(16, 8, 9009);
    const Split split = split_corpus(corpus, {0.5, 0.25, 0.25}, 7);
    RunConfig rc;
    rc.method = "graphmae";
    rc.d_x = corpus.d_x;
    rc.d_h = 5;
    rc.d_p = 4;
    rc.batch_size = 8;
    rc.labeled_per_batch = 4;
    rc.epochs_pretrain = 2;
    rc.epochs_finetune = 3;
    rc.corpus = "unused.jsonl";
    const TrainConfig tc = rc.train();
    const TrainResult pre = run_pretrain(corpus, tc);
    const TrainResult direct = run_finetune(pre.model, corpus, split, tc);

    Checkpoint ck;
    ck.meta = model_meta(pre.model, rc, rc.label_set);
    ck.params = pre.model.params;
    const std::string buf = encode_checkpoint(ck.params, ck.meta);
    const Model reloaded = model_from_checkpoint(decode_checkpoint(buf));
    const TrainResult via_file = run_finetune(reloaded, corpus, split, tc);
    REQUIRE(params_bytes(direct.model.params) == params_bytes(via_file.model.params));
    REQUIRE(epoch_log_jsonl(direct.log) == epoch_log_jsonl(via_file.log));
}

TEST_CASE("semi experiment writes aggregate results and per-split files") {
    const std::string dir =
        (std::filesystem::temp_directory_path() / "gssl_test_semi").string();
    std::filesystem::create_directories(dir);
    const std::string corpus_path = dir + "/corpus.jsonl";
    SynthConfig sc;
    sc.n_labeled = 16;
    sc.n_unlabeled = 8;
    sc.vocab_size = 40;
    sc.avg_posts = 4;
    sc.seed = 77;
    sc.d_x = 8;
    const Corpus corpus = generate_synthetic_corpus(sc);
    write_file(corpus_path, serialize_corpus(corpus));

    RunConfig rc;
    rc.method = "graphmae";
    rc.d_x = 8;
    rc.d_h = 5;
    rc.d_p = 4;
    rc.batch_size = 8;
    rc.labeled_per_batch = 4;
    rc.epochs_finetune = 2;
    rc.n_splits = 2;
    rc.split_ratios = {0.5, 0.25, 0.25};
    rc.corpus = corpus_path;
    rc.out_dir = dir;
    rc.validate();

    const ExperimentOutput out = experiment_semi(corpus, corpus_path, rc);
    REQUIRE(out.results["command"] == "semi");
    REQUIRE(out.results["corpus"]["hash"] == corpus_hash(corpus_path));
    REQUIRE(out.results["config"]["method"] == "graphmae");
    REQUIRE(out.results["splits"].size() == 2);
    REQUIRE(out.results["aggregate"].contains("mean"));
    REQUIRE(out.results["aggregate"]["std_kind"] == "population");
    bool has_metrics_csv = false, has_log = false;
    for (const auto& [name, content] : out.files) {
        if (name == "metrics.csv") {
            has_metrics_csv = true;
            REQUIRE(content.find("split,run_seed,test_accuracy") == 0);
        }
        if (name.rfind("train_log_split", 0) == 0) has_log = true;
    }
    REQUIRE(has_metrics_csv);
    REQUIRE(has_log);

    // identical invocation reproduces byte-identical results
    const ExperimentOutput again = experiment_semi(corpus, corpus_path, rc);
    REQUIRE(again.results.dump() == out.results.dump());
    REQUIRE(again.files == out.files);
    std::filesystem::remove_all(dir);
}
