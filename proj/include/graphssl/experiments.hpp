#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphssl/checkpoint.hpp"
#include "graphssl/config.hpp"
#include "graphssl/corpus.hpp"
#include "graphssl/metrics.hpp"
#include "graphssl/training.hpp"

namespace graphssl {

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Pretrain: return "pretrain";
        case Phase::Finetune: return "finetune";
        case Phase::Semi: return "semi";
    }
    return "semi";
}

inline Phase phase_from_name(const std::string& s) {
    if (s == "pretrain") return Phase::Pretrain;
    if (s == "finetune") return Phase::Finetune;
    if (s == "semi") return Phase::Semi;
    throw ParseError("unknown phase '" + s + "' in checkpoint");
}

// ---------------------------------------------------------------------------
// Log and metrics serialization

inline json epoch_log_entry(const EpochLog& e) {
    json j = json::object();
    j["epoch"] = e.epoch;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
        else j[key] = nullptr;
    };
    put("l_sup", e.l_sup);
    put("l_unsup", e.l_unsup);
    put("l_consistency", e.l_consistency);
    put("l_dist", e.l_dist);
    put("val_acc", e.val_acc);
    return j;
}

inline std::string epoch_log_jsonl(const std::vector<EpochLog>& log) {
    std::string out;
    for (const EpochLog& e : log) {
        out += epoch_log_entry(e).dump();
        out += '\n';
    }
    return out;
}

inline json metrics_json(const MetricsReport& m, const std::vector<std::string>& label_set) {
    json j = json::object();
    j["accuracy"] = m.accuracy;
    json per_class = json::object();
    for (std::size_t c = 0; c < label_set.size(); ++c) {
        json cm = json::object();
        cm["precision"] = m.per_class[c].precision;
        cm["recall"] = m.per_class[c].recall;
        cm["f1"] = m.per_class[c].f1;
        cm["zero_predictions"] = m.per_class[c].zero_predictions;
        per_class[label_set[c]] = std::move(cm);
    }
    j["per_class"] = std::move(per_class);
    j["confusion"] = m.confusion;
    return j;
}

inline MetricsReport test_metrics(Model& model, const Corpus& corpus,
                                  const std::vector<std::size_t>& test) {
    const std::vector<const GraphData*> graphs = gather_graphs(corpus.labeled, test);
    const std::vector<int> preds = predict(model, graphs);
    std::vector<int> labels;
    labels.reserve(graphs.size());
    for (const GraphData* g : graphs) labels.push_back(g->label);
    return confusion_metrics(preds, labels, corpus.n_classes());
}

inline json aggregate_json(const std::vector<double>& accs) {
    json j = json::object();
    j["mean"] = mean_of(accs);
    j["std"] = population_std(accs);
    j["std_kind"] = "population";
    j["formatted"] = aggregate_runs(accs);
    return j;
}

namespace detail {

inline std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Split-based experiments

// A single complete run: what happened on one train/val/test split.
struct SplitOutcome {
    std::size_t index = 0;
    std::uint64_t run_seed = 0;
    double best_val_acc = 0.0;
    std::size_t best_epoch = 0;
    MetricsReport test;
    std::vector<EpochLog> log;
    std::vector<std::string> policy_csvs;
};

// Everything an experiment wants written to disk: the results document plus
// named auxiliary files (per-split training logs, per-epoch policy tables).
struct ExperimentOutput {
    json results;
    std::vector<std::pair<std::string, std::string>> files;
};

namespace detail {

inline json split_outcome_json(const SplitOutcome& o, const std::vector<std::string>& label_set) {
    json j = json::object();
    j["split"] = o.index;
    j["run_seed"] = o.run_seed;
    j["best_epoch"] = o.best_epoch;
    j["best_val_accuracy"] = o.best_val_acc;
    j["epochs_run"] = o.log.size();
    j["test"] = metrics_json(o.test, label_set);
    return j;
}

inline void collect_split_files(ExperimentOutput& out, const SplitOutcome& o) {
    char name[64];
    std::snprintf(name, sizeof(name), "train_log_split%02zu.jsonl", o.index);
    out.files.emplace_back(name, epoch_log_jsonl(o.log));
    for (std::size_t e = 0; e < o.policy_csvs.size(); ++e) {
        std::snprintf(name, sizeof(name), "policy_split%02zu_epoch%03zu.csv", o.index, e + 1);
        out.files.emplace_back(name, o.policy_csvs[e]);
    }
}

inline std::string split_metrics_csv(const std::vector<SplitOutcome>& outcomes,
                                     const std::vector<std::string>& label_set) {
    std::string csv = "split,run_seed,test_accuracy,best_val_accuracy,best_epoch";
    for (const std::string& l : label_set) csv += ",f1_" + l;
    csv += '\n';
    std::vector<double> accs;
    for (const SplitOutcome& o : outcomes) {
        csv += std::to_string(o.index) + ',' + std::to_string(o.run_seed) + ',' +
               fmt6(o.test.accuracy) + ',' + fmt6(o.best_val_acc) + ',' +
               std::to_string(o.best_epoch);
        for (const ClassMetrics& cm : o.test.per_class) csv += ',' + fmt6(cm.f1);
        csv += '\n';
        accs.push_back(o.test.accuracy);
    }
    csv += "aggregate,," + aggregate_runs(accs) + ",,";
    for (std::size_t c = 0; c < label_set.size(); ++c) csv += ',';
    csv += '\n';
    return csv;
}

inline json results_header(const std::string& command, const RunConfig& cfg,
                           const std::string& corpus_path, const Corpus& corpus) {
    json j = json::object();
    j["command"] = command;
    j["config"] = config_to_json(cfg);
    json cj = json::object();
    cj["path"] = corpus_path;
    cj["hash"] = corpus_hash(corpus_path);
    cj["summary"] = summarize_corpus(corpus);
    j["corpus"] = std::move(cj);
    return j;
}

}  // namespace detail

// Checkpoint metadata carries everything needed to rebuild the model around
// the stored parameters.
inline nlohmann::ordered_json model_meta(const Model& model, const RunConfig& cfg,
                                         const std::vector<std::string>& label_set) {
    nlohmann::ordered_json meta;
    meta["format"] = "graphssl-model";
    meta["method"] = method_name(model.method);
    meta["phase"] = phase_name(model.phase);
    meta["d_x"] = model.d_x;
    meta["n_classes"] = model.n_classes;
    meta["label_set"] = label_set;
    meta["policy"] = model.policy.p;
    meta["config"] = config_to_json(cfg);
    return meta;
}

inline Model model_from_checkpoint(const Checkpoint& ck) {
    if (!ck.meta.is_object() || !ck.meta.contains("format") ||
        ck.meta["format"] != "graphssl-model") {
        throw ParseError("checkpoint metadata is not a graphssl model");
    }
    RunConfig cfg;
    apply_config_json(cfg, ck.meta.at("config"), "checkpoint");
    cfg.validate();
    const Method method = method_from_name(ck.meta.at("method").get<std::string>());
    const Phase phase = phase_from_name(ck.meta.at("phase").get<std::string>());
    const std::size_t d_x = ck.meta.at("d_x").get<std::size_t>();
    const std::size_t n_classes = ck.meta.at("n_classes").get<std::size_t>();
    TrainConfig tc = cfg.train();
    tc.method = method;
    Model model = build_model(method, phase, d_x, n_classes, tc);
    for (const auto& [name, t] : model.params.raw()) {
        if (!ck.params.contains(name)) {
            throw ParseError("checkpoint is missing parameter '" + name + "'");
        }
        if (ck.params.at(name).shape() != t.shape()) {
            throw ParseError("checkpoint parameter '" + name + "' has the wrong shape");
        }
    }
    for (const auto& [name, t] : ck.params.raw()) {
        if (!model.params.contains(name)) {
            throw ParseError("checkpoint has unexpected parameter '" + name + "'");
        }
    }
    model.params = ck.params;
    if (ck.meta.contains("policy")) {
        const auto& pj = ck.meta.at("policy");
        if (!pj.is_array() || pj.size() != kPolicyCells) {
            throw ParseError("checkpoint policy must have 25 entries");
        }
        for (std::size_t i = 0; i < kPolicyCells; ++i) model.policy.p[i] = pj[i].get<double>();
        model.policy.validate();
    }
    return model;
}

inline std::vector<std::string> checkpoint_label_set(const Checkpoint& ck) {
    std::vector<std::string> out;
    for (const auto& l : ck.meta.at("label_set")) out.push_back(l.get<std::string>());
    return out;
}

// ---------------------------------------------------------------------------
// Experiments

// Pretrain once on the unlabeled pool, then finetune per split.
inline ExperimentOutput experiment_pretrain_finetune(const Corpus& corpus,
                                                     const std::string& corpus_path,
                                                     const RunConfig& cfg,
                                                     Model* pretrained_out = nullptr,
                                                     const Model* pretrained_in = nullptr,
                                                     Model* last_finetuned = nullptr) {
    const TrainConfig base = cfg.train();
    Model pre;
    std::vector<EpochLog> pre_log;
    std::vector<std::string> pre_policy;
    if (pretrained_in != nullptr) {
        pre = *pretrained_in;
    } else {
        TrainResult pr = run_pretrain(corpus, base);
        pre = std::move(pr.model);
        pre_log = std::move(pr.log);
        pre_policy = std::move(pr.policy_csvs);
    }
    ExperimentOutput out;
    out.results = detail::results_header("pretrain_finetune", cfg, corpus_path, corpus);
    if (!pre_log.empty()) out.files.emplace_back("pretrain_log.jsonl", epoch_log_jsonl(pre_log));
    for (std::size_t e = 0; e < pre_policy.size(); ++e) {
        char name[64];
        std::snprintf(name, sizeof(name), "policy_pretrain_epoch%03zu.csv", e + 1);
        out.files.emplace_back(name, pre_policy[e]);
    }
    std::vector<SplitOutcome> outcomes;
    std::vector<double> accs;
    json splits = json::array();
    for (std::size_t s = 0; s < cfg.n_splits; ++s) {
        TrainConfig tc = base;
        tc.seed = sub_seed(cfg.seed, "run", s);
        const Split split = split_corpus(corpus, cfg.split_ratios, sub_seed(cfg.seed, "splits", s));
        TrainResult tr = run_finetune(pre, corpus, split, tc);
        SplitOutcome o;
        o.index = s;
        o.run_seed = tc.seed;
        o.best_val_acc = tr.best_val_acc;
        o.best_epoch = tr.best_epoch;
        o.test = test_metrics(tr.model, corpus, split.test);
        o.log = std::move(tr.log);
        detail::collect_split_files(out, o);
        splits.push_back(detail::split_outcome_json(o, corpus.label_set));
        accs.push_back(o.test.accuracy);
        if (last_finetuned != nullptr && s + 1 == cfg.n_splits) *last_finetuned = std::move(tr.model);
        outcomes.push_back(std::move(o));
    }
    out.results["splits"] = std::move(splits);
    out.results["aggregate"] = aggregate_json(accs);
    out.files.emplace_back("metrics.csv", detail::split_metrics_csv(outcomes, corpus.label_set));
    if (pretrained_out != nullptr) *pretrained_out = std::move(pre);
    return out;
}

// Joint semi-supervised training per split, optionally ablated.
inline ExperimentOutput experiment_semi(const Corpus& corpus, const std::string& corpus_path,
                                        const RunConfig& cfg, Model* last_model = nullptr) {
    const AblationMode mode = ablation_from_name(cfg.ablation);
    const TrainConfig base = cfg.train();
    ExperimentOutput out;
    out.results = detail::results_header("semi", cfg, corpus_path, corpus);
    out.results["ablation"] = cfg.ablation;
    std::vector<SplitOutcome> outcomes;
    std::vector<double> accs;
    json splits = json::array();
    for (std::size_t s = 0; s < cfg.n_splits; ++s) {
        TrainConfig tc = base;
        tc.seed = sub_seed(cfg.seed, "run", s);
        const Split split = split_corpus(corpus, cfg.split_ratios, sub_seed(cfg.seed, "splits", s));
        TrainResult tr = run_semi_supervised(corpus, split, tc, mode);
        SplitOutcome o;
        o.index = s;
        o.run_seed = tc.seed;
        o.best_val_acc = tr.best_val_acc;
        o.best_epoch = tr.best_epoch;
        o.test = test_metrics(tr.model, corpus, split.test);
        o.log = std::move(tr.log);
        o.policy_csvs = std::move(tr.policy_csvs);
        detail::collect_split_files(out, o);
        splits.push_back(detail::split_outcome_json(o, corpus.label_set));
        accs.push_back(o.test.accuracy);
        if (last_model != nullptr && s + 1 == cfg.n_splits) *last_model = std::move(tr.model);
        outcomes.push_back(std::move(o));
    }
    out.results["splits"] = std::move(splits);
    out.results["aggregate"] = aggregate_json(accs);
    out.files.emplace_back("metrics.csv", detail::split_metrics_csv(outcomes, corpus.label_set));
    return out;
}

// Label-efficiency protocol: for each k, finetune a pretrained encoder on a
// stratified k-claim subset and compare against training from scratch, over
// several seeds.
inline ExperimentOutput experiment_fewshot(const Corpus& corpus, const std::string& corpus_path,
                                           const RunConfig& cfg) {
    const TrainConfig base = cfg.train();
    ExperimentOutput out;
    out.results = detail::results_header("fewshot", cfg, corpus_path, corpus);
    json runs = json::array();
    std::map<std::size_t, std::vector<double>> pre_by_k, scr_by_k;
    std::vector<std::size_t> ks_used;
    for (std::size_t s = 0; s < cfg.fewshot_seeds; ++s) {
        TrainConfig tc = base;
        tc.seed = sub_seed(cfg.seed, "fewshot", s);
        const Split split = split_corpus(corpus, cfg.split_ratios, tc.seed);
        const TrainResult pre = run_pretrain(corpus, tc);
        for (std::size_t k_req : cfg.k_values) {
            const std::size_t k = std::min(k_req, split.train.size());
            if (k < corpus.n_classes()) continue;
            Split sk;
            sk.train = stratified_subset(corpus, split.train, k, sub_seed(tc.seed, "subset", k));
            sk.val = split.val;
            sk.test = split.test;
            TrainResult ft = run_finetune(pre.model, corpus, sk, tc);
            TrainResult sc = run_scratch(corpus, sk, tc);
            const double acc_pre = test_metrics(ft.model, corpus, sk.test).accuracy;
            const double acc_scr = test_metrics(sc.model, corpus, sk.test).accuracy;
            json r = json::object();
            r["k"] = k;
            r["requested_k"] = k_req;
            r["seed_index"] = s;
            r["run_seed"] = tc.seed;
            r["pretrained_accuracy"] = acc_pre;
            r["scratch_accuracy"] = acc_scr;
            runs.push_back(std::move(r));
            if (pre_by_k.find(k) == pre_by_k.end()) ks_used.push_back(k);
            pre_by_k[k].push_back(acc_pre);
            scr_by_k[k].push_back(acc_scr);
        }
    }
    if (runs.empty()) throw ContractError("fewshot: no k value fits the training pool");
    out.results["runs"] = std::move(runs);
    json agg = json::object();
    std::string csv = "k,pretrained,scratch,pretrained_mean,scratch_mean\n";
    std::sort(ks_used.begin(), ks_used.end());
    for (std::size_t k : ks_used) {
        json a = json::object();
        a["pretrained"] = aggregate_json(pre_by_k[k]);
        a["scratch"] = aggregate_json(scr_by_k[k]);
        agg[std::to_string(k)] = std::move(a);
        csv += std::to_string(k) + ',' + aggregate_runs(pre_by_k[k]) + ',' +
               aggregate_runs(scr_by_k[k]) + ',' + detail::fmt6(mean_of(pre_by_k[k])) + ',' +
               detail::fmt6(mean_of(scr_by_k[k])) + '\n';
    }
    out.results["aggregate"] = std::move(agg);
    out.files.emplace_back("fewshot.csv", csv);
    return out;
}

// Evaluate a restored model on a corpus's labeled claims.
inline json eval_checkpoint(const Checkpoint& ck, const Corpus& corpus,
                            const std::string& corpus_path) {
    const std::vector<std::string> ck_labels = checkpoint_label_set(ck);
    if (ck_labels != corpus.label_set) {
        throw ConfigError("checkpoint label_set does not match the corpus label_set");
    }
    Model model = model_from_checkpoint(ck);
    if (model.d_x != corpus.d_x) throw ConfigError("checkpoint d_x does not match the corpus");
    if (corpus.labeled.empty()) throw ContractError("eval: corpus has no labeled claims");
    std::vector<std::size_t> all(corpus.labeled.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const MetricsReport m = test_metrics(model, corpus, all);
    json j = json::object();
    j["command"] = "eval";
    j["corpus"] = json::object();
    j["corpus"]["path"] = corpus_path;
    j["corpus"]["hash"] = corpus_hash(corpus_path);
    j["n_claims"] = corpus.labeled.size();
    j["metrics"] = metrics_json(m, corpus.label_set);
    return j;
}

}  // namespace graphssl
