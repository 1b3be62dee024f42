// Command-line driver: corpus ingestion and synthesis, the three training
// strategies, label-efficiency runs, checkpoint evaluation, and a gradient
// self-check. Exit codes: 0 success, 1 invalid input or configuration,
// 2 internal/runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <graphssl/graphssl.hpp>

namespace fs = std::filesystem;
using namespace graphssl;

namespace {

// One field per config key; opts records which flags were actually passed so
// only those override the config file.
struct ConfigFlags {
    std::string config;
    std::string method, ablation, corpus, out_dir, checkpoint;
    double alpha = 0, beta = 0, lambda = 0, gamma = 0, lr = 0, lower_lr = 0;
    double aug_ratio = 0, mask_rate = 0, replace_rate = 0;
    std::uint64_t seed = 0;
    std::size_t epochs_pretrain = 0, epochs_finetune = 0, batch_size = 0, labeled_per_batch = 0;
    std::size_t patience = 0, d_x = 0, d_h = 0, d_p = 0, layers = 0, n_splits = 0;
    std::size_t fewshot_seeds = 0;
    std::vector<double> split_ratios;
    std::vector<std::size_t> k_values;
    std::vector<std::string> label_set;
    std::map<std::string, CLI::Option*> opts;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON config file");
        auto opt = [&](const char* flag, auto& field, const char* key, const char* help) {
            opts[key] = app->add_option(flag, field, help);
        };
        opt("--corpus", corpus, "corpus", "corpus JSONL path");
        opt("--out-dir", out_dir, "out_dir", "output directory");
        opt("--checkpoint", checkpoint, "checkpoint", "checkpoint path");
        opt("--method", method, "method", "infograph | joao | graphmae");
        opt("--ablation", ablation, "ablation", "full | sup_only | ssl_labeled_only");
        opt("--seed", seed, "seed", "master seed");
        opt("--alpha", alpha, "alpha", "unsupervised loss weight");
        opt("--beta", beta, "beta", "consistency loss weight");
        opt("--lambda", lambda, "lambda", "policy regularization strength");
        opt("--gamma", gamma, "gamma", "cosine error sharpening exponent");
        opt("--lr", lr, "lr", "Adam learning rate");
        opt("--lower-lr", lower_lr, "lower_lr", "policy ascent step size");
        opt("--aug-ratio", aug_ratio, "aug_ratio", "augmentation strength");
        opt("--mask-rate", mask_rate, "mask_rate", "node masking rate");
        opt("--replace-rate", replace_rate, "replace_rate", "masked-token replacement rate");
        opt("--epochs-pretrain", epochs_pretrain, "epochs_pretrain", "pretraining epochs");
        opt("--epochs-finetune", epochs_finetune, "epochs_finetune", "finetune/semi epochs");
        opt("--batch-size", batch_size, "batch_size", "graphs per batch");
        opt("--labeled-per-batch", labeled_per_batch, "labeled_per_batch",
            "labeled graphs per semi batch");
        opt("--patience", patience, "patience", "early stopping patience");
        opt("--d-x", d_x, "d_x", "input feature dimension");
        opt("--d-h", d_h, "d_h", "hidden dimension");
        opt("--d-p", d_p, "d_p", "discriminator projection dimension");
        opt("--layers", layers, "layers", "encoder layers");
        opt("--n-splits", n_splits, "n_splits", "number of train/val/test splits");
        opt("--split-ratios", split_ratios, "split_ratios", "train val test ratios");
        opt("--k-values", k_values, "k_values", "few-shot label budgets");
        opt("--fewshot-seeds", fewshot_seeds, "fewshot_seeds", "few-shot repetitions");
        opt("--label-set", label_set, "label_set", "allowed labels in order");
    }

    json overrides() const {
        json o = json::object();
        auto passed = [&](const char* key) {
            auto it = opts.find(key);
            return it != opts.end() && it->second->count() > 0;
        };
        if (passed("corpus")) o["corpus"] = corpus;
        if (passed("out_dir")) o["out_dir"] = out_dir;
        if (passed("checkpoint")) o["checkpoint"] = checkpoint;
        if (passed("method")) o["method"] = method;
        if (passed("ablation")) o["ablation"] = ablation;
        if (passed("seed")) o["seed"] = seed;
        if (passed("alpha")) o["alpha"] = alpha;
        if (passed("beta")) o["beta"] = beta;
        if (passed("lambda")) o["lambda"] = lambda;
        if (passed("gamma")) o["gamma"] = gamma;
        if (passed("lr")) o["lr"] = lr;
        if (passed("lower_lr")) o["lower_lr"] = lower_lr;
        if (passed("aug_ratio")) o["aug_ratio"] = aug_ratio;
        if (passed("mask_rate")) o["mask_rate"] = mask_rate;
        if (passed("replace_rate")) o["replace_rate"] = replace_rate;
        if (passed("epochs_pretrain")) o["epochs_pretrain"] = epochs_pretrain;
        if (passed("epochs_finetune")) o["epochs_finetune"] = epochs_finetune;
        if (passed("batch_size")) o["batch_size"] = batch_size;
        if (passed("labeled_per_batch")) o["labeled_per_batch"] = labeled_per_batch;
        if (passed("patience")) o["patience"] = patience;
        if (passed("d_x")) o["d_x"] = d_x;
        if (passed("d_h")) o["d_h"] = d_h;
        if (passed("d_p")) o["d_p"] = d_p;
        if (passed("layers")) o["layers"] = layers;
        if (passed("n_splits")) o["n_splits"] = n_splits;
        if (passed("split_ratios")) o["split_ratios"] = split_ratios;
        if (passed("k_values")) o["k_values"] = k_values;
        if (passed("fewshot_seeds")) o["fewshot_seeds"] = fewshot_seeds;
        if (passed("label_set")) o["label_set"] = label_set;
        return o;
    }

    RunConfig resolve() const { return resolve_config(config, overrides()); }
};

Corpus load_corpus_for(const RunConfig& cfg) {
    if (cfg.corpus.empty()) {
        throw ConfigError("no corpus path given (use --corpus or the config file)");
    }
    return parse_corpus(cfg.corpus, cfg.label_set, cfg.d_x);
}

void write_experiment(const RunConfig& cfg, const ExperimentOutput& out) {
    fs::create_directories(cfg.out_dir);
    write_file(cfg.out_dir + "/results.json", out.results.dump(2) + "\n");
    for (const auto& [name, content] : out.files) {
        write_file(cfg.out_dir + "/" + name, content);
    }
}

void save_model(const std::string& path, const Model& model, const RunConfig& cfg,
                const std::vector<std::string>& label_set) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    save_checkpoint(path, model.params, model_meta(model, cfg, label_set));
}

void print_done(const json& j) { std::cout << j.dump() << "\n"; }

int run_cli(int argc, char** argv) {
    CLI::App app{"self-supervised rumor propagation-tree classification"};
    app.require_subcommand(1);

    // synth has its own small option set, independent of the run config
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    SynthConfig sc;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output JSONL path")->required();
    synth->add_option("--n-labeled", sc.n_labeled, "labeled claims");
    synth->add_option("--n-unlabeled", sc.n_unlabeled, "unlabeled claims");
    synth->add_option("--vocab-size", sc.vocab_size, "synthetic vocabulary size");
    synth->add_option("--avg-posts", sc.avg_posts, "mean posts per claim");
    synth->add_option("--separation", sc.class_separation, "class separation in [0,1]");
    synth->add_option("--seed", sc.seed, "generator seed");
    synth->add_option("--d-x", sc.d_x, "feature dimension recorded for ingestion");
    synth->callback([&] {
        const Corpus corpus = generate_synthetic_corpus(sc);
        const fs::path p(synth_out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        write_file(synth_out, serialize_corpus(corpus));
        json j = json::object();
        j["corpus"] = synth_out;
        j["summary"] = summarize_corpus(corpus);
        print_done(j);
    });

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of all losses");
    std::size_t gc_trials = 20;
    double gc_eps = 1e-6, gc_tol = 1e-4;
    bool gc_failed = false;
    gradcheck->add_option("--trials", gc_trials, "random problems per construction");
    gradcheck->add_option("--eps", gc_eps, "finite-difference step");
    gradcheck->add_option("--tolerance", gc_tol, "max relative error");
    gradcheck->callback([&] {
        const auto cases = run_gradient_suite(gc_trials, gc_eps);
        for (const GradSuiteCase& c : cases) {
            const bool ok = c.worst < gc_tol;
            if (!ok) gc_failed = true;
            std::printf("%-24s worst_rel_err=%.3e %s\n", c.name.c_str(), c.worst,
                        ok ? "ok" : "FAIL");
        }
        if (gc_failed) throw ConfigError("gradient check failed");
    });

    struct Sub {
        CLI::App* cmd;
        ConfigFlags flags;
    };
    std::map<std::string, Sub> subs;
    for (const char* name : {"ingest", "pretrain", "finetune", "semi", "fewshot", "eval"}) {
        static const std::map<std::string, std::string> desc = {
            {"ingest", "parse, validate and summarize a corpus"},
            {"pretrain", "unsupervised pretraining on the unlabeled pool"},
            {"finetune", "pretrain (or load) an encoder, then finetune per split"},
            {"semi", "joint semi-supervised training per split"},
            {"fewshot", "label-efficiency protocol over k_values"},
            {"eval", "evaluate a saved model on a corpus"},
        };
        Sub& s = subs[name];
        s.cmd = app.add_subcommand(name, desc.at(name));
        s.flags.attach(s.cmd);
    }

    subs["ingest"].cmd->callback([&] {
        const RunConfig cfg = subs["ingest"].flags.resolve();
        const Corpus corpus = load_corpus_for(cfg);
        json j = json::object();
        j["corpus"] = cfg.corpus;
        j["hash"] = corpus_hash(cfg.corpus);
        j["summary"] = summarize_corpus(corpus);
        std::cout << j.dump(2) << "\n";
    });

    subs["pretrain"].cmd->callback([&] {
        const RunConfig cfg = subs["pretrain"].flags.resolve();
        const Corpus corpus = load_corpus_for(cfg);
        const TrainResult res = run_pretrain(corpus, cfg.train());
        fs::create_directories(cfg.out_dir);
        const std::string ckpt =
            cfg.checkpoint.empty() ? cfg.out_dir + "/pretrained.ckpt" : cfg.checkpoint;
        save_model(ckpt, res.model, cfg, corpus.label_set);
        write_file(cfg.out_dir + "/pretrain_log.jsonl", epoch_log_jsonl(res.log));
        for (std::size_t e = 0; e < res.policy_csvs.size(); ++e) {
            char name[64];
            std::snprintf(name, sizeof(name), "policy_pretrain_epoch%03zu.csv", e + 1);
            write_file(cfg.out_dir + "/" + name, res.policy_csvs[e]);
        }
        json j = json::object();
        j["checkpoint"] = ckpt;
        j["epochs"] = res.log.size();
        print_done(j);
    });

    subs["finetune"].cmd->callback([&] {
        const RunConfig cfg = subs["finetune"].flags.resolve();
        const Corpus corpus = load_corpus_for(cfg);
        ExperimentOutput out;
        Model last;
        if (!cfg.checkpoint.empty() && fs::exists(cfg.checkpoint)) {
            const Model pre = model_from_checkpoint(load_checkpoint(cfg.checkpoint));
            out = experiment_pretrain_finetune(corpus, cfg.corpus, cfg, nullptr, &pre, &last);
        } else {
            out = experiment_pretrain_finetune(corpus, cfg.corpus, cfg, nullptr, nullptr, &last);
        }
        write_experiment(cfg, out);
        save_model(cfg.out_dir + "/model.ckpt", last, cfg, corpus.label_set);
        json j = json::object();
        j["results"] = cfg.out_dir + "/results.json";
        j["aggregate"] = out.results["aggregate"]["formatted"];
        print_done(j);
    });

    subs["semi"].cmd->callback([&] {
        const RunConfig cfg = subs["semi"].flags.resolve();
        const Corpus corpus = load_corpus_for(cfg);
        Model last;
        const ExperimentOutput out = experiment_semi(corpus, cfg.corpus, cfg, &last);
        write_experiment(cfg, out);
        save_model(cfg.out_dir + "/model.ckpt", last, cfg, corpus.label_set);
        json j = json::object();
        j["results"] = cfg.out_dir + "/results.json";
        j["aggregate"] = out.results["aggregate"]["formatted"];
        print_done(j);
    });

    subs["fewshot"].cmd->callback([&] {
        const RunConfig cfg = subs["fewshot"].flags.resolve();
        const Corpus corpus = load_corpus_for(cfg);
        const ExperimentOutput out = experiment_fewshot(corpus, cfg.corpus, cfg);
        write_experiment(cfg, out);
        json j = json::object();
        j["results"] = cfg.out_dir + "/results.json";
        print_done(j);
    });

    subs["eval"].cmd->callback([&] {
        const RunConfig cfg = subs["eval"].flags.resolve();
        if (cfg.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
        const Corpus corpus = load_corpus_for(cfg);
        const Checkpoint ck = load_checkpoint(cfg.checkpoint);
        std::cout << eval_checkpoint(ck, corpus, cfg.corpus).dump(2) << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const RecordError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const StratifyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DegenerateInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
