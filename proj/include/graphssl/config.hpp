#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphssl/errors.hpp"
#include "graphssl/training.hpp"

namespace graphssl {

inline const char* ablation_name(AblationMode m) {
    switch (m) {
        case AblationMode::Full: return "full";
        case AblationMode::SupOnly: return "sup_only";
        case AblationMode::SslLabeledOnly: return "ssl_labeled_only";
    }
    return "full";
}

inline AblationMode ablation_from_name(const std::string& s) {
    if (s == "full") return AblationMode::Full;
    if (s == "sup_only") return AblationMode::SupOnly;
    if (s == "ssl_labeled_only") return AblationMode::SslLabeledOnly;
    throw ConfigError("unknown ablation '" + s + "' (expected full, sup_only, ssl_labeled_only)");
}

// Every tunable in one place. Precedence when resolving: command-line flag,
// then config file, then the default below.
struct RunConfig {
    std::string method = "infograph";
    double alpha = 0.3;
    double beta = 0.3;
    double lambda = 1.0;
    double gamma = 2.0;
    double lr = 1e-3;
    double lower_lr = 0.01;
    double aug_ratio = 0.2;
    double mask_rate = 0.5;
    double replace_rate = 0.15;
    std::size_t epochs_pretrain = 50;
    std::size_t epochs_finetune = 100;
    std::size_t batch_size = 32;
    std::size_t labeled_per_batch = 16;
    std::size_t patience = 10;
    std::size_t d_x = 128;
    std::size_t d_h = 64;
    std::size_t d_p = 64;
    std::size_t layers = 2;
    std::uint64_t seed = 0;
    std::size_t n_splits = 10;
    std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
    std::vector<std::size_t> k_values{10, 20, 50, 100, 200, 500};
    std::size_t fewshot_seeds = 5;
    std::string ablation = "full";
    std::vector<std::string> label_set{"non-rumor", "rumor"};
    std::string corpus;
    std::string out_dir = ".";
    std::string checkpoint;

    TrainConfig train() const {
        TrainConfig t;
        t.method = method_from_name(method);
        t.alpha = alpha;
        t.beta = beta;
        t.lambda = lambda;
        t.gamma = gamma;
        t.lr = lr;
        t.lower_lr = lower_lr;
        t.aug_ratio = aug_ratio;
        t.mask_rate = mask_rate;
        t.replace_rate = replace_rate;
        t.epochs_pretrain = epochs_pretrain;
        t.epochs_finetune = epochs_finetune;
        t.batch_size = batch_size;
        t.labeled_per_batch = labeled_per_batch;
        t.patience = patience;
        t.d_h = d_h;
        t.layers = layers;
        t.d_p = d_p;
        t.seed = seed;
        return t;
    }

    void validate() const {
        method_from_name(method);
        ablation_from_name(ablation);
        if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
        if (beta < 0.0) throw ConfigError("beta must be >= 0");
        if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
        if (gamma < 1.0) throw ConfigError("gamma must be >= 1");
        if (lr <= 0.0) throw ConfigError("lr must be > 0");
        if (lower_lr <= 0.0) throw ConfigError("lower_lr must be > 0");
        if (aug_ratio <= 0.0 || aug_ratio >= 1.0) throw ConfigError("aug_ratio must lie in (0,1)");
        if (mask_rate < 0.0 || mask_rate > 1.0) throw ConfigError("mask_rate must lie in [0,1]");
        if (replace_rate < 0.0 || replace_rate > 1.0) {
            throw ConfigError("replace_rate must lie in [0,1]");
        }
        if (epochs_finetune < 1) throw ConfigError("epochs_finetune must be >= 1");
        if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
        if (labeled_per_batch < 1 || labeled_per_batch > batch_size) {
            throw ConfigError("labeled_per_batch must lie in [1, batch_size]");
        }
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (d_x < 2) throw ConfigError("d_x must be >= 2");
        if (d_h < 1) throw ConfigError("d_h must be >= 1");
        if (d_p < 1) throw ConfigError("d_p must be >= 1");
        if (layers < 1) throw ConfigError("layers must be >= 1");
        if (n_splits < 1) throw ConfigError("n_splits must be >= 1");
        double rsum = 0.0;
        for (double r : split_ratios) {
            if (r <= 0.0) throw ConfigError("split_ratios entries must be > 0");
            rsum += r;
        }
        if (std::abs(rsum - 1.0) > 1e-9) throw ConfigError("split_ratios must sum to 1");
        if (k_values.empty()) throw ConfigError("k_values must be nonempty");
        for (std::size_t i = 0; i < k_values.size(); ++i) {
            if (k_values[i] < 1) throw ConfigError("k_values entries must be >= 1");
            if (i > 0 && k_values[i] <= k_values[i - 1]) {
                throw ConfigError("k_values must be strictly increasing");
            }
        }
        if (fewshot_seeds < 1) throw ConfigError("fewshot_seeds must be >= 1");
        if (label_set.size() < 2) throw ConfigError("label_set needs at least 2 labels");
        for (const std::string& l : label_set) {
            if (l != "rumor" && l != "non-rumor" && l != "true" && l != "false" &&
                l != "unverified") {
                throw ConfigError("unknown label '" + l + "' in label_set");
            }
        }
        for (std::size_t i = 0; i < label_set.size(); ++i) {
            for (std::size_t j = i + 1; j < label_set.size(); ++j) {
                if (label_set[i] == label_set[j]) {
                    throw ConfigError("duplicate label '" + label_set[i] + "' in label_set");
                }
            }
        }
    }
};

namespace detail {

inline double as_double(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

inline std::uint64_t as_count(const json& v, const std::string& key) {
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
        throw ConfigError("config key '" + key + "' must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

inline std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace detail

// Overlays one JSON object onto a config. Unknown keys are an error so a
// typo'd setting can't silently fall back to its default.
inline void apply_config_json(RunConfig& c, const json& obj, const std::string& origin) {
    if (!obj.is_object()) throw ConfigError(origin + ": config must be a JSON object");
    for (const auto& [key, v] : obj.items()) {
        if (key == "method") c.method = detail::as_string(v, key);
        else if (key == "alpha") c.alpha = detail::as_double(v, key);
        else if (key == "beta") c.beta = detail::as_double(v, key);
        else if (key == "lambda") c.lambda = detail::as_double(v, key);
        else if (key == "gamma") c.gamma = detail::as_double(v, key);
        else if (key == "lr") c.lr = detail::as_double(v, key);
        else if (key == "lower_lr") c.lower_lr = detail::as_double(v, key);
        else if (key == "aug_ratio") c.aug_ratio = detail::as_double(v, key);
        else if (key == "mask_rate") c.mask_rate = detail::as_double(v, key);
        else if (key == "replace_rate") c.replace_rate = detail::as_double(v, key);
        else if (key == "epochs_pretrain") c.epochs_pretrain = detail::as_count(v, key);
        else if (key == "epochs_finetune") c.epochs_finetune = detail::as_count(v, key);
        else if (key == "batch_size") c.batch_size = detail::as_count(v, key);
        else if (key == "labeled_per_batch") c.labeled_per_batch = detail::as_count(v, key);
        else if (key == "patience") c.patience = detail::as_count(v, key);
        else if (key == "d_x") c.d_x = detail::as_count(v, key);
        else if (key == "d_h") c.d_h = detail::as_count(v, key);
        else if (key == "d_p") c.d_p = detail::as_count(v, key);
        else if (key == "layers") c.layers = detail::as_count(v, key);
        else if (key == "seed") c.seed = detail::as_count(v, key);
        else if (key == "n_splits") c.n_splits = detail::as_count(v, key);
        else if (key == "split_ratios") {
            if (!v.is_array() || v.size() != 3) {
                throw ConfigError("config key 'split_ratios' must be an array of 3 numbers");
            }
            for (std::size_t i = 0; i < 3; ++i) c.split_ratios[i] = detail::as_double(v[i], key);
        } else if (key == "k_values") {
            if (!v.is_array()) throw ConfigError("config key 'k_values' must be an array");
            c.k_values.clear();
            for (const auto& e : v) c.k_values.push_back(detail::as_count(e, key));
        } else if (key == "fewshot_seeds") {
            c.fewshot_seeds = detail::as_count(v, key);
        } else if (key == "ablation") {
            c.ablation = detail::as_string(v, key);
        } else if (key == "label_set") {
            if (!v.is_array()) throw ConfigError("config key 'label_set' must be an array");
            c.label_set.clear();
            for (const auto& e : v) c.label_set.push_back(detail::as_string(e, key));
        } else if (key == "corpus") {
            c.corpus = detail::as_string(v, key);
        } else if (key == "out_dir") {
            c.out_dir = detail::as_string(v, key);
        } else if (key == "checkpoint") {
            c.checkpoint = detail::as_string(v, key);
        } else {
            throw ConfigError(origin + ": unknown config key '" + key + "'");
        }
    }
}

inline json config_to_json(const RunConfig& c) {
    json j = json::object();
    j["method"] = c.method;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["lambda"] = c.lambda;
    j["gamma"] = c.gamma;
    j["lr"] = c.lr;
    j["lower_lr"] = c.lower_lr;
    j["aug_ratio"] = c.aug_ratio;
    j["mask_rate"] = c.mask_rate;
    j["replace_rate"] = c.replace_rate;
    j["epochs_pretrain"] = c.epochs_pretrain;
    j["epochs_finetune"] = c.epochs_finetune;
    j["batch_size"] = c.batch_size;
    j["labeled_per_batch"] = c.labeled_per_batch;
    j["patience"] = c.patience;
    j["d_x"] = c.d_x;
    j["d_h"] = c.d_h;
    j["d_p"] = c.d_p;
    j["layers"] = c.layers;
    j["seed"] = c.seed;
    j["n_splits"] = c.n_splits;
    j["split_ratios"] = c.split_ratios;
    j["k_values"] = c.k_values;
    j["fewshot_seeds"] = c.fewshot_seeds;
    j["ablation"] = c.ablation;
    j["label_set"] = c.label_set;
    j["corpus"] = c.corpus;
    j["out_dir"] = c.out_dir;
    j["checkpoint"] = c.checkpoint;
    return j;
}

// Resolves defaults <- config file <- explicit flag overrides, then validates.
inline RunConfig resolve_config(const std::string& config_path, const json& flag_overrides) {
    RunConfig c;
    if (!config_path.empty()) {
        json file_obj;
        try {
            file_obj = json::parse(read_file(config_path));
        } catch (const json::parse_error& e) {
            throw ParseError("config file " + config_path + ": " + e.what());
        }
        apply_config_json(c, file_obj, config_path);
    }
    apply_config_json(c, flag_overrides, "command line");
    c.validate();
    return c;
}

}  // namespace graphssl
