#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "graphssl/autodiff.hpp"
#include "graphssl/errors.hpp"
#include "graphssl/rng.hpp"
#include "graphssl/tensor.hpp"

namespace graphssl {

// Named parameter collection. std::map keeps iteration order independent of
// creation order, so checkpoints and optimizer sweeps are stable.
class ParamStore {
public:
    // Glorot-uniform matrix, seeded by (seed, name) so the draw depends only
    // on the parameter's identity, never on registration order.
    Tensor& glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                   std::uint64_t seed) {
        auto it = params_.find(name);
        if (it != params_.end()) return it->second;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Rng rng(sub_seed(seed, name));
        Tensor w = Tensor::zeros({fan_in, fan_out});
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
        return params_.emplace(name, std::move(w)).first->second;
    }

    Tensor& zeros(const std::string& name, std::vector<std::size_t> shape) {
        auto it = params_.find(name);
        if (it != params_.end()) return it->second;
        return params_.emplace(name, Tensor::zeros(std::move(shape))).first->second;
    }

    Tensor& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }

    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    // Copies every parameter whose name starts with `prefix` into `dst`,
    // overwriting. Returns how many were copied.
    std::size_t copy_prefix_into(const std::string& prefix, ParamStore& dst) const {
        std::size_t n = 0;
        for (const auto& [name, value] : params_) {
            if (name.rfind(prefix, 0) == 0) {
                dst.params_[name] = value;
                ++n;
            }
        }
        return n;
    }

    std::map<std::string, Tensor>& raw() { return params_; }
    const std::map<std::string, Tensor>& raw() const { return params_; }

private:
    std::map<std::string, Tensor> params_;
};

// Per-forward-pass view binding parameters to tape leaves. Each leaf is
// created on first use within a pass; after backward() the leaf adjoints are
// the gradients of exactly the parameters the loss touched.
class TapeParams {
public:
    explicit TapeParams(ParamStore& store) : store_(&store) {}

    Value leaf(const std::string& name) {
        auto it = leaves_.find(name);
        if (it != leaves_.end()) return it->second;
        Value v = parameter(store_->at(name));
        return leaves_.emplace(name, std::move(v)).first->second;
    }

    Value glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                 std::uint64_t seed) {
        store_->glorot(name, fan_in, fan_out, seed);
        return leaf(name);
    }

    Value zeros(const std::string& name, std::vector<std::size_t> shape) {
        store_->zeros(name, std::move(shape));
        return leaf(name);
    }

    const std::map<std::string, Value>& bound() const { return leaves_; }
    ParamStore& store() { return *store_; }

private:
    ParamStore* store_;
    std::map<std::string, Value> leaves_;
};

// Adam with bias correction. State is keyed by parameter name and lives as
// long as the optimizer; step() only touches parameters the tape bound, so
// modules outside the active loss keep their moments and values untouched.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& store, const TapeParams& tape) {
        for (const auto& [name, leaf] : tape.bound()) {
            Tensor g = grad(leaf);
            g.check_finite("gradient of " + name);
            State& st = state_[name];
            if (st.m.empty()) {
                st.m = Tensor::zeros(g.shape());
                st.v = Tensor::zeros(g.shape());
            }
            st.t += 1;
            Tensor& p = store.at(name);
            const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
            const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
            for (std::size_t i = 0; i < g.size(); ++i) {
                st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g[i];
                st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g[i] * g[i];
                p[i] -= lr_ * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + eps_);
            }
            p.check_finite("updated " + name);
        }
    }

    void reset() { state_.clear(); }
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    struct State {
        Tensor m, v;
        std::uint64_t t = 0;
    };
    double lr_, beta1_, beta2_, eps_;
    std::map<std::string, State> state_;
};

}  // namespace graphssl
