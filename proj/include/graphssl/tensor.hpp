#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "graphssl/errors.hpp"

namespace graphssl {

// Dense row-major tensor of 64-bit floats, rank 0 (scalar) through 2.
// Values are checked finite at creation; ops re-check their outputs.
class Tensor {
  public:
    Tensor() = default;

    static Tensor scalar(double v) {
        Tensor t;
        t.values_.assign(1, v);
        t.check_finite("scalar");
        return t;
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.values_.assign(t.count(), 0.0);
        return t;
    }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.values_.assign(t.count(), v);
        t.check_finite("full");
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.values_ = std::move(values);
        if (t.values_.size() != t.count()) {
            throw DimensionError("tensor value count " + std::to_string(t.values_.size()) +
                                 " does not match shape " + t.shape_str());
        }
        t.check_finite("from");
        return t;
    }

    static Tensor row(std::vector<double> values) {
        const std::size_t n = values.size();
        return from({n}, std::move(values));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        std::size_t r = rows.size();
        std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> v;
        v.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged matrix initializer");
            v.insert(v.end(), row.begin(), row.end());
        }
        return from({r, c}, std::move(v));
    }

    static Tensor identity(std::size_t n) {
        Tensor t = zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) t.values_[i * n + i] = 1.0;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::size_t rows() const { return rank() >= 1 ? shape_[0] : 1; }
    std::size_t cols() const {
        if (rank() == 2) return shape_[1];
        if (rank() <= 1) return rank() == 0 ? 1 : shape_[0];
        throw DimensionError("cols() on rank-" + std::to_string(rank()) + " tensor");
    }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }

    double item() const {
        if (size() != 1) throw ContractError("item() on tensor of size " + std::to_string(size()));
        return values_[0];
    }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    const std::vector<double>& values() const { return values_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? " x " : "") << shape_[i];
        os << "]";
        return os.str();
    }

    bool all_finite() const {
        for (double v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void check_finite(const std::string& where) const {
        if (!all_finite()) {
            throw NumericError("non-finite value in " + where + " " + shape_str());
        }
    }

  private:
    std::size_t count() const {
        return std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                               [](std::size_t a, std::size_t b) { return a * b; });
    }

    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

inline bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && a.values() == b.values();
}

// Fixed sparse n x n operator in coordinate form. Coefficients are constants
// with respect to differentiation (adjacency structure, not parameters).
struct SparseMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row;
    std::vector<std::size_t> col;
    std::vector<double> val;

    void reserve(std::size_t k) {
        row.reserve(k);
        col.reserve(k);
        val.reserve(k);
    }

    void add_entry(std::size_t r, std::size_t c, double v) {
        row.push_back(r);
        col.push_back(c);
        val.push_back(v);
    }

    Tensor to_dense() const {
        Tensor d = Tensor::zeros({n, n});
        for (std::size_t k = 0; k < val.size(); ++k) d.at(row[k], col[k]) += val[k];
        return d;
    }
};

}  // namespace graphssl
