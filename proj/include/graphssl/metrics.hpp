#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "graphssl/errors.hpp"

namespace graphssl {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool zero_predictions = false;  // no claim was predicted as this class
};

struct MetricsReport {
    std::vector<std::vector<std::size_t>> confusion;  // [predicted][actual]
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
};

inline MetricsReport confusion_metrics(const std::vector<int>& predictions,
                                       const std::vector<int>& labels, std::size_t n_classes) {
    if (predictions.size() != labels.size()) {
        throw ContractError("confusion_metrics: prediction/label length mismatch");
    }
    if (predictions.empty()) throw ContractError("confusion_metrics: empty input");
    MetricsReport r;
    r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i], a = labels[i];
        if (p < 0 || a < 0 || static_cast<std::size_t>(p) >= n_classes ||
            static_cast<std::size_t>(a) >= n_classes) {
            throw ContractError("confusion_metrics: class index out of range");
        }
        r.confusion[static_cast<std::size_t>(p)][static_cast<std::size_t>(a)] += 1;
        if (p == a) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
    for (std::size_t c = 0; c < n_classes; ++c) {
        ClassMetrics m;
        std::size_t pred_c = 0, actual_c = 0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            pred_c += r.confusion[c][k];
            actual_c += r.confusion[k][c];
        }
        const std::size_t tp = r.confusion[c][c];
        if (pred_c == 0) {
            m.zero_predictions = true;
            m.precision = 0.0;
        } else {
            m.precision = static_cast<double>(tp) / static_cast<double>(pred_c);
        }
        m.recall = actual_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual_c);
        m.f1 = (m.precision + m.recall) == 0.0
                   ? 0.0
                   : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        r.per_class.push_back(m);
    }
    return r;
}

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw ContractError("mean of empty list");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Population standard deviation (divide by n, not n-1).
inline double population_std(const std::vector<double>& xs) {
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

// "0.xxx±0.yyy" with three decimals each.
inline std::string format_mean_std(double mean, double std_dev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f±%.3f", mean, std_dev);
    return buf;
}

inline std::string aggregate_runs(const std::vector<double>& accuracies) {
    return format_mean_std(mean_of(accuracies), population_std(accuracies));
}

}  // namespace graphssl
