#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fgtt/csv.hpp"
#include "fgtt/errors.hpp"

namespace fgtt::train {

// One-vs-rest precision/recall/F1 per class plus support-weighted averages.
// Per-class accuracy is the row-normalized confusion diagonal (= recall),
// matching the reference table layout; weighted recall equals overall accuracy.
struct Metrics {
    std::vector<std::vector<std::size_t>> confusion;  // rows = true, cols = predicted
    std::vector<std::size_t> support;
    std::vector<double> precision, recall, f1, accuracy;
    double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
    double overall_accuracy = 0;
    std::size_t total = 0;
};

inline Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& actual,
                               std::size_t n_classes = 0) {
    if (predicted.empty() || predicted.size() != actual.size())
        throw contract_error("compute_metrics: label vectors must be nonempty and equal length");
    int mx = 0;
    for (int v : predicted) mx = std::max(mx, v);
    for (int v : actual) mx = std::max(mx, v);
    const std::size_t C = std::max(n_classes, static_cast<std::size_t>(mx + 1));
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] < 0 || actual[i] < 0)
            throw contract_error("compute_metrics: negative class id");

    Metrics m;
    m.total = predicted.size();
    m.confusion.assign(C, std::vector<std::size_t>(C, 0));
    for (std::size_t i = 0; i < predicted.size(); ++i)
        ++m.confusion[static_cast<std::size_t>(actual[i])][static_cast<std::size_t>(predicted[i])];

    m.support.assign(C, 0);
    m.precision.assign(C, 0);
    m.recall.assign(C, 0);
    m.f1.assign(C, 0);
    m.accuracy.assign(C, 0);
    std::size_t correct = 0;
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t tp = m.confusion[c][c], fn = 0, fp = 0;
        for (std::size_t j = 0; j < C; ++j) {
            if (j != c) {
                fn += m.confusion[c][j];
                fp += m.confusion[j][c];
            }
        }
        m.support[c] = tp + fn;
        correct += tp;
        m.precision[c] = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall[c] = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double pr = m.precision[c] + m.recall[c];
        m.f1[c] = pr > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
        m.accuracy[c] = m.recall[c];
    }
    m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
    for (std::size_t c = 0; c < C; ++c) {
        const double w = static_cast<double>(m.support[c]) / static_cast<double>(m.total);
        m.weighted_precision += w * m.precision[c];
        m.weighted_recall += w * m.recall[c];
        m.weighted_f1 += w * m.f1[c];
    }
    return m;
}

inline int argmax_class(const double* probs, std::size_t n) {
    int best = 0;
    for (std::size_t c = 1; c < n; ++c)
        if (probs[c] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;  // ties keep the lowest class id
}

// per-class rows, weighted average, then row-normalized confusion percentages
inline void write_metrics_report(std::ostream& out, const Metrics& m,
                                 const std::vector<std::string>& class_names) {
    const std::size_t C = m.precision.size();
    std::vector<std::string> header{"label", "accuracy", "precision", "recall", "f1"};
    for (std::size_t c = 0; c < C; ++c) header.push_back("to_" + class_names[c]);
    csv::write_row(out, header);
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<std::string> row{class_names[c], csv::num(m.accuracy[c]), csv::num(m.precision[c]),
                                     csv::num(m.recall[c]), csv::num(m.f1[c])};
        for (std::size_t j = 0; j < C; ++j) {
            double frac = m.support[c] ? static_cast<double>(m.confusion[c][j]) /
                                             static_cast<double>(m.support[c])
                                       : 0.0;
            row.push_back(csv::num(frac));
        }
        csv::write_row(out, row);
    }
    std::vector<std::string> avg{"weighted_avg", csv::num(m.overall_accuracy),
                                 csv::num(m.weighted_precision), csv::num(m.weighted_recall),
                                 csv::num(m.weighted_f1)};
    for (std::size_t j = 0; j < C; ++j) avg.push_back("");
    csv::write_row(out, avg);
}

}  // namespace fgtt::train
