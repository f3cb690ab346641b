#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fgtt/errors.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/tree.hpp"

namespace fgtt::trees {

struct BoosterConfig {
    double eta = 0.1;
    std::size_t n_estimators = 100;  // boosting rounds
    std::size_t max_depth = 4;       // 0 = single leaf per tree
    double lambda = 1.0;             // leaf-weight penalty
    double gamma_complexity = 0.0;   // per-split penalty
    std::uint64_t seed = 0;

    void validate() const {
        if (!(eta > 0.0 && eta <= 1.0)) throw config_error("booster: eta must be in (0,1]");
        if (!(lambda >= 0.0)) throw config_error("booster: lambda must be >= 0");
        if (n_estimators < 1) throw config_error("booster: n_estimators must be >= 1");
    }
};

struct Booster {
    std::vector<std::vector<DecisionTree>> rounds;  // [round][class]
    std::vector<double> base;                       // per-class log-prior logits
    double eta = 0.1;
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
};

namespace detail {

struct GradBuilder {
    const data::EncodedMatrix& X;
    const std::vector<double>& g;
    const std::vector<double>& h;
    const BoosterConfig& cfg;
    DecisionTree tree;

    int build(const SortedColumns& cols, std::size_t depth) {
        double G = 0.0, H = 0.0;
        for (std::uint32_t idx : cols.order[0]) {
            G += g[idx];
            H += h[idx];
        }
        Candidate best;
        if (depth < cfg.max_depth && cols.n() >= 2) {
            for (std::size_t f = 0; f < X.cols(); ++f)
                scan_grad(X, cols.order[f], g, h, f, G, H, cfg.lambda, best);
        }
        // the gain already carries the -gamma term; split only when positive
        if (!best.found || best.gain - cfg.gamma_complexity <= 0.0) {
            TreeNode leaf;
            leaf.weight = -G / (H + cfg.lambda);
            tree.nodes.push_back(std::move(leaf));
            return static_cast<int>(tree.nodes.size()) - 1;
        }
        SortedColumns left, right;
        cols.split_into(best.feature, best.threshold, left, right);
        const int me = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(me)].feature = static_cast<int>(best.feature);
        tree.nodes[static_cast<std::size_t>(me)].threshold = best.threshold;
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        tree.nodes[static_cast<std::size_t>(me)].left = l;
        tree.nodes[static_cast<std::size_t>(me)].right = r;
        return me;
    }
};

inline void softmax_rows_inplace(std::vector<double>& logits, std::size_t n, std::size_t C) {
    for (std::size_t i = 0; i < n; ++i) {
        double* row = logits.data() + i * C;
        double mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (std::size_t c = 0; c < C; ++c) row[c] /= sum;
    }
}

}  // namespace detail

// One tree per class per round on softmax gradients/Hessians; logits start at
// the class log priors so a depth-0 single round leaves them unchanged.
inline Booster train_booster(const data::EncodedMatrix& X, const std::vector<int>& y,
                             const BoosterConfig& cfg) {
    cfg.validate();
    if (X.rows == 0 || y.size() != X.rows) throw contract_error("booster: bad training data");
    int mx = 0;
    for (int l : y) mx = std::max(mx, l);
    const std::size_t C = static_cast<std::size_t>(mx + 1);
    const std::size_t n = X.rows;
    std::vector<std::size_t> counts(C, 0);
    for (int l : y) ++counts[static_cast<std::size_t>(l)];
    std::size_t present = 0;
    for (std::size_t c : counts) present += c > 0 ? 1 : 0;
    if (present < 2) throw data_error("booster: degenerate single-class training data");

    Booster booster;
    booster.eta = cfg.eta;
    booster.n_classes = C;
    booster.n_features = X.cols();
    for (std::size_t c = 0; c < C; ++c)
        booster.base.push_back(std::log(std::max(static_cast<double>(counts[c]) /
                                                     static_cast<double>(n), 1e-12)));

    std::vector<double> logits(n * C);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < C; ++c) logits[i * C + c] = booster.base[c];

    std::vector<std::uint32_t> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = static_cast<std::uint32_t>(i);
    const auto root_cols = detail::SortedColumns::build(X, samples);

    std::vector<double> probs, g(n), h(n);
    for (std::size_t round = 0; round < cfg.n_estimators; ++round) {
        probs = logits;
        detail::softmax_rows_inplace(probs, n, C);
        booster.rounds.emplace_back();
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = probs[i * C + c];
                g[i] = p - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
                h[i] = std::max(p * (1.0 - p), 1e-16);
                if (!std::isfinite(g[i]) || !std::isfinite(h[i]))
                    throw train_error("booster: non-finite gradient at round " + std::to_string(round));
            }
            detail::GradBuilder builder{X, g, h, cfg, {}};
            builder.build(root_cols, 0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = X.values.data() + i * X.cols();
                logits[i * C + c] += cfg.eta * builder.tree.leaf_for(row).weight;
            }
            booster.rounds.back().push_back(std::move(builder.tree));
        }
    }
    return booster;
}

struct BoosterPrediction {
    std::vector<int> classes;
    std::vector<double> probs;
    std::vector<double> logits;
};

inline BoosterPrediction predict_booster(const Booster& booster, const data::EncodedMatrix& X) {
    if (X.cols() != booster.n_features)
        throw shape_error("booster: input has " + std::to_string(X.cols()) + " columns, trained on " +
                          std::to_string(booster.n_features));
    const std::size_t C = booster.n_classes;
    BoosterPrediction out;
    out.logits.assign(X.rows * C, 0.0);
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double* row = X.values.data() + r * X.cols();
        double* lg = out.logits.data() + r * C;
        for (std::size_t c = 0; c < C; ++c) lg[c] = booster.base[c];
        for (const auto& round : booster.rounds)
            for (std::size_t c = 0; c < C; ++c) lg[c] += booster.eta * round[c].leaf_for(row).weight;
    }
    out.probs = out.logits;
    detail::softmax_rows_inplace(out.probs, X.rows, C);
    for (std::size_t r = 0; r < X.rows; ++r)
        out.classes.push_back(train::argmax_class(out.probs.data() + r * C, C));
    return out;
}

inline double multiclass_log_loss(const BoosterPrediction& pred, const std::vector<int>& y,
                                  std::size_t n_classes) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        acc -= std::log(std::max(pred.probs[i * n_classes + static_cast<std::size_t>(y[i])], 1e-15));
    return acc / static_cast<double>(y.size());
}

}  // namespace fgtt::trees
