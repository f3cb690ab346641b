#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fgtt/errors.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/rng.hpp"
#include "fgtt/tree.hpp"

namespace fgtt::trees {

struct ForestConfig {
    std::size_t n_estimators = 100;
    std::size_t max_depth = 0;        // 0 = unlimited
    std::size_t min_samples_split = 2;
    double features_per_split = 0.0;  // fraction of columns; 0 = sqrt(#columns)
    std::uint64_t seed = 0;

    void validate() const {
        if (n_estimators < 1) throw config_error("forest: n_estimators must be >= 1");
        if (min_samples_split < 2) throw config_error("forest: min_samples_split must be >= 2");
        if (features_per_split < 0.0 || features_per_split > 1.0)
            throw config_error("forest: features_per_split must be in [0,1]");
    }
};

struct Forest {
    std::vector<DecisionTree> trees;
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
};

namespace detail {

struct GiniBuilder {
    const data::EncodedMatrix& X;
    const std::vector<int>& y;
    std::size_t n_classes;
    const ForestConfig& cfg;
    Rng& rng;
    DecisionTree tree;

    std::size_t features_per_split() const {
        const std::size_t d = X.cols();
        std::size_t k = cfg.features_per_split > 0.0
                            ? static_cast<std::size_t>(std::lround(cfg.features_per_split *
                                                                   static_cast<double>(d)))
                            : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
        return std::min(std::max<std::size_t>(k, 1), d);
    }

    int build(const SortedColumns& cols, std::size_t depth) {
        const std::size_t n = cols.n();
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::uint32_t idx : cols.order[0]) ++counts[static_cast<std::size_t>(y[idx])];
        std::size_t present = 0;
        for (std::size_t c : counts) present += c > 0 ? 1 : 0;

        const bool stop = present <= 1 || n < cfg.min_samples_split ||
                          (cfg.max_depth > 0 && depth >= cfg.max_depth);
        Candidate best;
        if (!stop) {
            // shuffled feature order: score the first k, then keep going only
            // while no usable threshold has been found
            std::vector<std::size_t> feats(X.cols());
            for (std::size_t f = 0; f < feats.size(); ++f) feats[f] = f;
            rng.shuffle(feats);
            const std::size_t k = features_per_split();
            for (std::size_t fi = 0; fi < feats.size(); ++fi) {
                if (fi >= k && best.found) break;
                scan_gini(X, cols.order[feats[fi]], y, feats[fi], n_classes, counts, best);
            }
        }
        if (stop || !best.found) {
            TreeNode leaf;
            leaf.dist.resize(n_classes);
            for (std::size_t c = 0; c < n_classes; ++c)
                leaf.dist[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
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

}  // namespace detail

// bootstrap per tree, Gini splits over a per-node random feature subset;
// per-tree substreams keep results identical however trees are scheduled
inline Forest train_random_forest(const data::EncodedMatrix& X, const std::vector<int>& y,
                                  const ForestConfig& cfg) {
    cfg.validate();
    if (X.rows == 0 || y.size() != X.rows) throw contract_error("forest: bad training data");
    int mx = 0;
    for (int l : y) mx = std::max(mx, l);
    const std::size_t n_classes = static_cast<std::size_t>(mx + 1);
    std::size_t present = 0;
    std::vector<std::size_t> counts(n_classes, 0);
    for (int l : y) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t c : counts) present += c > 0 ? 1 : 0;
    if (present < 2) throw data_error("forest: degenerate single-class training data");

    Forest forest;
    forest.n_classes = n_classes;
    forest.n_features = X.cols();
    Rng master(cfg.seed);
    for (std::size_t t = 0; t < cfg.n_estimators; ++t) {
        Rng rng = master.substream(t);
        std::vector<std::uint32_t> samples(X.rows);
        for (auto& s : samples) s = static_cast<std::uint32_t>(rng.below(X.rows));
        auto cols = detail::SortedColumns::build(X, samples);
        detail::GiniBuilder builder{X, y, n_classes, cfg, rng, {}};
        builder.build(cols, 0);
        forest.trees.push_back(std::move(builder.tree));
    }
    return forest;
}

struct ForestPrediction {
    std::vector<int> classes;
    std::vector<double> probs;  // rows x n_classes, averaged leaf distributions
};

inline ForestPrediction predict_forest(const Forest& forest, const data::EncodedMatrix& X) {
    if (X.cols() != forest.n_features)
        throw shape_error("forest: input has " + std::to_string(X.cols()) + " columns, trained on " +
                          std::to_string(forest.n_features));
    ForestPrediction out;
    out.probs.assign(X.rows * forest.n_classes, 0.0);
    const double nt = static_cast<double>(forest.trees.size());
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double* row = X.values.data() + r * X.cols();
        double* p = out.probs.data() + r * forest.n_classes;
        for (const auto& tree : forest.trees) {
            const TreeNode& leaf = tree.leaf_for(row);
            for (std::size_t c = 0; c < forest.n_classes; ++c) p[c] += leaf.dist[c] / nt;
        }
        out.classes.push_back(train::argmax_class(p, forest.n_classes));
    }
    return out;
}

}  // namespace fgtt::trees
