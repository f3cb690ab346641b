#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fgtt/encode.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/rng.hpp"

namespace fgtt::trees {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    std::vector<double> dist;  // classification leaf: class distribution
    double weight = 0.0;       // boosting leaf

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // root at 0

    const TreeNode& leaf_for(const double* row) const {
        int n = 0;
        while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
            const TreeNode& node = nodes[static_cast<std::size_t>(n)];
            n = row[node.feature] < node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(n)];
    }
};

namespace detail {

// Per-feature sample orderings, filtered down the recursion so node scans stay
// O(columns x node size) without re-sorting.
struct SortedColumns {
    const data::EncodedMatrix* X = nullptr;
    std::vector<std::vector<std::uint32_t>> order;

    std::size_t n() const { return order.empty() ? 0 : order[0].size(); }

    static SortedColumns build(const data::EncodedMatrix& X, const std::vector<std::uint32_t>& samples) {
        SortedColumns sc;
        sc.X = &X;
        sc.order.resize(X.cols());
        for (std::size_t f = 0; f < X.cols(); ++f) {
            auto& ord = sc.order[f];
            ord = samples;
            std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
                return X.at(a, f) < X.at(b, f);
            });
        }
        return sc;
    }

    void split_into(std::size_t feature, double threshold, SortedColumns& left,
                    SortedColumns& right) const {
        left.X = right.X = X;
        left.order.assign(X->cols(), {});
        right.order.assign(X->cols(), {});
        for (std::size_t f = 0; f < X->cols(); ++f) {
            for (std::uint32_t idx : order[f]) {
                if (X->at(idx, feature) < threshold) left.order[f].push_back(idx);
                else right.order[f].push_back(idx);
            }
        }
    }
};

struct Candidate {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = -1e300;
};

inline double gini(const std::vector<std::size_t>& counts, double n) {
    double acc = 1.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / n;
        acc -= p * p;
    }
    return acc;
}

// best Gini split of one feature's sorted list; thresholds at midpoints
// between distinct values
inline void scan_gini(const data::EncodedMatrix& X, const std::vector<std::uint32_t>& ord,
                      const std::vector<int>& y, std::size_t feature, std::size_t n_classes,
                      const std::vector<std::size_t>& total_counts, Candidate& best) {
    const std::size_t n = ord.size();
    const double nd = static_cast<double>(n);
    const double parent = gini(total_counts, nd);
    std::vector<std::size_t> left_counts(n_classes, 0);
    std::vector<std::size_t> right_counts = total_counts;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(y[ord[i]]);
        ++left_counts[c];
        --right_counts[c];
        const double v = X.at(ord[i], feature), nv = X.at(ord[i + 1], feature);
        if (nv <= v) continue;
        const double nl = static_cast<double>(i + 1), nr = nd - nl;
        const double gain = parent - (nl * gini(left_counts, nl) + nr * gini(right_counts, nr)) / nd;
        if (gain > best.gain) {
            best.found = true;
            best.feature = feature;
            best.threshold = 0.5 * (v + nv);
            best.gain = gain;
        }
    }
}

// second-order split gain and the best threshold for one feature
inline void scan_grad(const data::EncodedMatrix& X, const std::vector<std::uint32_t>& ord,
                      const std::vector<double>& g, const std::vector<double>& h, std::size_t feature,
                      double G, double H, double lambda, Candidate& best) {
    const std::size_t n = ord.size();
    double GL = 0.0, HL = 0.0;
    const double parent = G * G / (H + lambda);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        GL += g[ord[i]];
        HL += h[ord[i]];
        const double v = X.at(ord[i], feature), nv = X.at(ord[i + 1], feature);
        if (nv <= v) continue;
        const double GR = G - GL, HR = H - HL;
        const double gain = 0.5 * (GL * GL / (HL + lambda) + GR * GR / (HR + lambda) - parent);
        if (gain > best.gain) {
            best.found = true;
            best.feature = feature;
            best.threshold = 0.5 * (v + nv);
            best.gain = gain;
        }
    }
}

}  // namespace detail

}  // namespace fgtt::trees
