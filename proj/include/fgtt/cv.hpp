#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "fgtt/booster.hpp"
#include "fgtt/forest.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/split.hpp"

namespace fgtt::trees {

using ParamGrid = std::vector<std::pair<std::string, std::vector<double>>>;

struct GridCell {
    std::map<std::string, double> params;
    std::vector<double> fold_f1;
    double mean_f1 = 0.0;
};

struct GridResult {
    GridCell best;
    std::vector<GridCell> table;
};

namespace detail {

// cartesian product; the first grid dimension varies slowest
inline std::vector<std::map<std::string, double>> expand_grid(const ParamGrid& grid) {
    std::vector<std::map<std::string, double>> cells{{}};
    for (const auto& [name, values] : grid) {
        if (values.empty()) throw config_error("grid: empty value list for " + name);
        std::vector<std::map<std::string, double>> next;
        for (const auto& cell : cells)
            for (double v : values) {
                auto c = cell;
                c[name] = v;
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }
    return cells;
}

inline ForestConfig forest_config_of(const std::map<std::string, double>& p, std::uint64_t seed) {
    ForestConfig cfg;
    cfg.seed = seed;
    for (const auto& [k, v] : p) {
        if (k == "n_estimators") cfg.n_estimators = static_cast<std::size_t>(v);
        else if (k == "max_depth") cfg.max_depth = static_cast<std::size_t>(v);
        else if (k == "min_samples_split") cfg.min_samples_split = static_cast<std::size_t>(v);
        else if (k == "features_per_split") cfg.features_per_split = v;
        else throw config_error("grid: unknown forest parameter " + k);
    }
    return cfg;
}

inline BoosterConfig booster_config_of(const std::map<std::string, double>& p, std::uint64_t seed) {
    BoosterConfig cfg;
    cfg.seed = seed;
    for (const auto& [k, v] : p) {
        if (k == "eta") cfg.eta = v;
        else if (k == "n_estimators") cfg.n_estimators = static_cast<std::size_t>(v);
        else if (k == "max_depth") cfg.max_depth = static_cast<std::size_t>(v);
        else if (k == "lambda") cfg.lambda = v;
        else if (k == "gamma_complexity") cfg.gamma_complexity = v;
        else throw config_error("grid: unknown booster parameter " + k);
    }
    return cfg;
}

}  // namespace detail

// Stratified k-fold grid search scored by mean validation weighted F1. Fold
// assignment depends only on (labels, k, seed), so forest and booster runs
// share identical folds; ties keep the first cell in grid order.
inline GridResult grid_search_cv(const std::string& family, const ParamGrid& grid,
                                 const data::EncodedMatrix& X, const std::vector<int>& y,
                                 std::size_t k, std::uint64_t seed) {
    if (family != "forest" && family != "booster")
        throw config_error("grid_search_cv: unknown family " + family);
    if (k < 2) throw contract_error("grid_search_cv: k must be >= 2");
    auto cells = detail::expand_grid(grid);
    if (cells.empty()) throw config_error("grid_search_cv: empty grid");

    const auto folds = data::stratified_folds(y, k, seed);
    Rng master(seed);

    GridResult res;
    double best_score = -1.0;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        GridCell cell;
        cell.params = cells[ci];
        for (std::size_t fi = 0; fi < k; ++fi) {
            std::vector<std::size_t> train_rows;
            for (std::size_t fj = 0; fj < k; ++fj)
                if (fj != fi) train_rows.insert(train_rows.end(), folds[fj].begin(), folds[fj].end());
            std::sort(train_rows.begin(), train_rows.end());

            data::EncodedMatrix Xtr = X.subset(train_rows), Xva = X.subset(folds[fi]);
            std::vector<int> ytr, yva;
            for (std::size_t r : train_rows) ytr.push_back(y[r]);
            for (std::size_t r : folds[fi]) yva.push_back(y[r]);

            const std::uint64_t model_seed = master.substream(ci * k + fi).seed();
            std::vector<int> pred;
            if (family == "forest") {
                auto forest = train_random_forest(Xtr, ytr, detail::forest_config_of(cell.params,
                                                                                     model_seed));
                pred = predict_forest(forest, Xva).classes;
            } else {
                auto booster = train_booster(Xtr, ytr, detail::booster_config_of(cell.params,
                                                                                 model_seed));
                pred = predict_booster(booster, Xva).classes;
            }
            cell.fold_f1.push_back(train::compute_metrics(pred, yva).weighted_f1);
        }
        for (double f : cell.fold_f1) cell.mean_f1 += f;
        cell.mean_f1 /= static_cast<double>(k);
        if (cell.mean_f1 > best_score) {
            best_score = cell.mean_f1;
            res.best = cell;
        }
        res.table.push_back(std::move(cell));
    }
    return res;
}

// one row per grid cell: parameters, per-fold F1, mean
inline void write_cv_table(std::ostream& out, const GridResult& res) {
    if (res.table.empty()) return;
    std::vector<std::string> header;
    for (const auto& [k, v] : res.table[0].params) header.push_back(k);
    const std::size_t folds = res.table[0].fold_f1.size();
    for (std::size_t f = 0; f < folds; ++f) header.push_back("fold" + std::to_string(f) + "_f1");
    header.push_back("mean_f1");
    csv::write_row(out, header);
    for (const auto& cell : res.table) {
        std::vector<std::string> row;
        for (const auto& [k, v] : cell.params) row.push_back(csv::num(v));
        for (double f : cell.fold_f1) row.push_back(csv::num(f));
        row.push_back(csv::num(cell.mean_f1));
        csv::write_row(out, row);
    }
}

}  // namespace fgtt::trees
