#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "fgtt/csv.hpp"
#include "fgtt/encode.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/rng.hpp"

namespace fgtt::report {

using Predictor = std::function<std::vector<int>(const data::EncodedMatrix&)>;

struct ImportanceEntry {
    std::string name;
    double mean_drop = 0.0;
};

struct ImportanceResult {
    double baseline_f1 = 0.0;
    std::vector<ImportanceEntry> features;  // descending mean drop
    std::vector<ImportanceEntry> groups;
};

namespace detail {

inline void permute_block(data::EncodedMatrix& X, const std::vector<std::size_t>& cols, Rng& rng) {
    std::vector<std::size_t> perm(X.rows);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<double> buf(X.rows);
    for (std::size_t c : cols) {
        for (std::size_t r = 0; r < X.rows; ++r) buf[r] = X.at(perm[r], c);
        for (std::size_t r = 0; r < X.rows; ++r) X.at(r, c) = buf[r];
    }
}

inline void sort_desc(std::vector<ImportanceEntry>& v) {
    std::stable_sort(v.begin(), v.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
        return a.mean_drop > b.mean_drop;
    });
}

}  // namespace detail

// Mean weighted-F1 drop when a feature's one-hot columns (or a whole group's
// columns) are row-permuted jointly. One permutation stream per (block,
// repeat), so results do not depend on evaluation order. The input matrix is
// never modified.
inline ImportanceResult permutation_importance(const Predictor& predict, const data::EncodedMatrix& X,
                                               const std::vector<int>& y, std::size_t repeats,
                                               std::uint64_t seed) {
    if (repeats < 1) throw contract_error("permutation_importance: repeats must be >= 1");
    if (y.size() != X.rows) throw contract_error("permutation_importance: label/row mismatch");

    ImportanceResult res;
    res.baseline_f1 = train::compute_metrics(predict(X), y).weighted_f1;

    // blocks: one per source feature, one per group (column order preserved)
    std::vector<std::pair<std::string, std::vector<std::size_t>>> feature_blocks, group_blocks;
    for (std::size_t c = 0; c < X.cols(); ++c) {
        const auto& cm = X.columns[c];
        auto push = [&](std::vector<std::pair<std::string, std::vector<std::size_t>>>& blocks,
                        const std::string& key) {
            for (auto& [name, cols] : blocks)
                if (name == key) {
                    cols.push_back(c);
                    return;
                }
            blocks.push_back({key, {c}});
        };
        push(feature_blocks, cm.feature);
        push(group_blocks, cm.group);
    }

    Rng master(seed);
    std::uint64_t stream = 0;
    auto score_blocks = [&](const std::vector<std::pair<std::string, std::vector<std::size_t>>>& blocks,
                            std::vector<ImportanceEntry>& out) {
        for (const auto& [name, cols] : blocks) {
            double drop = 0.0;
            for (std::size_t rep = 0; rep < repeats; ++rep) {
                data::EncodedMatrix shuffled = X;
                Rng rng = master.substream(stream + rep);
                detail::permute_block(shuffled, cols, rng);
                drop += res.baseline_f1 - train::compute_metrics(predict(shuffled), y).weighted_f1;
            }
            stream += repeats;
            out.push_back(ImportanceEntry{name, drop / static_cast<double>(repeats)});
        }
        detail::sort_desc(out);
    };
    score_blocks(feature_blocks, res.features);
    score_blocks(group_blocks, res.groups);
    return res;
}

inline void write_importance(std::ostream& out, const ImportanceResult& res) {
    csv::write_row(out, {"scope", "name", "mean_f1_drop", "baseline_f1"});
    for (const auto& e : res.features)
        csv::write_row(out, {"feature", e.name, csv::num(e.mean_drop), csv::num(res.baseline_f1)});
    for (const auto& e : res.groups)
        csv::write_row(out, {"group", e.name, csv::num(e.mean_drop), csv::num(res.baseline_f1)});
}

}  // namespace fgtt::report
