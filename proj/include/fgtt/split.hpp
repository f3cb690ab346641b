#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "fgtt/csv.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/rng.hpp"

namespace fgtt::data {

struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
};

namespace detail {

// Integral cell counts with exact column sums (split totals), exact row sums
// (class counts), and every cell within 1 of its proportional quota
// n_c*T_s/n. Floors first; the leftover units form a small transportation
// problem on the cells with nonzero fractional part, solved by augmenting
// paths (feasible because the fractional parts themselves are a valid flow).
inline std::vector<std::vector<std::size_t>> allocate_cells(const std::vector<std::size_t>& counts,
                                                            const std::vector<std::size_t>& totals) {
    const std::size_t C = counts.size(), S = totals.size();
    const std::uint64_t n = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    std::vector<std::vector<std::size_t>> cell(C, std::vector<std::size_t>(S, 0));
    std::vector<std::uint64_t> rho(C, 0), kappa(totals.begin(), totals.end());
    std::vector<std::vector<bool>> frac(C, std::vector<bool>(S, false));
    for (std::size_t c = 0; c < C; ++c) {
        rho[c] = counts[c];
        for (std::size_t s = 0; s < S; ++s) {
            const std::uint64_t num = static_cast<std::uint64_t>(counts[c]) * totals[s];
            cell[c][s] = static_cast<std::size_t>(num / n);
            frac[c][s] = (num % n) != 0;
            rho[c] -= cell[c][s];
            kappa[s] -= cell[c][s];
        }
    }

    // unit-capacity bipartite flow: class supplies rho, split demands kappa
    std::vector<std::vector<bool>> used(C, std::vector<bool>(S, false));
    std::uint64_t remaining = std::accumulate(rho.begin(), rho.end(), std::uint64_t{0});
    while (remaining > 0) {
        // BFS from any class with supply to any split with demand over the
        // residual graph (forward unused frac edges, backward used edges)
        std::vector<int> prev_class(S, -1), prev_split(C, -2);
        std::vector<std::size_t> queue;
        for (std::size_t c = 0; c < C; ++c)
            if (rho[c] > 0) {
                prev_split[c] = -1;
                queue.push_back(c);
            }
        int found = -1;
        for (std::size_t qi = 0; qi < queue.size() && found < 0; ++qi) {
            const std::size_t c = queue[qi];
            for (std::size_t s = 0; s < S && found < 0; ++s) {
                if (!frac[c][s] || used[c][s] || prev_class[s] >= 0) continue;
                prev_class[s] = static_cast<int>(c);
                if (kappa[s] > 0) {
                    found = static_cast<int>(s);
                    break;
                }
                for (std::size_t c2 = 0; c2 < C; ++c2) {
                    if (used[c2][s] && prev_split[c2] == -2) {
                        prev_split[c2] = static_cast<int>(s);
                        queue.push_back(c2);
                    }
                }
            }
        }
        if (found < 0) throw data_error("stratification: infeasible split allocation");
        // walk the augmenting path back to a supplied class
        std::size_t s = static_cast<std::size_t>(found);
        for (;;) {
            std::size_t c = static_cast<std::size_t>(prev_class[s]);
            used[c][s] = true;
            if (prev_split[c] == -1) {
                --rho[c];
                break;
            }
            s = static_cast<std::size_t>(prev_split[c]);
            used[c][s] = false;
        }
        --kappa[static_cast<std::size_t>(found)];
        --remaining;
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t s = 0; s < S; ++s)
            if (used[c][s]) ++cell[c][s];
    return cell;
}

inline std::vector<std::vector<std::size_t>> assign_rows(const std::vector<int>& labels,
                                                         const std::vector<std::vector<std::size_t>>& cell,
                                                         std::uint64_t seed) {
    const std::size_t C = cell.size(), S = cell.empty() ? 0 : cell[0].size();
    std::vector<std::vector<std::size_t>> by_class(C);
    for (std::size_t r = 0; r < labels.size(); ++r)
        by_class[static_cast<std::size_t>(labels[r])].push_back(r);
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> parts(S);
    for (std::size_t c = 0; c < C; ++c) {
        rng.shuffle(by_class[c]);
        std::size_t pos = 0;
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t i = 0; i < cell[c][s]; ++i) parts[s].push_back(by_class[c][pos++]);
    }
    for (auto& p : parts) std::sort(p.begin(), p.end());
    return parts;
}

inline std::size_t n_classes_of(const std::vector<int>& labels) {
    int mx = -1;
    for (int l : labels) {
        if (l < 0) throw contract_error("negative class id");
        mx = std::max(mx, l);
    }
    return static_cast<std::size_t>(mx + 1);
}

inline std::vector<std::size_t> class_counts(const std::vector<int>& labels) {
    std::vector<std::size_t> counts(n_classes_of(labels), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

inline void check_class_sizes(const std::vector<std::size_t>& counts, std::size_t n_splits) {
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] < n_splits)
            throw data_error("stratification: class " + std::to_string(c) + " has " +
                             std::to_string(counts[c]) + " rows for " + std::to_string(n_splits) +
                             " splits");
}

}  // namespace detail

// Deterministic stratified train/validation/test split. Non-train totals are
// ceil(n*ratio) with train taking the remainder (6810 @ 0.885/0.0575/0.0575
// -> 6026/392/392); per-class counts stay within 1 of proportional.
inline SplitIndices stratified_split(const std::vector<int>& labels, std::array<double, 3> ratios,
                                     std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (n == 0) throw contract_error("stratified_split: empty label list");
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw contract_error("stratified_split: ratios must be positive");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw contract_error("stratified_split: ratios must sum to 1");

    std::vector<std::size_t> totals(3, 0);
    std::size_t taken = 0;
    for (std::size_t s = 1; s < 3; ++s) {
        const double q = static_cast<double>(n) * ratios[s];
        totals[s] = static_cast<std::size_t>(std::ceil(q - 1e-9 * static_cast<double>(n)));
        taken += totals[s];
    }
    if (taken >= n) throw data_error("stratification: too few rows for the requested ratios");
    totals[0] = n - taken;

    auto counts = detail::class_counts(labels);
    detail::check_class_sizes(counts, 3);
    auto cell = detail::allocate_cells(counts, totals);
    auto parts = detail::assign_rows(labels, cell, seed);
    return SplitIndices{std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

// Stratified k folds with largest-remainder fold totals; shared allocator, so
// fold assignment depends only on (labels, k, seed).
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels,
                                                              std::size_t k, std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (k < 2) throw contract_error("stratified_folds: k must be >= 2");
    if (n < k) throw data_error("stratification: fewer rows than folds");
    std::vector<std::size_t> totals(k, n / k);
    for (std::size_t i = 0; i < n % k; ++i) ++totals[i];
    auto counts = detail::class_counts(labels);
    detail::check_class_sizes(counts, k);
    auto cell = detail::allocate_cells(counts, totals);
    return detail::assign_rows(labels, cell, seed);
}

inline void save_splits_stream(std::ostream& out, const SplitIndices& sp,
                               const std::vector<int>& labels) {
    csv::write_row(out, {"row", "split", "label"});
    auto dump = [&](const std::vector<std::size_t>& idx, const char* name) {
        for (std::size_t r : idx)
            csv::write_row(out, {std::to_string(r), name, std::to_string(labels[r])});
    };
    dump(sp.train, "train");
    dump(sp.validation, "validation");
    dump(sp.test, "test");
}

inline void save_splits(const std::string& path, const SplitIndices& sp, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    save_splits_stream(out, sp, labels);
}

inline SplitIndices load_splits(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"row", "split", "label"})
        throw data_error("malformed split index file: " + path);
    SplitIndices sp;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != 3) throw data_error("malformed split index row in " + path);
        std::size_t r = static_cast<std::size_t>(std::stoull(row[0]));
        if (row[1] == "train") sp.train.push_back(r);
        else if (row[1] == "validation") sp.validation.push_back(r);
        else if (row[1] == "test") sp.test.push_back(r);
        else throw data_error("unknown split name '" + row[1] + "' in " + path);
    }
    return sp;
}

}  // namespace fgtt::data
