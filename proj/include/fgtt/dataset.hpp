#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fgtt/csv.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/schema.hpp"

namespace fgtt::data {

// Columnar rows: numeric cells are doubles (NaN = missing), categorical cells
// are category indices (-1 = missing). Vectors are indexed by schema feature
// position; the slot for the other kind stays empty.
struct Dataset {
    FeatureSchema schema;
    std::vector<std::vector<double>> numeric;
    std::vector<std::vector<int>> categorical;
    std::vector<int> labels;
    std::map<std::string, std::vector<std::string>> aux;

    std::size_t n_rows() const { return labels.size(); }

    static Dataset empty(const FeatureSchema& schema) {
        Dataset d;
        d.schema = schema;
        d.numeric.resize(schema.n_features());
        d.categorical.resize(schema.n_features());
        for (const auto& a : schema.aux_columns) d.aux[a] = {};
        return d;
    }

    bool is_missing(std::size_t feature, std::size_t row) const {
        const Feature& f = schema.features[feature];
        if (f.kind == FeatureKind::numeric) return std::isnan(numeric[feature][row]);
        return categorical[feature][row] < 0;
    }
};

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

inline Dataset load_dataset(const std::string& path, const FeatureSchema& schema) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw data_error("empty data file: " + path);
    const auto& header = rows[0];

    std::unordered_map<std::string, std::size_t> col_of;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (col_of.count(header[c])) throw data_error("duplicate column in header: " + header[c]);
        col_of[header[c]] = c;
    }
    if (!col_of.count(schema.label_column))
        throw data_error("header is missing label column " + schema.label_column);
    for (const auto& f : schema.features)
        if (!col_of.count(f.name)) throw data_error("header is missing feature column " + f.name);
    for (const auto& h : header) {
        if (h == schema.label_column || schema.index_of(h) >= 0 || schema.is_aux(h)) continue;
        throw data_error("header column " + h + " is not declared in the schema");
    }

    Dataset d = Dataset::empty(schema);
    const std::size_t label_col = col_of[schema.label_column];
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw data_error("row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                             " fields, header has " + std::to_string(header.size()));
        int label = schema.label_id(row[label_col]);
        if (label < 0)
            throw data_error("row " + std::to_string(r) + ": unknown label '" + row[label_col] + "'");
        d.labels.push_back(label);
        for (std::size_t fi = 0; fi < schema.n_features(); ++fi) {
            const Feature& f = schema.features[fi];
            const std::string& cell = row[col_of[f.name]];
            if (f.kind == FeatureKind::numeric) {
                double v;
                // unparseable and empty numeric cells both become missing
                d.numeric[fi].push_back(parse_double(cell, v) ? v
                                                              : std::numeric_limits<double>::quiet_NaN());
            } else {
                if (cell.empty()) {
                    d.categorical[fi].push_back(-1);
                    continue;
                }
                int code = -1;
                for (std::size_t ci = 0; ci < f.categories.size(); ++ci)
                    if (f.categories[ci] == cell) code = static_cast<int>(ci);
                if (code < 0)
                    throw data_error("row " + std::to_string(r) + ", feature " + f.name +
                                     ": undeclared category '" + cell + "'");
                d.categorical[fi].push_back(code);
            }
        }
        for (const auto& a : schema.aux_columns) {
            auto it = col_of.find(a);
            d.aux[a].push_back(it == col_of.end() ? std::string() : row[it->second]);
        }
    }
    return d;
}

inline void save_dataset(std::ostream& out, const Dataset& d) {
    const FeatureSchema& s = d.schema;
    std::vector<std::string> header{s.label_column};
    for (const auto& f : s.features) header.push_back(f.name);
    for (const auto& a : s.aux_columns) header.push_back(a);
    csv::write_row(out, header);
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        std::vector<std::string> row{s.label_classes[static_cast<std::size_t>(d.labels[r])]};
        for (std::size_t fi = 0; fi < s.n_features(); ++fi) {
            const Feature& f = s.features[fi];
            if (f.kind == FeatureKind::numeric) {
                double v = d.numeric[fi][r];
                row.push_back(std::isnan(v) ? std::string() : csv::num(v));
            } else {
                int c = d.categorical[fi][r];
                row.push_back(c < 0 ? std::string() : f.categories[static_cast<std::size_t>(c)]);
            }
        }
        for (const auto& a : s.aux_columns) row.push_back(d.aux.at(a)[r]);
        csv::write_row(out, row);
    }
}

inline void save_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    save_dataset(out, d);
}

// Group-mean imputation: each missing target cell takes the mean of observed
// target values sharing the row's grouping-key tuple; empty groups fall back
// to the global observed mean. Grouping keys may be categorical features or
// aux columns and must be fully observed.
inline Dataset impute_group_mean(const Dataset& data, const std::string& target,
                                 const std::vector<std::string>& grouping) {
    const FeatureSchema& s = data.schema;
    int ti = s.index_of(target);
    if (ti < 0) throw contract_error("impute_group_mean: unknown target feature " + target);
    if (s.features[static_cast<std::size_t>(ti)].kind != FeatureKind::numeric)
        throw contract_error("impute_group_mean: target " + target + " is not numeric");

    struct Key {
        const Dataset* d;
        std::vector<int> feat;                                  // categorical feature indices
        std::vector<const std::vector<std::string>*> aux_cols;  // aux key columns
        std::string of(std::size_t row) const {
            std::string k;
            for (int fi : feat) {
                int c = d->categorical[static_cast<std::size_t>(fi)][row];
                if (c < 0) throw contract_error("impute_group_mean: grouping feature has missing cells");
                k += std::to_string(c);
                k += '|';
            }
            for (const auto* col : aux_cols) {
                k += (*col)[row];
                k += '|';
            }
            return k;
        }
    } key{&data, {}, {}};

    for (const auto& g : grouping) {
        int gi = s.index_of(g);
        if (gi >= 0) {
            if (s.features[static_cast<std::size_t>(gi)].kind != FeatureKind::categorical)
                throw contract_error("impute_group_mean: grouping feature " + g + " is not categorical");
            key.feat.push_back(gi);
        } else if (data.aux.count(g)) {
            key.aux_cols.push_back(&data.aux.at(g));
        } else {
            throw contract_error("impute_group_mean: unknown grouping column " + g);
        }
    }

    const auto& col = data.numeric[static_cast<std::size_t>(ti)];
    std::unordered_map<std::string, std::pair<double, std::size_t>> sums;
    double global_sum = 0.0;
    std::size_t global_n = 0;
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        if (std::isnan(col[r])) continue;
        auto& acc = sums[key.of(r)];
        acc.first += col[r];
        acc.second += 1;
        global_sum += col[r];
        global_n += 1;
    }
    if (global_n == 0)
        throw data_error("impute_group_mean: no observed values for " + target);
    const double global_mean = global_sum / static_cast<double>(global_n);

    Dataset out = data;
    auto& ocol = out.numeric[static_cast<std::size_t>(ti)];
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        if (!std::isnan(ocol[r])) continue;
        auto it = sums.find(key.of(r));
        ocol[r] = (it != sums.end() && it->second.second > 0)
                      ? it->second.first / static_cast<double>(it->second.second)
                      : global_mean;
    }
    return out;
}

}  // namespace fgtt::data
