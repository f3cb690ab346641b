#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "fgtt/csv.hpp"
#include "fgtt/dataset.hpp"
#include "fgtt/errors.hpp"

namespace fgtt::data {

// per numeric feature, fit on training rows only
struct NormalizationStats {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> sd;  // population convention (divide by n)

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline NormalizationStats fit_stats(const Dataset& data, const std::vector<std::size_t>& train) {
    if (train.empty()) throw contract_error("fit_stats: empty training index list");
    NormalizationStats st;
    const double n = static_cast<double>(train.size());
    for (std::size_t fi = 0; fi < data.schema.n_features(); ++fi) {
        const Feature& f = data.schema.features[fi];
        if (f.kind != FeatureKind::numeric) continue;
        double sum = 0.0;
        for (std::size_t r : train) {
            double v = data.numeric[fi][r];
            if (std::isnan(v)) throw contract_error("fit_stats: missing cell in " + f.name);
            sum += v;
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t r : train) {
            double d = data.numeric[fi][r] - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / n);
        if (!(sd > 0.0)) throw data_error("fit_stats: constant column " + f.name);
        st.names.push_back(f.name);
        st.mean.push_back(mean);
        st.sd.push_back(sd);
    }
    return st;
}

struct ColumnMeta {
    std::string feature;
    std::string group;
    std::string category;  // empty for numeric columns
};

struct EncodedMatrix {
    std::size_t rows = 0;
    std::vector<ColumnMeta> columns;
    std::vector<double> values;  // row-major rows x columns

    std::size_t cols() const { return columns.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }

    EncodedMatrix subset(const std::vector<std::size_t>& row_idx) const {
        EncodedMatrix out;
        out.columns = columns;
        out.rows = row_idx.size();
        out.values.resize(out.rows * cols());
        for (std::size_t i = 0; i < row_idx.size(); ++i) {
            if (row_idx[i] >= rows)
                throw data_error("subset: row index " + std::to_string(row_idx[i]) +
                                 " out of range for " + std::to_string(rows) + " rows");
            std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(row_idx[i] * cols()),
                        cols(), out.values.begin() + static_cast<std::ptrdiff_t>(i * cols()));
        }
        return out;
    }
};

inline std::vector<ColumnMeta> encoded_columns(const FeatureSchema& schema) {
    std::vector<ColumnMeta> cols;
    for (const auto& f : schema.features) {
        if (f.kind == FeatureKind::numeric) {
            cols.push_back(ColumnMeta{f.name, f.group, ""});
        } else {
            for (const auto& c : f.categories) cols.push_back(ColumnMeta{f.name, f.group, c});
        }
    }
    return cols;
}

// numeric -> (x - mean)/sd, categorical -> one-hot in declared category order
inline EncodedMatrix encode(const Dataset& data, const NormalizationStats& stats) {
    const FeatureSchema& s = data.schema;
    EncodedMatrix m;
    m.columns = encoded_columns(s);
    m.rows = data.n_rows();
    m.values.assign(m.rows * m.cols(), 0.0);

    std::size_t col = 0;
    for (std::size_t fi = 0; fi < s.n_features(); ++fi) {
        const Feature& f = s.features[fi];
        if (f.kind == FeatureKind::numeric) {
            int si = stats.index_of(f.name);
            if (si < 0) throw contract_error("encode: no normalization stats for " + f.name);
            const double mean = stats.mean[static_cast<std::size_t>(si)];
            const double sd = stats.sd[static_cast<std::size_t>(si)];
            for (std::size_t r = 0; r < m.rows; ++r) {
                double v = data.numeric[fi][r];
                if (std::isnan(v)) throw contract_error("encode: missing cell in " + f.name);
                m.at(r, col) = (v - mean) / sd;
            }
            ++col;
        } else {
            for (std::size_t r = 0; r < m.rows; ++r) {
                int c = data.categorical[fi][r];
                if (c < 0) throw contract_error("encode: missing cell in " + f.name);
                if (static_cast<std::size_t>(c) >= f.categories.size())
                    throw data_error("encode: category index out of range for " + f.name);
                m.at(r, col + static_cast<std::size_t>(c)) = 1.0;
            }
            col += f.categories.size();
        }
    }
    return m;
}

// recover the category of a one-hot block; round-trip check for encode
inline std::string decode_onehot(const EncodedMatrix& m, const std::string& feature, std::size_t row) {
    int hot = -1;
    std::size_t hits = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        if (m.columns[c].feature != feature || m.columns[c].category.empty()) continue;
        if (m.at(row, c) == 1.0) {
            hot = static_cast<int>(c);
            ++hits;
        } else if (m.at(row, c) != 0.0) {
            throw data_error("decode_onehot: non-binary cell in " + feature);
        }
    }
    if (hits != 1) throw data_error("decode_onehot: block of " + feature + " is not one-hot");
    return m.columns[static_cast<std::size_t>(hot)].category;
}

inline void save_encoded(const std::string& path, const EncodedMatrix& m, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    std::vector<std::string> header{"label"};
    for (const auto& c : m.columns)
        header.push_back(c.category.empty() ? c.feature : c.feature + "=" + c.category);
    csv::write_row(out, header);
    for (std::size_t r = 0; r < m.rows; ++r) {
        std::vector<std::string> row{std::to_string(labels[r])};
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(csv::num(m.at(r, c)));
        csv::write_row(out, row);
    }
}

inline void save_column_meta(const std::string& path, const std::vector<ColumnMeta>& cols) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    csv::write_row(out, {"column", "feature", "group", "category"});
    for (std::size_t c = 0; c < cols.size(); ++c)
        csv::write_row(out, {std::to_string(c), cols[c].feature, cols[c].group, cols[c].category});
}

}  // namespace fgtt::data
