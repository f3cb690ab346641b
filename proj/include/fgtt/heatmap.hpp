#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fgtt/csv.hpp"
#include "fgtt/errors.hpp"

namespace fgtt::report {

// labelled square matrix as delimited text, 9 significant digits
inline void write_matrix_csv(const std::string& path, const std::vector<std::string>& labels,
                             const std::vector<double>& matrix) {
    const std::size_t n = labels.size();
    if (matrix.size() != n * n)
        throw contract_error("heatmap: matrix size " + std::to_string(matrix.size()) +
                             " does not match " + std::to_string(n) + " labels");
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    std::vector<std::string> header{""};
    header.insert(header.end(), labels.begin(), labels.end());
    csv::write_row(out, header);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> row{labels[i]};
        for (std::size_t j = 0; j < n; ++j) row.push_back(csv::num(matrix[i * n + j]));
        csv::write_row(out, row);
    }
}

inline std::vector<double> read_matrix_csv(const std::string& path, std::vector<std::string>& labels) {
    auto rows = csv::read_file(path);
    if (rows.size() < 2) throw data_error("malformed matrix file: " + path);
    labels.assign(rows[0].begin() + 1, rows[0].end());
    const std::size_t n = labels.size();
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] = std::stod(rows[1 + i][1 + j]);
    return m;
}

namespace detail {

// white -> deep blue sequential map
inline std::string color_of(double t) {
    t = std::min(std::max(t, 0.0), 1.0);
    const int r = static_cast<int>(std::lround(255.0 + t * (8.0 - 255.0)));
    const int g = static_cast<int>(std::lround(255.0 + t * (81.0 - 255.0)));
    const int b = static_cast<int>(std::lround(255.0 + t * (156.0 - 255.0)));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

}  // namespace detail

// static vector rendering generated from the same matrix the text file holds;
// no timestamps or other run-varying metadata
inline void write_heatmap_svg(const std::string& path, const std::vector<std::string>& labels,
                              const std::vector<double>& matrix, const std::string& title) {
    const std::size_t n = labels.size();
    if (matrix.size() != n * n)
        throw contract_error("heatmap: matrix size does not match labels");
    const int cell = 64, margin_left = 130, margin_top = 70, margin_bottom = 16;
    const int width = margin_left + cell * static_cast<int>(n) + 16;
    const int height = margin_top + cell * static_cast<int>(n) + margin_bottom;
    double vmax = 0.0;
    for (double v : matrix) vmax = std::max(vmax, v);
    if (!(vmax > 0.0)) vmax = 1.0;

    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\">\n";
    out << "<text x=\"" << margin_left << "\" y=\"22\" font-size=\"15\">" << detail::esc(title)
        << "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
        const int x = margin_left + static_cast<int>(j) * cell + cell / 2;
        out << "<text x=\"" << x << "\" y=\"" << margin_top - 8
            << "\" font-size=\"10\" text-anchor=\"middle\">" << detail::esc(labels[j]) << "</text>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int y = margin_top + static_cast<int>(i) * cell + cell / 2;
        out << "<text x=\"" << margin_left - 6 << "\" y=\"" << y + 4
            << "\" font-size=\"10\" text-anchor=\"end\">" << detail::esc(labels[i]) << "</text>\n";
        for (std::size_t j = 0; j < n; ++j) {
            const double v = matrix[i * n + j];
            const int x = margin_left + static_cast<int>(j) * cell;
            const int yy = margin_top + static_cast<int>(i) * cell;
            out << "<rect x=\"" << x << "\" y=\"" << yy << "\" width=\"" << cell << "\" height=\""
                << cell << "\" fill=\"" << detail::color_of(v / vmax) << "\" stroke=\"#ffffff\"/>\n";
            out << "<text x=\"" << x + cell / 2 << "\" y=\"" << yy + cell / 2 + 4
                << "\" font-size=\"11\" text-anchor=\"middle\" fill=\""
                << (v / vmax > 0.55 ? "#ffffff" : "#222222") << "\">" << detail::fmt3(v)
                << "</text>\n";
        }
    }
    out << "</svg>\n";
}

inline void write_bars_csv(const std::string& path, const std::vector<std::string>& labels,
                           const std::vector<double>& values) {
    if (labels.size() != values.size()) throw contract_error("bar chart: label/value size mismatch");
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    csv::write_row(out, {"group", "score"});
    for (std::size_t i = 0; i < labels.size(); ++i)
        csv::write_row(out, {labels[i], csv::num(values[i])});
}

inline void write_bars_svg(const std::string& path, const std::vector<std::string>& labels,
                           const std::vector<double>& values, const std::string& title) {
    if (labels.size() != values.size()) throw contract_error("bar chart: label/value size mismatch");
    const int bar_w = 58, gap = 14, margin_left = 46, margin_top = 44, plot_h = 220;
    const int width = margin_left + static_cast<int>(labels.size()) * (bar_w + gap) + 20;
    const int height = margin_top + plot_h + 58;
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (!(vmax > 0.0)) vmax = 1.0;

    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\">\n";
    out << "<text x=\"" << margin_left << "\" y=\"22\" font-size=\"15\">" << detail::esc(title)
        << "</text>\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int h = static_cast<int>(std::lround(values[i] / vmax * plot_h));
        const int x = margin_left + static_cast<int>(i) * (bar_w + gap);
        const int y = margin_top + plot_h - h;
        out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\"" << h
            << "\" fill=\"" << detail::color_of(0.35 + 0.65 * values[i] / vmax) << "\"/>\n";
        out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 5
            << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::fmt3(values[i]) << "</text>\n";
        out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << margin_top + plot_h + 16
            << "\" font-size=\"10\" text-anchor=\"middle\">" << detail::esc(labels[i]) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace fgtt::report
