#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "fgtt/encode.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/schema.hpp"

namespace fgtt::nn {

// Maps each semantic feature group to its encoded-matrix column indices.
// Groups are disjoint and cover every column exactly once.
struct GroupPartition {
    std::vector<std::string> names;
    std::vector<std::vector<std::size_t>> columns;

    std::size_t n_groups() const { return names.size(); }

    std::size_t total_columns() const {
        std::size_t n = 0;
        for (const auto& c : columns) n += c.size();
        return n;
    }

    int group_of_column(std::size_t col) const {
        for (std::size_t g = 0; g < columns.size(); ++g)
            for (std::size_t c : columns[g])
                if (c == col) return static_cast<int>(g);
        return -1;
    }
};

// Group order follows schema.group_order; groups not listed there append in
// first-appearance order.
inline GroupPartition partition_columns(const std::vector<data::ColumnMeta>& column_meta,
                                        const data::FeatureSchema& schema) {
    std::vector<std::string> order;
    for (const auto& g : schema.group_order) order.push_back(g);
    for (const auto& cm : column_meta) {
        if (cm.group.empty())
            throw data_error("partition: column of feature " + cm.feature + " has no group");
        if (schema.index_of(cm.feature) < 0)
            throw data_error("partition: column of feature " + cm.feature + " is not in the schema");
        if (std::find(order.begin(), order.end(), cm.group) == order.end()) order.push_back(cm.group);
    }

    GroupPartition p;
    for (const auto& g : order) {
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < column_meta.size(); ++c)
            if (column_meta[c].group == g) cols.push_back(c);
        if (cols.empty()) continue;  // declared order may list groups absent from a toy schema
        p.names.push_back(g);
        p.columns.push_back(std::move(cols));
    }
    if (p.total_columns() != column_meta.size())
        throw data_error("partition: groups do not cover all columns");
    return p;
}

}  // namespace fgtt::nn
