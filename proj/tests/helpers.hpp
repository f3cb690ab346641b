#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fgtt/schema.hpp"

namespace testutil {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fgtt_tests_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    return path.string();
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// three features over two groups, plus a Surface-style binary categorical
inline fgtt::data::FeatureSchema toy_schema() {
    using namespace fgtt::data;
    FeatureSchema s;
    s.group_order = {"G1", "G2"};
    s.features.push_back(Feature{"num_a", FeatureKind::numeric, {}, "G1"});
    s.features.push_back(Feature{"cat_b", FeatureKind::categorical, {"X", "Y", "Z"}, "G1"});
    s.features.push_back(Feature{"Surface", FeatureKind::categorical, {"Dry", "Wet/Snow/Ice"}, "G2"});
    s.features.push_back(Feature{"num_c", FeatureKind::numeric, {}, "G2"});
    s.validate();
    return s;
}

}  // namespace testutil
