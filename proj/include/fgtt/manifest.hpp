#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgtt/errors.hpp"
#include "fgtt/hash.hpp"
#include "fgtt/version.hpp"

namespace fgtt::report {

// one manifest per run, written alongside the outputs
struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_clock_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["config"] = config_path;
        j["seed"] = seed;
        j["tool_version"] = FGTT_VERSION;
        j["wall_clock_seconds"] = wall_clock_seconds;
        j["inputs"] = nlohmann::json::array();
        for (const auto& p : inputs)
            j["inputs"].push_back({{"path", p}, {"sha1", git_blob_sha1_file(p)}});
        j["outputs"] = outputs;
        return j;
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw data_error("cannot write manifest: " + path);
        out << to_json().dump(1) << '\n';
    }
};

}  // namespace fgtt::report
