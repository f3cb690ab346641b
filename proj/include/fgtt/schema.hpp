#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgtt/errors.hpp"
#include "fgtt/hash.hpp"

namespace fgtt::data {

enum class FeatureKind { numeric, categorical };

struct Feature {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    std::vector<std::string> categories;  // categorical only, declaration order fixes one-hot layout
    std::string group;
};

struct FeatureSchema {
    std::vector<Feature> features;
    std::vector<std::string> group_order;   // partition/token order
    std::vector<std::string> aux_columns;   // ingestion-only columns (usable as imputation keys)
    std::string label_column = "Crash_type";
    std::vector<std::string> label_classes = {"Rear-end", "Sideswipe", "Angle"};

    std::size_t n_features() const { return features.size(); }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < features.size(); ++i)
            if (features[i].name == name) return static_cast<int>(i);
        return -1;
    }

    const Feature& at(const std::string& name) const {
        int i = index_of(name);
        if (i < 0) throw data_error("unknown feature: " + name);
        return features[static_cast<std::size_t>(i)];
    }

    bool is_aux(const std::string& name) const {
        for (const auto& a : aux_columns)
            if (a == name) return true;
        return false;
    }

    void validate() const {
        std::map<std::string, int> seen;
        for (const auto& f : features) {
            if (++seen[f.name] > 1) throw data_error("duplicate feature name: " + f.name);
            if (f.group.empty()) throw data_error("feature " + f.name + " has no group");
            if (f.kind == FeatureKind::categorical && f.categories.size() < 2)
                throw data_error("categorical feature " + f.name + " needs at least 2 categories");
            if (f.kind == FeatureKind::numeric && !f.categories.empty())
                throw data_error("numeric feature " + f.name + " must not declare categories");
        }
        if (label_classes.size() < 2) throw data_error("schema needs at least 2 label classes");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["label_column"] = label_column;
        j["label_classes"] = label_classes;
        j["group_order"] = group_order;
        j["aux_columns"] = aux_columns;
        j["features"] = nlohmann::json::array();
        for (const auto& f : features) {
            nlohmann::json jf;
            jf["name"] = f.name;
            jf["kind"] = f.kind == FeatureKind::numeric ? "numeric" : "categorical";
            jf["group"] = f.group;
            if (f.kind == FeatureKind::categorical) jf["categories"] = f.categories;
            j["features"].push_back(jf);
        }
        return j;
    }

    static FeatureSchema from_json(const nlohmann::json& j) {
        FeatureSchema s;
        if (j.contains("label_column")) s.label_column = j.at("label_column").get<std::string>();
        if (j.contains("label_classes")) s.label_classes = j.at("label_classes").get<std::vector<std::string>>();
        if (j.contains("group_order")) s.group_order = j.at("group_order").get<std::vector<std::string>>();
        if (j.contains("aux_columns")) s.aux_columns = j.at("aux_columns").get<std::vector<std::string>>();
        for (const auto& jf : j.at("features")) {
            Feature f;
            f.name = jf.at("name").get<std::string>();
            std::string kind = jf.at("kind").get<std::string>();
            if (kind == "numeric") {
                f.kind = FeatureKind::numeric;
            } else if (kind == "categorical") {
                f.kind = FeatureKind::categorical;
                f.categories = jf.at("categories").get<std::vector<std::string>>();
            } else {
                throw data_error("unknown feature kind: " + kind);
            }
            f.group = jf.at("group").get<std::string>();
            s.features.push_back(std::move(f));
        }
        s.validate();
        return s;
    }

    // identity of the feature layout; checkpoints refuse to load on mismatch
    std::string fingerprint() const { return sha1_hex(to_json().dump()); }

    int label_id(const std::string& s) const {
        for (std::size_t i = 0; i < label_classes.size(); ++i)
            if (label_classes[i] == s) return static_cast<int>(i);
        return -1;
    }
};

// The 33-feature multi-vehicle crash schema: 14 numeric + 19 categorical
// features in 8 semantic groups.
inline FeatureSchema default_schema() {
    FeatureSchema s;
    s.group_order = {"Event", "Traffic", "Environment", "Pavement",
                     "Driver", "Contextual", "Geometric", "Vehicle"};
    s.aux_columns = {"Date_element"};

    auto num = [&](const std::string& name, const std::string& group) {
        s.features.push_back(Feature{name, FeatureKind::numeric, {}, group});
    };
    auto cat = [&](const std::string& name, const std::string& group, std::vector<std::string> cats) {
        s.features.push_back(Feature{name, FeatureKind::categorical, std::move(cats), group});
    };

    cat("City", "Contextual", {"Atlanta", "Metro Area Outside of Atlanta", "Unincorporated"});
    cat("Crash_location", "Event",
        {"On Roadway - Non-Intersection", "On Roadway - Crossing/Intersection/Crosswalk/Roundabout",
         "Entrance/Exit Ramp", "Private Property/Off Roadway", "Shoulder/Median/Gore"});
    cat("Lighting", "Environment", {"Daylight", "Dark-Lighted", "Dark-Not Lighted", "Dawn", "Dusk"});
    cat("Surface", "Pavement", {"Dry", "Wet/Snow/Ice"});
    cat("Driver1_safety_equip", "Driver", {"Lap/Shoulder Belt/Helmet Used", "Unknown", "None Used"});
    cat("Driver2_safety_equip", "Driver", {"Lap/Shoulder Belt/Helmet Used", "Unknown", "None Used"});
    cat("Veh1_type", "Vehicle",
        {"Passenger Car/Pickup/Van/SUV", "Truck/Trailer", "Unknown", "Other", "Motorcycle/Bicycle/ATV"});
    cat("Veh2_type", "Vehicle",
        {"Passenger Car/Pickup/Van/SUV", "Truck/Trailer", "Unknown", "Other", "Motorcycle/Bicycle/ATV"});
    cat("Veh1_maneuver", "Event",
        {"Straight", "Changing Lanes/Passing", "Negotiating a Curve", "Turning (left, right, u-turn)",
         "Other", "Backing", "Stopped/Parked", "Entering/Leaving Parking/Driveway"});
    cat("Road_composition", "Pavement", {"Black Top", "Concrete/Other"});
    cat("Trafficway_layout", "Geometric",
        {"Two-Way Trafficway With A Physical Barrier/Separation", "One-Way Trafficway",
         "Two-Way Trafficway With No Physical Barrier/Separation", "Continuous Turning Lane"});
    num("Wind_speed", "Environment");
    num("Gust", "Environment");
    num("Precip_rate", "Environment");
    num("Precip_accum", "Environment");
    num("Hourly_truck_ratio", "Traffic");
    num("Hourly_volume", "Traffic");
    num("Hourly_avg_speed", "Traffic");
    num("IRI_avg", "Pavement");
    num("Rut_avg", "Pavement");
    num("Faulting_avg_3d", "Pavement");
    num("Heading_angle", "Geometric");
    num("Percent_grade", "Pavement");
    num("Cross_section_slope", "Pavement");
    num("Crack_percentage", "Pavement");
    cat("Day_of_week", "Contextual",
        {"Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"});
    cat("Driver1_agerange", "Driver", {"Under 25", "25-34", "35-44", "45-54", "55 and up"});
    cat("Driver2_agerange", "Driver", {"Under 25", "25-34", "35-44", "45-54", "55 and up"});
    cat("Curvature", "Geometric", {"A", "B", "C or more"});
    cat("Facility_type", "Geometric",
        {"Interstate", "Principal Arterial - Other", "Minor Arterial",
         "Principal Arterial - Other Freeways and Expressways"});
    cat("Area_type", "Geometric", {"Urban", "Rural"});
    cat("Num_lanes", "Geometric", {"2", "3", "4", "5", "6", "7"});
    cat("Time_of_day", "Contextual",
        {"Early morning", "Peak morning", "Midday", "Peak afternoon", "Late evening"});

    s.validate();
    return s;
}

}  // namespace fgtt::data
