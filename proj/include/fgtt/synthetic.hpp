#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgtt/dataset.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/rng.hpp"
#include "fgtt/schema.hpp"

namespace fgtt::synth {

struct NumericMarginal {
    double mean, sd, lo, hi;
};

inline const std::map<std::string, NumericMarginal>& numeric_marginals() {
    static const std::map<std::string, NumericMarginal> t = {
        {"Wind_speed", {1.22, 1.89, 0, 79}},
        {"Gust", {2.32, 3.07, 0, 79}},
        {"Precip_rate", {0.01, 0.09, 0, 3}},
        {"Precip_accum", {0.10, 0.33, 0, 4.52}},
        {"Hourly_truck_ratio", {0.08, 0.10, 0, 0.88}},
        {"Hourly_volume", {4370, 2884, 10, 10688}},
        {"Hourly_avg_speed", {49.06, 15.56, 4.18, 80.27}},
        {"IRI_avg", {61.43, 33.10, 25, 251}},
        {"Rut_avg", {0.107, 0.061, 0, 0.41}},
        {"Faulting_avg_3d", {0.005, 0.018, 0, 0.39}},
        {"Heading_angle", {205, 120.76, 0.9, 359.9}},
        {"Percent_grade", {-1.29, 1.91, -7.40, 3.70}},
        {"Cross_section_slope", {0.361, 1.691, -4.70, 3.4}},
        {"Crack_percentage", {8.11, 10.74, 0, 57}},
    };
    return t;
}

// target category shares in percent, aligned with schema category order
inline const std::map<std::string, std::vector<double>>& categorical_shares() {
    static const std::map<std::string, std::vector<double>> t = {
        {"City", {40.16, 32.33, 27.5}},
        {"Crash_location", {80.95, 10.53, 5.27, 1.95, 1.29}},
        {"Lighting", {74.39, 15.09, 8.43, 1.13, 0.95}},
        {"Surface", {80.25, 19.75}},
        {"Driver1_safety_equip", {72.11, 26.24, 1.64}},
        {"Driver2_safety_equip", {81.37, 17.74, 0.90}},
        {"Veh1_type", {88.99, 6.71, 3.02, 0.81, 0.47}},
        {"Veh2_type", {90.91, 6.06, 2.09, 0.69, 0.25}},
        {"Veh1_maneuver", {55.93, 27.69, 5.42, 4.19, 3.69, 1.31, 1.25, 0.53}},
        {"Road_composition", {86.95, 13.05}},
        {"Trafficway_layout", {55.28, 18.72, 13.86, 0.47}},
        {"Day_of_week", {14.14, 16.09, 13.73, 16.67, 18.83, 11.51, 9.03}},
        {"Driver1_agerange", {25.81, 23.79, 27.25, 10.62, 12.53}},
        {"Driver2_agerange", {18.27, 27.44, 22.32, 16.33, 15.64}},
        {"Curvature", {86.18, 12.76, 1.06}},
        {"Facility_type", {78.44, 11.03, 5.77, 4.76}},
        {"Area_type", {98.25, 1.75}},
        {"Num_lanes", {25.64, 9.07, 8.59, 14.01, 10.41, 32.28}},
        {"Time_of_day", {6.28, 17.40, 19.31, 41.95, 15.05}},
    };
    return t;
}

struct GeneratorConfig {
    std::size_t n_rows = 10000;
    std::uint64_t seed = 1;
    std::array<double, 3> class_mix{0.58, 0.29, 0.13};
    double signal_strength = 3.0;   // 0 = labels independent of features
    double missing_rate = 0.05;     // applied to Precip_accum and Hourly_avg_speed only

    void validate() const {
        if (n_rows == 0) throw config_error("generator: n_rows must be positive");
        double s = 0.0;
        for (double p : class_mix) {
            if (!(p > 0.0)) throw config_error("generator: class mix entries must be positive");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw config_error("generator: class mix must sum to 1");
        if (!(signal_strength >= 0.0)) throw config_error("generator: signal_strength must be >= 0");
        if (!(missing_rate >= 0.0 && missing_rate < 1.0))
            throw config_error("generator: missing_rate must be in [0,1)");
    }
};

namespace detail {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }
inline double norm_pdf(double z) { return std::exp(-0.5 * z * z) * 0.3989422804014327; }

// moments of clamp(N(mu, sigma), lo, hi)
inline std::pair<double, double> censored_moments(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / sigma, b = (hi - mu) / sigma;
    const double Fa = norm_cdf(a), Fb = norm_cdf(b);
    const double fa = norm_pdf(a), fb = norm_pdf(b);
    const double mid = Fb - Fa;
    const double m = lo * Fa + hi * (1.0 - Fb) + mu * mid - sigma * (fb - fa);
    const double m2 = lo * lo * Fa + hi * hi * (1.0 - Fb) + mu * mu * mid +
                      2.0 * mu * sigma * (fa - fb) + sigma * sigma * (mid + a * fa - b * fb);
    const double var = std::max(m2 - m * m, 0.0);
    return {m, std::sqrt(var)};
}

// pick (mu, sigma) so the clamped distribution hits the target mean/sd
inline std::pair<double, double> calibrate_censored(const NumericMarginal& t) {
    double mu = t.mean, sigma = std::max(t.sd, 1e-9);
    double best_mu = mu, best_sigma = sigma, best_err = 1e300, damp = 1.0;
    const double mscale = std::max(1e-9, std::abs(t.mean) + t.sd);
    for (int it = 0; it < 500; ++it) {
        auto [m, sd] = censored_moments(mu, sigma, t.lo, t.hi);
        const double err = std::abs(m - t.mean) / mscale + std::abs(sd - t.sd) / std::max(t.sd, 1e-9);
        if (err < best_err) {
            best_err = err;
            best_mu = mu;
            best_sigma = sigma;
        }
        if (err < 1e-9) break;
        mu += damp * (t.mean - m);
        double ratio = t.sd / std::max(sd, 1e-12);
        ratio = std::min(std::max(ratio, 1.0 / 3.0), 3.0);
        sigma *= std::exp(damp * std::log(ratio));
        sigma = std::max(sigma, 1e-9);
        if (it % 60 == 59) damp *= 0.7;
    }
    return {best_mu, best_sigma};
}

inline std::vector<double> share_probs(const std::vector<double>& shares) {
    double sum = 0.0;
    for (double s : shares) sum += s;
    std::vector<double> p(shares.size());
    for (std::size_t i = 0; i < shares.size(); ++i) p[i] = shares[i] / sum;
    return p;
}

inline int sample_cdf(const std::vector<double>& probs, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

// Planted label mechanism: class logits are a fixed linear function of
// Veh1_maneuver, Crash_location, standardized Hourly_avg_speed and
// Hourly_volume, scaled by signal_strength, plus intercepts calibrated so the
// label marginal matches class_mix. Entirely synthetic; documented in the
// generator manifest so nobody mistakes it for an empirical finding.
struct PlantedSignal {
    // class order: rear-end, sideswipe, angle
    std::array<std::array<double, 3>, 8> maneuver_w{{
        {1.2, -0.6, -0.6},   // Straight
        {-0.8, 1.4, -0.6},   // Changing Lanes/Passing
        {-0.2, 0.6, -0.4},   // Negotiating a Curve
        {-0.8, -0.6, 1.6},   // Turning
        {0.0, 0.0, 0.0},     // Other
        {-0.5, 0.2, 0.9},    // Backing
        {0.8, -0.4, 0.2},    // Stopped/Parked
        {-0.6, 0.0, 1.2},    // Entering/Leaving Parking/Driveway
    }};
    std::array<std::array<double, 3>, 5> location_w{{
        {0.7, 0.4, -1.0},    // On Roadway - Non-Intersection
        {-0.9, -0.7, 1.8},   // Crossing/Intersection
        {-0.2, 0.7, 0.1},    // Entrance/Exit Ramp
        {-0.3, -0.3, 0.8},   // Private Property/Off Roadway
        {0.0, 0.5, 0.0},     // Shoulder/Median/Gore
    }};
    std::array<double, 3> speed_w{-0.5, 0.6, -0.3};
    std::array<double, 3> volume_w{0.6, -0.1, -0.2};

    std::array<double, 3> logits(int maneuver, int location, double z_speed, double z_volume,
                                 double strength, const std::array<double, 3>& intercept) const {
        std::array<double, 3> out;
        for (std::size_t c = 0; c < 3; ++c)
            out[c] = strength * (maneuver_w[static_cast<std::size_t>(maneuver)][c] +
                                 location_w[static_cast<std::size_t>(location)][c] +
                                 speed_w[c] * z_speed + volume_w[c] * z_volume) +
                     intercept[c];
        return out;
    }
};

namespace detail {

inline std::array<double, 3> softmax3(const std::array<double, 3>& z) {
    double mx = std::max(z[0], std::max(z[1], z[2]));
    std::array<double, 3> e{std::exp(z[0] - mx), std::exp(z[1] - mx), std::exp(z[2] - mx)};
    double s = e[0] + e[1] + e[2];
    return {e[0] / s, e[1] / s, e[2] / s};
}

// Intercepts matching the marginal label distribution to class_mix under the
// feature distribution. Uses an internal fixed-seed sample so the result
// depends only on (signal_strength, class_mix), never on the user seed.
inline std::array<double, 3> calibrate_intercepts(const PlantedSignal& sig, double strength,
                                                  const std::array<double, 3>& mix) {
    std::array<double, 3> b{std::log(mix[0]), std::log(mix[1]), std::log(mix[2])};
    if (strength == 0.0) return b;
    const std::size_t n = 20000;
    Rng rng(0xca11b);
    auto man_p = share_probs(categorical_shares().at("Veh1_maneuver"));
    auto loc_p = share_probs(categorical_shares().at("Crash_location"));
    const auto& sp = numeric_marginals().at("Hourly_avg_speed");
    const auto& vo = numeric_marginals().at("Hourly_volume");
    auto [sp_mu, sp_sd] = calibrate_censored(sp);
    auto [vo_mu, vo_sd] = calibrate_censored(vo);
    std::vector<int> man(n), loc(n);
    std::vector<double> zs(n), zv(n);
    for (std::size_t i = 0; i < n; ++i) {
        man[i] = sample_cdf(man_p, rng.unit());
        loc[i] = sample_cdf(loc_p, rng.unit());
        double s = std::min(std::max(sp_mu + sp_sd * rng.normal(), sp.lo), sp.hi);
        double v = std::min(std::max(vo_mu + vo_sd * rng.normal(), vo.lo), vo.hi);
        zs[i] = (s - sp.mean) / sp.sd;
        zv[i] = (v - vo.mean) / vo.sd;
    }
    for (int round = 0; round < 100; ++round) {
        std::array<double, 3> avg{0, 0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            auto p = softmax3(sig.logits(man[i], loc[i], zs[i], zv[i], strength, b));
            for (std::size_t c = 0; c < 3; ++c) avg[c] += p[c];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            avg[c] /= static_cast<double>(n);
            b[c] += std::log(mix[c]) - std::log(std::max(avg[c], 1e-12));
            shift += b[c];
        }
        for (std::size_t c = 0; c < 3; ++c) b[c] -= shift / 3.0;
    }
    return b;
}

}  // namespace detail

struct GeneratedData {
    data::Dataset dataset;
    std::vector<int> bayes_predictions;  // argmax of the true conditional on each row
    train::Metrics bayes_ceiling;        // bayes predictions scored against the sampled labels
    std::array<double, 3> intercepts{};
};

inline GeneratedData generate(const GeneratorConfig& config, const data::FeatureSchema& schema) {
    config.validate();
    static const std::string default_fp = data::default_schema().fingerprint();
    if (schema.fingerprint() != default_fp)
        throw contract_error("generate: requires the default 33-feature schema");

    PlantedSignal sig;
    const auto intercepts = detail::calibrate_intercepts(sig, config.signal_strength, config.class_mix);

    // calibrated sampling parameters per numeric feature
    std::map<std::string, std::pair<double, double>> musig;
    for (const auto& [name, marg] : numeric_marginals()) musig[name] = detail::calibrate_censored(marg);
    std::map<std::string, std::vector<double>> probs;
    for (const auto& [name, shares] : categorical_shares()) probs[name] = detail::share_probs(shares);

    const int fi_man = schema.index_of("Veh1_maneuver");
    const int fi_loc = schema.index_of("Crash_location");
    const int fi_speed = schema.index_of("Hourly_avg_speed");
    const int fi_vol = schema.index_of("Hourly_volume");
    const int fi_accum = schema.index_of("Precip_accum");
    const auto& sp = numeric_marginals().at("Hourly_avg_speed");
    const auto& vo = numeric_marginals().at("Hourly_volume");

    GeneratedData out;
    out.dataset = data::Dataset::empty(schema);
    out.intercepts = intercepts;
    Rng rng(config.seed);
    data::Dataset& d = out.dataset;

    for (std::size_t r = 0; r < config.n_rows; ++r) {
        for (std::size_t fi = 0; fi < schema.n_features(); ++fi) {
            const data::Feature& f = schema.features[fi];
            if (f.kind == data::FeatureKind::numeric) {
                const auto& marg = numeric_marginals().at(f.name);
                const auto& [mu, sigma] = musig.at(f.name);
                double v = std::min(std::max(mu + sigma * rng.normal(), marg.lo), marg.hi);
                d.numeric[fi].push_back(v);
            } else {
                d.categorical[fi].push_back(detail::sample_cdf(probs.at(f.name), rng.unit()));
            }
        }
        const int man = d.categorical[static_cast<std::size_t>(fi_man)][r];
        const int loc = d.categorical[static_cast<std::size_t>(fi_loc)][r];
        const double z_speed = (d.numeric[static_cast<std::size_t>(fi_speed)][r] - sp.mean) / sp.sd;
        const double z_vol = (d.numeric[static_cast<std::size_t>(fi_vol)][r] - vo.mean) / vo.sd;
        const auto logits = sig.logits(man, loc, z_speed, z_vol, config.signal_strength, intercepts);
        const auto p = detail::softmax3(logits);
        d.labels.push_back(detail::sample_cdf({p[0], p[1], p[2]}, rng.unit()));
        int bayes = 0;
        if (logits[1] > logits[0]) bayes = 1;
        if (logits[2] > logits[static_cast<std::size_t>(bayes)]) bayes = 2;
        out.bayes_predictions.push_back(bayes);

        // only the two features the reference pipeline imputes go missing
        if (rng.unit() < config.missing_rate)
            d.numeric[static_cast<std::size_t>(fi_accum)][r] = std::nan("");
        if (rng.unit() < config.missing_rate)
            d.numeric[static_cast<std::size_t>(fi_speed)][r] = std::nan("");

        d.aux["Date_element"].push_back("day_" + std::to_string(rng.below(60)));
    }
    out.bayes_ceiling = train::compute_metrics(out.bayes_predictions, d.labels, 3);
    return out;
}

// numeric: mean/std/min/max over observed cells; categorical: count and
// frequency per declared category (never-sampled categories show 0)
inline void marginal_report(std::ostream& out, const data::Dataset& d) {
    if (d.n_rows() == 0) throw contract_error("marginal_report: empty dataset");
    csv::write_row(out, {"feature", "kind", "category", "count", "frequency", "missing",
                         "mean", "std", "min", "max"});
    const double n_all = static_cast<double>(d.n_rows());
    for (std::size_t fi = 0; fi < d.schema.n_features(); ++fi) {
        const data::Feature& f = d.schema.features[fi];
        if (f.kind == data::FeatureKind::numeric) {
            double sum = 0, mn = 0, mx = 0;
            std::size_t n = 0, miss = 0;
            for (double v : d.numeric[fi]) {
                if (std::isnan(v)) {
                    ++miss;
                    continue;
                }
                if (n == 0) mn = mx = v;
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                sum += v;
                ++n;
            }
            const double mean = n ? sum / static_cast<double>(n) : 0.0;
            double ss = 0;
            for (double v : d.numeric[fi])
                if (!std::isnan(v)) ss += (v - mean) * (v - mean);
            const double sd = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
            csv::write_row(out, {f.name, "numeric", "", "", "", std::to_string(miss),
                                 csv::num(mean), csv::num(sd), csv::num(mn), csv::num(mx)});
        } else {
            std::vector<std::size_t> counts(f.categories.size(), 0);
            std::size_t miss = 0;
            for (int c : d.categorical[fi]) {
                if (c < 0) ++miss;
                else ++counts[static_cast<std::size_t>(c)];
            }
            for (std::size_t ci = 0; ci < f.categories.size(); ++ci)
                csv::write_row(out, {f.name, "categorical", f.categories[ci],
                                     std::to_string(counts[ci]),
                                     csv::num(static_cast<double>(counts[ci]) / n_all),
                                     std::to_string(miss), "", "", "", ""});
        }
    }
}

inline nlohmann::json generator_manifest(const GeneratorConfig& config, const GeneratedData& gen) {
    nlohmann::json j;
    j["note"] = "synthetic data: marginals follow the generator's documented targets, the label mechanism is "
                "planted by this generator and is not an empirical finding";
    j["seed"] = config.seed;
    j["n_rows"] = config.n_rows;
    j["class_mix"] = config.class_mix;
    j["signal_strength"] = config.signal_strength;
    j["missing_rate"] = config.missing_rate;
    PlantedSignal sig;
    j["planted_signal"] = {
        {"features", {"Veh1_maneuver", "Crash_location", "Hourly_avg_speed", "Hourly_volume"}},
        {"maneuver_weights", sig.maneuver_w},
        {"location_weights", sig.location_w},
        {"speed_weights", sig.speed_w},
        {"volume_weights", sig.volume_w},
        {"intercepts", gen.intercepts},
    };
    const auto& m = gen.bayes_ceiling;
    j["bayes_ceiling"] = {
        {"accuracy", m.overall_accuracy},
        {"weighted_f1", m.weighted_f1},
        {"weighted_precision", m.weighted_precision},
        {"weighted_recall", m.weighted_recall},
        {"per_class_f1", m.f1},
    };
    return j;
}

}  // namespace fgtt::synth
