#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgtt/csv.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/gp.hpp"
#include "fgtt/rng.hpp"

namespace fgtt::hpo {

struct Dim {
    enum Kind { Continuous, Categorical, Ordinal } kind = Continuous;
    std::string name;
    double lo = 0.0, hi = 1.0;
    bool log_scale = false;
    std::vector<std::string> options;  // categorical
    std::vector<double> levels;        // ordinal

    static Dim continuous(std::string name, double lo, double hi, bool log_scale = false) {
        Dim d;
        d.kind = Continuous;
        d.name = std::move(name);
        d.lo = lo;
        d.hi = hi;
        d.log_scale = log_scale;
        if (!(lo < hi) || (log_scale && !(lo > 0.0)))
            throw config_error("search space: bad continuous bounds for " + d.name);
        return d;
    }
    static Dim categorical(std::string name, std::vector<std::string> options) {
        Dim d;
        d.kind = Categorical;
        d.name = std::move(name);
        d.options = std::move(options);
        if (d.options.size() < 2) throw config_error("search space: categorical " + d.name + " needs options");
        return d;
    }
    static Dim ordinal(std::string name, std::vector<double> levels) {
        Dim d;
        d.kind = Ordinal;
        d.name = std::move(name);
        d.levels = std::move(levels);
        if (d.levels.size() < 2) throw config_error("search space: ordinal " + d.name + " needs levels");
        return d;
    }
};

// continuous dims hold the value, ordinal dims the level value, categorical
// dims the option index
struct Point {
    std::vector<double> raw;

    double value(std::size_t d) const { return raw[d]; }
    int index(std::size_t d) const { return static_cast<int>(raw[d]); }
};

struct SearchSpace {
    std::vector<Dim> dims;

    int dim_index(const std::string& name) const {
        for (std::size_t i = 0; i < dims.size(); ++i)
            if (dims[i].name == name) return static_cast<int>(i);
        return -1;
    }

    std::size_t encoded_width() const {
        std::size_t w = 0;
        for (const auto& d : dims) w += d.kind == Dim::Categorical ? d.options.size() : 1;
        return w;
    }

    bool contains(const Point& p) const {
        if (p.raw.size() != dims.size()) return false;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            const Dim& d = dims[i];
            const double v = p.raw[i];
            if (d.kind == Dim::Continuous) {
                if (!(v >= d.lo && v <= d.hi)) return false;
            } else if (d.kind == Dim::Categorical) {
                if (v != std::floor(v) || v < 0 || v >= static_cast<double>(d.options.size()))
                    return false;
            } else {
                bool hit = false;
                for (double l : d.levels) hit = hit || l == v;
                if (!hit) return false;
            }
        }
        return true;
    }

    // unit hypercube draw -> raw point
    Point from_unit(const std::vector<double>& u) const {
        Point p;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            const Dim& d = dims[i];
            if (d.kind == Dim::Continuous) {
                p.raw.push_back(d.log_scale ? d.lo * std::pow(d.hi / d.lo, u[i])
                                            : d.lo + (d.hi - d.lo) * u[i]);
            } else if (d.kind == Dim::Categorical) {
                auto k = static_cast<std::size_t>(u[i] * static_cast<double>(d.options.size()));
                p.raw.push_back(static_cast<double>(std::min(k, d.options.size() - 1)));
            } else {
                auto k = static_cast<std::size_t>(u[i] * static_cast<double>(d.levels.size()));
                p.raw.push_back(d.levels[std::min(k, d.levels.size() - 1)]);
            }
        }
        return p;
    }

    // continuous -> [0,1] (log dims in log space), ordinal -> rank/(m-1),
    // categorical -> one-hot with a shared length-scale
    std::vector<double> encode(const Point& p) const {
        std::vector<double> e;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            const Dim& d = dims[i];
            if (d.kind == Dim::Continuous) {
                e.push_back(d.log_scale
                                ? std::log(p.raw[i] / d.lo) / std::log(d.hi / d.lo)
                                : (p.raw[i] - d.lo) / (d.hi - d.lo));
            } else if (d.kind == Dim::Categorical) {
                for (std::size_t k = 0; k < d.options.size(); ++k)
                    e.push_back(k == static_cast<std::size_t>(p.raw[i]) ? 1.0 : 0.0);
            } else {
                std::size_t rank = 0;
                for (std::size_t k = 0; k < d.levels.size(); ++k)
                    if (d.levels[k] == p.raw[i]) rank = k;
                e.push_back(static_cast<double>(rank) / static_cast<double>(d.levels.size() - 1));
            }
        }
        return e;
    }

    std::string describe(const Point& p) const {
        std::string out;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) out += ";";
            out += dims[i].name + "=";
            out += dims[i].kind == Dim::Categorical
                       ? dims[i].options[static_cast<std::size_t>(p.raw[i])]
                       : csv::num(p.raw[i]);
        }
        return out;
    }
};

struct Trial {
    std::size_t id = 0;
    Point point;
    double objective = 0.0;
    bool ok = false;
};

// search space of the reference model study
inline SearchSpace default_fgtt_space() {
    SearchSpace s;
    s.dims.push_back(Dim::continuous("learning_rate", 0.001, 0.1, true));
    s.dims.push_back(Dim::categorical("optimizer", {"Adam", "SGD", "RMSProp"}));
    s.dims.push_back(Dim::ordinal("ffn_dim", {16, 24, 32, 64}));
    s.dims.push_back(Dim::ordinal("hidden_dim", {16, 24, 32, 64}));
    s.dims.push_back(Dim::ordinal("dropout", {0.1, 0.2, 0.3, 0.4}));
    s.dims.push_back(Dim::ordinal("n_heads", {2, 3, 4, 6}));
    s.dims.push_back(Dim::ordinal("n_layers", {2, 3, 4, 5, 6}));
    return s;
}

namespace detail {

inline double radical_inverse(std::uint64_t base, std::uint64_t i) {
    double inv = 1.0 / static_cast<double>(base), f = inv, x = 0.0;
    while (i > 0) {
        x += static_cast<double>(i % base) * f;
        i /= base;
        f *= inv;
    }
    return x;
}

constexpr std::uint64_t kHaltonBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }
inline double norm_pdf(double z) { return std::exp(-0.5 * z * z) * 0.3989422804014327; }

// expected improvement over the incumbent (maximization form)
inline double expected_improvement(double mean, double var, double best) {
    if (!(var > 0.0)) return 0.0;
    const double sd = std::sqrt(var);
    const double z = (mean - best) / sd;
    return (mean - best) * norm_cdf(z) + sd * norm_pdf(z);
}

}  // namespace detail

inline Point sample_random(const SearchSpace& space, Rng& rng) {
    std::vector<double> u(space.dims.size());
    for (auto& v : u) v = rng.unit();
    return space.from_unit(u);
}

// seeded quasi-random candidates: Halton sequence with a random shift
inline std::vector<Point> halton_candidates(const SearchSpace& space, std::size_t count, Rng& rng) {
    const std::size_t D = space.dims.size();
    if (D > std::size(detail::kHaltonBases))
        throw config_error("search space has more dimensions than supported Halton bases");
    std::vector<double> shift(D);
    for (auto& s : shift) s = rng.unit();
    std::vector<Point> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> u(D);
        for (std::size_t d = 0; d < D; ++d) {
            double v = detail::radical_inverse(detail::kHaltonBases[d], i + 1) + shift[d];
            u[d] = v - std::floor(v);
        }
        out.push_back(space.from_unit(u));
    }
    return out;
}

inline GpModel gp_fit(const std::vector<Trial>& trials, const SearchSpace& space) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (const auto& t : trials) {
        if (!t.ok) continue;
        X.push_back(space.encode(t.point));
        y.push_back(t.objective);
    }
    return gp_fit_encoded(X, y);
}

// argmax of EI over 512 seeded quasi-random candidates; ties keep the first
inline Point propose(const GpModel& gp, const SearchSpace& space, Rng& rng, double incumbent,
                     std::size_t n_candidates = 512) {
    auto candidates = halton_candidates(space, n_candidates, rng);
    Point best_point = candidates[0];
    double best_ei = -1.0;
    for (const auto& cand : candidates) {
        auto [mean, var] = gp.predict(space.encode(cand));
        const double ei = detail::expected_improvement(mean, var, incumbent);
        if (ei > best_ei) {
            best_ei = ei;
            best_point = cand;
        }
    }
    return best_point;
}

struct OptimizeResult {
    Trial best;
    std::vector<Trial> trials;  // all attempts; failed ones carry ok=false

    std::size_t completed() const {
        std::size_t n = 0;
        for (const auto& t : trials) n += t.ok ? 1 : 0;
        return n;
    }
};

// n_init seeded random points, then a propose/evaluate loop; trials with a
// non-finite objective are marked failed and skipped by the surrogate.
// warm-start trials (e.g. from a resumed history file) count against budget.
inline OptimizeResult optimize(const std::function<double(const Point&)>& objective,
                               const SearchSpace& space, std::size_t budget, std::size_t n_init,
                               std::uint64_t seed, const std::vector<Trial>* warm = nullptr) {
    if (!(budget >= n_init && n_init >= 2))
        throw contract_error("optimize: need budget >= n_init >= 2");
    Rng rng(seed);
    OptimizeResult res;
    bool have_best = false;
    if (warm) {
        for (const auto& t : *warm) {
            res.trials.push_back(t);
            if (t.ok && (!have_best || t.objective > res.best.objective)) {
                res.best = t;
                have_best = true;
            }
        }
    }
    for (std::size_t i = res.trials.size(); i < budget; ++i) {
        Point p;
        std::size_t ok_count = 0;
        for (const auto& t : res.trials) ok_count += t.ok ? 1 : 0;
        if (i < n_init || ok_count < 2) {
            p = sample_random(space, rng);
        } else {
            GpModel gp = gp_fit(res.trials, space);
            p = propose(gp, space, rng, res.best.objective);
        }
        Trial t;
        t.id = i;
        t.point = p;
        const double val = objective(p);
        t.ok = std::isfinite(val);
        t.objective = t.ok ? val : std::nan("");
        if (t.ok && (!have_best || t.objective > res.best.objective)) {
            res.best = t;
            have_best = true;
        }
        res.trials.push_back(std::move(t));
    }
    if (!have_best) throw train_error("optimize: every trial failed");
    return res;
}

inline void write_trials(std::ostream& out, const OptimizeResult& res, const SearchSpace& space) {
    std::vector<std::string> header{"trial"};
    for (const auto& d : space.dims) header.push_back(d.name);
    header.push_back("objective");
    header.push_back("status");
    csv::write_row(out, header);
    for (const auto& t : res.trials) {
        std::vector<std::string> row{std::to_string(t.id)};
        for (std::size_t i = 0; i < space.dims.size(); ++i) {
            const Dim& d = space.dims[i];
            row.push_back(d.kind == Dim::Categorical
                              ? d.options[static_cast<std::size_t>(t.point.raw[i])]
                              : csv::num(t.point.raw[i]));
        }
        row.push_back(t.ok ? csv::num(t.objective) : "");
        row.push_back(t.ok ? "ok" : "failed");
        csv::write_row(out, row);
    }
}

// rebuild prior trials from a history file, e.g. to resume a study
inline std::vector<Trial> read_trials(const std::string& path, const SearchSpace& space) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw data_error("empty trial history: " + path);
    std::vector<Trial> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != space.dims.size() + 3)
            throw data_error("malformed trial history row in " + path);
        Trial t;
        t.id = static_cast<std::size_t>(std::stoull(row[0]));
        for (std::size_t i = 0; i < space.dims.size(); ++i) {
            const Dim& d = space.dims[i];
            if (d.kind == Dim::Categorical) {
                int idx = -1;
                for (std::size_t k = 0; k < d.options.size(); ++k)
                    if (d.options[k] == row[1 + i]) idx = static_cast<int>(k);
                if (idx < 0) throw data_error("unknown option '" + row[1 + i] + "' in " + path);
                t.point.raw.push_back(static_cast<double>(idx));
            } else {
                t.point.raw.push_back(std::stod(row[1 + i]));
            }
        }
        t.ok = row.back() == "ok";
        t.objective = t.ok ? std::stod(row[space.dims.size() + 1]) : std::nan("");
        out.push_back(std::move(t));
    }
    return out;
}

inline SearchSpace space_from_json(const nlohmann::json& j) {
    SearchSpace s;
    for (const auto& jd : j) {
        const std::string kind = jd.at("kind").get<std::string>();
        const std::string name = jd.at("name").get<std::string>();
        if (kind == "continuous") {
            s.dims.push_back(Dim::continuous(name, jd.at("lo").get<double>(), jd.at("hi").get<double>(),
                                             jd.value("log", false)));
        } else if (kind == "categorical") {
            s.dims.push_back(Dim::categorical(name, jd.at("options").get<std::vector<std::string>>()));
        } else if (kind == "ordinal") {
            s.dims.push_back(Dim::ordinal(name, jd.at("levels").get<std::vector<double>>()));
        } else {
            throw config_error("search space: unknown dim kind " + kind);
        }
    }
    return s;
}

}  // namespace fgtt::hpo
