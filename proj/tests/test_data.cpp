#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "fgtt/dataset.hpp"
#include "fgtt/encode.hpp"
#include "fgtt/synthetic.hpp"
#include "helpers.hpp"

using namespace fgtt;
using namespace fgtt::data;

TEST_CASE("load_dataset parses well-formed rows") {
    auto dir = testutil::scratch_dir("load");
    auto schema = testutil::toy_schema();
    auto path = testutil::write_file(dir / "ok.csv",
                                     "Crash_type,num_a,cat_b,Surface,num_c\n"
                                     "Rear-end,1.5,X,Dry,2\n"
                                     "Angle,2.5,Y,Wet/Snow/Ice,3\n"
                                     "Sideswipe,-1,Z,Dry,4\n");
    Dataset d = load_dataset(path, schema);
    REQUIRE(d.n_rows() == 3);
    CHECK(d.labels == std::vector<int>{0, 2, 1});
    CHECK(d.numeric[0][1] == 2.5);
    CHECK(d.categorical[1][2] == 2);
    CHECK(d.categorical[2][1] == 1);
}

TEST_CASE("load_dataset turns empty and unparseable numerics into missing") {
    auto dir = testutil::scratch_dir("missing");
    auto schema = testutil::toy_schema();
    auto path = testutil::write_file(dir / "gaps.csv",
                                     "Crash_type,num_a,cat_b,Surface,num_c\n"
                                     "Rear-end,,X,Dry,2\n"
                                     "Angle,not_a_number,Y,Dry,3\n");
    Dataset d = load_dataset(path, schema);
    CHECK(std::isnan(d.numeric[0][0]));
    CHECK(std::isnan(d.numeric[0][1]));
    CHECK(d.numeric[3][0] == 2.0);
}

TEST_CASE("load_dataset rejects undeclared categories naming row and feature") {
    auto dir = testutil::scratch_dir("badcat");
    auto schema = testutil::toy_schema();
    auto path = testutil::write_file(dir / "bad.csv",
                                     "Crash_type,num_a,cat_b,Surface,num_c\n"
                                     "Rear-end,1,X,Flooded,2\n");
    CHECK_THROWS_MATCHES(load_dataset(path, schema), data_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("row 1") &&
                             Catch::Matchers::ContainsSubstring("Surface") &&
                             Catch::Matchers::ContainsSubstring("Flooded")));
}

TEST_CASE("load_dataset header and file errors") {
    auto dir = testutil::scratch_dir("hdr");
    auto schema = testutil::toy_schema();
    CHECK_THROWS_AS(load_dataset((dir / "nope.csv").string(), schema), data_error);
    auto missing_col = testutil::write_file(dir / "m.csv", "Crash_type,num_a,cat_b,Surface\n");
    CHECK_THROWS_AS(load_dataset(missing_col, schema), data_error);
    auto extra_col = testutil::write_file(dir / "e.csv",
                                          "Crash_type,num_a,cat_b,Surface,num_c,bogus\n");
    CHECK_THROWS_AS(load_dataset(extra_col, schema), data_error);
}

TEST_CASE("csv quoting round-trips categories with commas") {
    auto dir = testutil::scratch_dir("quote");
    FeatureSchema schema;
    schema.group_order = {"G"};
    schema.features.push_back(Feature{"m", FeatureKind::categorical,
                                      {"Turning (left, right, u-turn)", "Straight"}, "G"});
    schema.validate();
    Dataset d = Dataset::empty(schema);
    d.labels = {0, 1};
    d.categorical[0] = {0, 1};
    save_dataset((dir / "q.csv").string(), d);
    Dataset back = load_dataset((dir / "q.csv").string(), schema);
    CHECK(back.categorical[0] == std::vector<int>{0, 1});
}

TEST_CASE("impute_group_mean fills from the group mean") {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    d.labels = {0, 0, 0};
    d.numeric[0] = {2.0, 4.0, std::nan("")};
    d.categorical[1] = {0, 0, 0};  // all in group key X
    d.categorical[2] = {0, 0, 0};
    d.numeric[3] = {0, 0, 0};
    Dataset out = impute_group_mean(d, "num_a", {"cat_b"});
    CHECK(out.numeric[0][2] == Catch::Approx(3.0));
    // original untouched
    CHECK(std::isnan(d.numeric[0][2]));
}

TEST_CASE("impute_group_mean falls back to the global mean for empty groups") {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    d.labels = {0, 0, 0};
    d.numeric[0] = {2.0, 4.0, std::nan("")};
    d.categorical[1] = {0, 0, 1};  // the missing row is alone in key Y
    d.categorical[2] = {0, 0, 0};
    d.numeric[3] = {0, 0, 0};
    Dataset out = impute_group_mean(d, "num_a", {"cat_b"});
    CHECK(out.numeric[0][2] == Catch::Approx(3.0));
}

TEST_CASE("impute_group_mean contract errors") {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    d.labels = {0};
    d.numeric[0] = {std::nan("")};
    d.categorical[1] = {0};
    d.categorical[2] = {0};
    d.numeric[3] = {1.0};
    CHECK_THROWS_AS(impute_group_mean(d, "cat_b", {"Surface"}), contract_error);
    CHECK_THROWS_AS(impute_group_mean(d, "num_a", {"num_c"}), contract_error);
    CHECK_THROWS_AS(impute_group_mean(d, "num_a", {"cat_b"}), data_error);  // nothing observed
}

namespace {

// independent group-by oracle over the textual key
double brute_force_group_mean(const Dataset& d, const std::string& target,
                              const std::vector<std::string>& grouping, std::size_t row) {
    auto key_of = [&](std::size_t r) {
        std::string k;
        for (const auto& g : grouping) {
            int fi = d.schema.index_of(g);
            if (fi >= 0) k += std::to_string(d.categorical[static_cast<std::size_t>(fi)][r]) + "/";
            else k += d.aux.at(g)[r] + "/";
        }
        return k;
    };
    const auto& col = d.numeric[static_cast<std::size_t>(d.schema.index_of(target))];
    const std::string key = key_of(row);
    double sum = 0.0, gsum = 0.0;
    std::size_t n = 0, gn = 0;
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        if (std::isnan(col[r])) continue;
        gsum += col[r];
        ++gn;
        if (key_of(r) == key) {
            sum += col[r];
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : gsum / static_cast<double>(gn);
}

}  // namespace

TEST_CASE("default pipeline imputation matches a brute-force group-by on 50 rows") {
    synth::GeneratorConfig cfg;
    cfg.n_rows = 50;
    cfg.seed = 404;
    cfg.missing_rate = 0.3;
    auto schema = default_schema();
    Dataset d = synth::generate(cfg, schema).dataset;

    const std::vector<std::string> precip_keys{"City", "Date_element"};
    const std::vector<std::string> speed_keys{"Num_lanes", "Day_of_week", "Facility_type",
                                              "Area_type", "Time_of_day"};
    Dataset imputed = impute_group_mean(d, "Precip_accum", precip_keys);
    imputed = impute_group_mean(imputed, "Hourly_avg_speed", speed_keys);

    const std::size_t fi_p = static_cast<std::size_t>(schema.index_of("Precip_accum"));
    const std::size_t fi_s = static_cast<std::size_t>(schema.index_of("Hourly_avg_speed"));
    std::size_t checked = 0;
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        if (std::isnan(d.numeric[fi_p][r])) {
            CHECK(imputed.numeric[fi_p][r] ==
                  Catch::Approx(brute_force_group_mean(d, "Precip_accum", precip_keys, r)));
            ++checked;
        }
        if (std::isnan(d.numeric[fi_s][r])) {
            CHECK(imputed.numeric[fi_s][r] ==
                  Catch::Approx(brute_force_group_mean(d, "Hourly_avg_speed", speed_keys, r)));
            ++checked;
        }
        CHECK_FALSE(std::isnan(imputed.numeric[fi_p][r]));
        CHECK_FALSE(std::isnan(imputed.numeric[fi_s][r]));
    }
    REQUIRE(checked > 5);  // the fixture must actually exercise imputation

    // idempotence
    Dataset twice = impute_group_mean(imputed, "Precip_accum", precip_keys);
    CHECK(twice.numeric[fi_p] == imputed.numeric[fi_p]);
}

TEST_CASE("fit_stats uses the population convention on training rows only") {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    d.labels = {0, 0, 0, 0};
    d.numeric[0] = {1.0, 2.0, 3.0, 100.0};
    d.categorical[1] = {0, 0, 0, 0};
    d.categorical[2] = {0, 0, 0, 0};
    d.numeric[3] = {5.0, 6.0, 7.0, 8.0};
    NormalizationStats st = fit_stats(d, {0, 1, 2});  // row 3 is out of the training split
    const int i = st.index_of("num_a");
    REQUIRE(i >= 0);
    CHECK(st.mean[static_cast<std::size_t>(i)] == Catch::Approx(2.0));
    CHECK(st.sd[static_cast<std::size_t>(i)] == Catch::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("fit_stats rejects constant columns") {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    d.labels = {0, 0, 0};
    d.numeric[0] = {5.0, 5.0, 5.0};
    d.categorical[1] = {0, 0, 0};
    d.categorical[2] = {0, 0, 0};
    d.numeric[3] = {1.0, 2.0, 3.0};
    CHECK_THROWS_MATCHES(fit_stats(d, {0, 1, 2}), data_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("constant column")));
}

TEST_CASE("generated traffic volume marginals are recovered by fit_stats") {
    synth::GeneratorConfig cfg;
    cfg.n_rows = 20000;
    cfg.seed = 5;
    cfg.missing_rate = 0.0;
    Dataset d = synth::generate(cfg, default_schema()).dataset;
    std::vector<std::size_t> all(d.n_rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    NormalizationStats st = fit_stats(d, all);
    const int i = st.index_of("Hourly_volume");
    REQUIRE(i >= 0);
    CHECK(st.mean[static_cast<std::size_t>(i)] == Catch::Approx(4370).margin(75));
    CHECK(st.sd[static_cast<std::size_t>(i)] == Catch::Approx(2884).margin(75));
}

TEST_CASE("encode standardizes numerics and one-hots categoricals") {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    d.labels = {0, 1};
    d.numeric[0] = {1.0, 3.0};          // mean 2, sd 1
    d.categorical[1] = {0, 2};          // X, Z
    d.categorical[2] = {0, 1};          // Dry, Wet/Snow/Ice
    d.numeric[3] = {10.0, 20.0};        // mean 15, sd 5
    NormalizationStats st = fit_stats(d, {0, 1});
    EncodedMatrix m = encode(d, st);
    REQUIRE(m.cols() == 1 + 3 + 2 + 1);
    // hand-encoded matrix, exact
    const std::vector<double> expected{-1, 1, 0, 0, 1, 0, -1,
                                       1, 0, 0, 1, 0, 1, 1};
    REQUIRE(m.values.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(m.values[i] == expected[i]);

    CHECK(decode_onehot(m, "Surface", 0) == "Dry");
    CHECK(decode_onehot(m, "Surface", 1) == "Wet/Snow/Ice");
    CHECK(decode_onehot(m, "cat_b", 1) == "Z");
}

TEST_CASE("standardized training columns have mean 0 and sd 1") {
    synth::GeneratorConfig cfg;
    cfg.n_rows = 500;
    cfg.seed = 99;
    cfg.missing_rate = 0.0;
    Dataset d = synth::generate(cfg, default_schema()).dataset;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < 300; ++i) train.push_back(i);
    NormalizationStats st = fit_stats(d, train);
    EncodedMatrix m = encode(d, st);
    for (std::size_t c = 0; c < m.cols(); ++c) {
        if (!m.columns[c].category.empty()) continue;
        double sum = 0.0;
        for (std::size_t r : train) sum += m.at(r, c);
        const double mean = sum / static_cast<double>(train.size());
        double ss = 0.0;
        for (std::size_t r : train) ss += (m.at(r, c) - mean) * (m.at(r, c) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(train.size()));
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(sd - 1.0) < 1e-9);
    }
}

TEST_CASE("one-hot decode round-trips every row of a generated set") {
    synth::GeneratorConfig cfg;
    cfg.n_rows = 200;
    cfg.seed = 7;
    cfg.missing_rate = 0.0;
    auto schema = default_schema();
    Dataset d = synth::generate(cfg, schema).dataset;
    std::vector<std::size_t> all(d.n_rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    EncodedMatrix m = encode(d, fit_stats(d, all));
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        for (std::size_t fi = 0; fi < schema.n_features(); ++fi) {
            const Feature& f = schema.features[fi];
            if (f.kind != FeatureKind::categorical) continue;
            const int code = d.categorical[fi][r];
            CHECK(decode_onehot(m, f.name, r) == f.categories[static_cast<std::size_t>(code)]);
        }
    }
}

TEST_CASE("encode requires complete cells and known stats") {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    d.labels = {0, 1};
    d.numeric[0] = {1.0, std::nan("")};
    d.categorical[1] = {0, 1};
    d.categorical[2] = {0, 1};
    d.numeric[3] = {1.0, 2.0};
    NormalizationStats st;
    st.names = {"num_a", "num_c"};
    st.mean = {0.0, 0.0};
    st.sd = {1.0, 1.0};
    CHECK_THROWS_AS(encode(d, st), contract_error);
    NormalizationStats empty;
    d.numeric[0][1] = 2.0;
    CHECK_THROWS_AS(encode(d, empty), contract_error);
}
