#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fgtt/booster.hpp"
#include "fgtt/cv.hpp"
#include "fgtt/forest.hpp"
#include "helpers.hpp"

using namespace fgtt;
using namespace fgtt::data;
using namespace fgtt::trees;

namespace {

EncodedMatrix raw_matrix(std::vector<std::string> names, std::vector<std::vector<double>> rows) {
    EncodedMatrix X;
    for (auto& n : names) X.columns.push_back(ColumnMeta{n, "G", ""});
    X.rows = rows.size();
    for (auto& r : rows) X.values.insert(X.values.end(), r.begin(), r.end());
    return X;
}

// four cells at exactly (+-1, +-1); label 0 when signs agree
EncodedMatrix xor_matrix(std::size_t per_cell, std::vector<int>& y, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<double, double>> cells;
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (std::size_t i = 0; i < per_cell; ++i)
                cells.push_back({static_cast<double>(sx), static_cast<double>(sy)});
    rng.shuffle(cells);
    for (const auto& [x, yy] : cells) {
        rows.push_back({x, yy});
        y.push_back(x * yy > 0 ? 0 : 1);
    }
    return raw_matrix({"x", "y"}, rows);
}

}  // namespace

TEST_CASE("one depth-1 tree separates a threshold") {
    EncodedMatrix X = raw_matrix({"x"}, {{-2.0}, {-1.0}, {1.0}, {2.0}});
    std::vector<int> y{0, 0, 1, 1};
    ForestConfig cfg;
    cfg.n_estimators = 1;
    cfg.max_depth = 1;
    cfg.features_per_split = 1.0;
    cfg.seed = 3;
    Forest f = train_random_forest(X, y, cfg);
    auto pred = predict_forest(f, X);
    CHECK(pred.classes == y);
}

TEST_CASE("fifty depth-3 trees shatter the XOR pattern") {
    std::vector<int> y;
    EncodedMatrix X = xor_matrix(10, y, 5);
    ForestConfig cfg;
    cfg.n_estimators = 50;
    cfg.max_depth = 3;
    cfg.min_samples_split = 2;
    cfg.features_per_split = 1.0;
    cfg.seed = 11;
    Forest f = train_random_forest(X, y, cfg);
    auto pred = predict_forest(f, X);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += pred.classes[i] == y[i] ? 1 : 0;
    CHECK(correct == y.size());
}

TEST_CASE("a forest of identical trees predicts like the single tree") {
    EncodedMatrix X = raw_matrix({"x"}, {{-2.0}, {-0.5}, {0.5}, {2.0}});
    std::vector<int> y{0, 0, 1, 1};
    ForestConfig cfg;
    cfg.n_estimators = 1;
    cfg.features_per_split = 1.0;
    cfg.seed = 1;
    Forest single = train_random_forest(X, y, cfg);
    Forest triple = single;
    triple.trees.push_back(single.trees[0]);
    triple.trees.push_back(single.trees[0]);
    auto a = predict_forest(single, X);
    auto b = predict_forest(triple, X);
    CHECK(a.classes == b.classes);
    for (std::size_t i = 0; i < a.probs.size(); ++i)
        CHECK(a.probs[i] == Catch::Approx(b.probs[i]).margin(1e-12));
}

TEST_CASE("vote ties break toward the lowest class id and probs sum to 1") {
    Forest f;
    f.n_classes = 3;
    f.n_features = 1;
    DecisionTree t0, t1;
    TreeNode leaf0;
    leaf0.dist = {1.0, 0.0, 0.0};
    t0.nodes.push_back(leaf0);
    TreeNode leaf1;
    leaf1.dist = {0.0, 1.0, 0.0};
    t1.nodes.push_back(leaf1);
    f.trees = {t0, t1};
    EncodedMatrix X = raw_matrix({"x"}, {{0.0}});
    auto pred = predict_forest(f, X);
    CHECK(pred.classes == std::vector<int>{0});
    double sum = 0.0;
    for (double p : pred.probs) sum += p;
    CHECK(sum == Catch::Approx(1.0));
}

TEST_CASE("forest input validation") {
    EncodedMatrix X = raw_matrix({"x"}, {{1.0}, {2.0}});
    CHECK_THROWS_AS(train_random_forest(X, {0, 0}, ForestConfig{}), data_error);
    std::vector<int> y{0, 1};
    ForestConfig cfg;
    cfg.n_estimators = 2;
    Forest f = train_random_forest(X, y, cfg);
    EncodedMatrix wide = raw_matrix({"x", "z"}, {{1.0, 2.0}});
    CHECK_THROWS_AS(predict_forest(f, wide), shape_error);
    ForestConfig bad;
    bad.min_samples_split = 1;
    CHECK_THROWS_AS(train_random_forest(X, y, bad), config_error);
}

TEST_CASE("an unbounded tree fits any consistent dataset exactly") {
    Rng rng(33);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (std::size_t i = 0; i < 60; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.normal()});
        y.push_back(static_cast<int>(rng.below(3)));
    }
    EncodedMatrix X = raw_matrix({"a", "b", "c"}, rows);

    std::vector<std::uint32_t> samples(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) samples[i] = static_cast<std::uint32_t>(i);
    auto cols = trees::detail::SortedColumns::build(X, samples);
    ForestConfig cfg;
    cfg.max_depth = 0;  // unlimited
    cfg.min_samples_split = 2;
    cfg.features_per_split = 1.0;
    Rng tree_rng(7);
    trees::detail::GiniBuilder builder{X, y, 3, cfg, tree_rng, {}};
    builder.build(cols, 0);
    for (std::size_t r = 0; r < X.rows; ++r) {
        const TreeNode& leaf = builder.tree.leaf_for(X.values.data() + r * X.cols());
        CHECK(leaf.dist[static_cast<std::size_t>(y[r])] == 1.0);
    }
}

TEST_CASE("forest training is deterministic per seed") {
    std::vector<int> y;
    EncodedMatrix X = xor_matrix(8, y, 21);
    ForestConfig cfg;
    cfg.n_estimators = 12;
    cfg.max_depth = 4;
    cfg.seed = 40;
    auto a = predict_forest(train_random_forest(X, y, cfg), X);
    auto b = predict_forest(train_random_forest(X, y, cfg), X);
    CHECK(a.probs == b.probs);
}

TEST_CASE("stump leaf weight is -G/(H+lambda)") {
    EncodedMatrix X = raw_matrix({"x"}, {{1.0}, {2.0}, {3.0}, {4.0}});
    std::vector<double> g{0.3, -0.2, 0.5, 0.1};
    std::vector<double> h{0.2, 0.3, 0.1, 0.4};
    BoosterConfig cfg;
    cfg.max_depth = 0;
    cfg.lambda = 0.7;
    std::vector<std::uint32_t> samples{0, 1, 2, 3};
    auto cols = trees::detail::SortedColumns::build(X, samples);
    trees::detail::GradBuilder builder{X, g, h, cfg, {}};
    builder.build(cols, 0);
    REQUIRE(builder.tree.nodes.size() == 1);
    CHECK(builder.tree.nodes[0].weight == Catch::Approx(-0.7 / (1.0 + 0.7)));
}

TEST_CASE("one depth-0 round leaves the log-prior logits in place") {
    // symmetric binary case: zero gradient sum, zero leaf weight
    EncodedMatrix Xb = raw_matrix({"x"}, {{1.0}, {2.0}, {3.0}, {4.0}});
    std::vector<int> yb{0, 0, 1, 1};
    BoosterConfig cfg;
    cfg.eta = 1.0;
    cfg.n_estimators = 1;
    cfg.max_depth = 0;
    cfg.lambda = 0.0;
    Booster b = train_booster(Xb, yb, cfg);
    auto pred = predict_booster(b, Xb);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(pred.probs[i * 2 + 0] == Catch::Approx(0.5).margin(1e-12));
        CHECK(pred.probs[i * 2 + 1] == Catch::Approx(0.5).margin(1e-12));
    }

    // three-class fixture against the closed form: probabilities equal priors
    std::vector<std::vector<double>> rows;
    std::vector<int> y3;
    Rng rng(2);
    for (std::size_t i = 0; i < 100; ++i) {
        rows.push_back({rng.normal()});
        y3.push_back(i < 58 ? 0 : (i < 87 ? 1 : 2));
    }
    EncodedMatrix X3 = raw_matrix({"x"}, rows);
    Booster b3 = train_booster(X3, y3, cfg);
    auto pred3 = predict_booster(b3, X3);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(pred3.probs[i * 3 + 0] == Catch::Approx(0.58).margin(1e-12));
        CHECK(pred3.probs[i * 3 + 1] == Catch::Approx(0.29).margin(1e-12));
        CHECK(pred3.probs[i * 3 + 2] == Catch::Approx(0.13).margin(1e-12));
    }
}

TEST_CASE("training log-loss is non-increasing over 50 rounds") {
    std::vector<int> y;
    EncodedMatrix X = xor_matrix(10, y, 77);
    BoosterConfig cfg;
    cfg.eta = 0.1;
    cfg.max_depth = 3;
    cfg.lambda = 1.0;
    double prev = 1e300;
    for (std::size_t rounds = 1; rounds <= 50; rounds += 7) {
        cfg.n_estimators = rounds;
        Booster b = train_booster(X, y, cfg);
        const double loss = multiclass_log_loss(predict_booster(b, X), y, b.n_classes);
        CHECK(loss <= prev + 1e-12);
        prev = loss;
    }
}

TEST_CASE("a prohibitive split penalty produces a stump ensemble") {
    std::vector<int> y;
    EncodedMatrix X = xor_matrix(6, y, 13);
    BoosterConfig cfg;
    cfg.n_estimators = 5;
    cfg.max_depth = 4;
    cfg.gamma_complexity = 1e9;
    Booster b = train_booster(X, y, cfg);
    for (const auto& round : b.rounds)
        for (const auto& tree : round) CHECK(tree.nodes.size() == 1);
}

TEST_CASE("booster validation") {
    EncodedMatrix X = raw_matrix({"x"}, {{1.0}, {2.0}});
    BoosterConfig bad;
    bad.eta = 0.0;
    CHECK_THROWS_AS(train_booster(X, {0, 1}, bad), config_error);
    CHECK_THROWS_AS(train_booster(X, {1, 1}, BoosterConfig{}), data_error);
    Booster b = train_booster(X, {0, 1}, BoosterConfig{});
    EncodedMatrix wide = raw_matrix({"x", "z"}, {{1.0, 2.0}});
    CHECK_THROWS_AS(predict_booster(b, wide), shape_error);
}

TEST_CASE("grid search: single combination comes back with its score") {
    std::vector<int> y;
    EncodedMatrix X = xor_matrix(10, y, 3);
    ParamGrid grid{{"n_estimators", {10}}, {"max_depth", {3}}};
    GridResult res = grid_search_cv("forest", grid, X, y, 4, 9);
    REQUIRE(res.table.size() == 1);
    CHECK(res.best.params.at("n_estimators") == 10);
    CHECK(res.best.params.at("max_depth") == 3);
    CHECK(res.best.mean_f1 == res.table[0].mean_f1);
    CHECK(res.best.fold_f1.size() == 4);
}

TEST_CASE("grid search prefers the depth that can represent XOR") {
    std::vector<int> y;
    EncodedMatrix X = xor_matrix(12, y, 29);
    ParamGrid grid{{"max_depth", {1, 3}}, {"n_estimators", {30}}, {"features_per_split", {1.0}}};
    GridResult res = grid_search_cv("forest", grid, X, y, 4, 17);
    REQUIRE(res.table.size() == 2);
    CHECK(res.best.params.at("max_depth") == 3);
    CHECK(res.table[1].mean_f1 > res.table[0].mean_f1);
}

TEST_CASE("grid search works for the booster family and writes its table") {
    std::vector<int> y;
    EncodedMatrix X = xor_matrix(8, y, 31);
    ParamGrid grid{{"eta", {0.1, 0.3}}, {"n_estimators", {20}}, {"max_depth", {3}}};
    GridResult res = grid_search_cv("booster", grid, X, y, 3, 23);
    REQUIRE(res.table.size() == 2);
    CHECK(res.best.mean_f1 >= res.table[0].mean_f1 - 1e-12);
    std::ostringstream out;
    write_cv_table(out, res);
    std::istringstream in(out.str());
    auto rows = csv::read_rows(in);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].back() == "mean_f1");

    CHECK_THROWS_AS(grid_search_cv("catboost", grid, X, y, 3, 1), config_error);
    // a class thinner than the fold count
    std::vector<int> thin = y;
    EncodedMatrix Xt = X;
    Xt.rows += 1;
    Xt.values.push_back(0.0);
    Xt.values.push_back(0.0);
    thin.push_back(2);
    CHECK_THROWS_AS(grid_search_cv("forest", grid, Xt, thin, 3, 1), data_error);
}
