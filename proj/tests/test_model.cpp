#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fgtt/encode.hpp"
#include "fgtt/model.hpp"
#include "fgtt/partition.hpp"
#include "fgtt/split.hpp"
#include "fgtt/synthetic.hpp"
#include "fgtt/train.hpp"
#include "helpers.hpp"

using namespace fgtt;
using namespace fgtt::ad;
using namespace fgtt::data;
using namespace fgtt::nn;

namespace {

EncodedMatrix toy_matrix(std::size_t rows, std::uint64_t seed) {
    auto schema = testutil::toy_schema();
    Dataset d = Dataset::empty(schema);
    Rng rng(seed);
    for (std::size_t r = 0; r < rows; ++r) {
        d.labels.push_back(static_cast<int>(rng.below(3)));
        d.numeric[0].push_back(rng.normal() + 2.0);
        d.categorical[1].push_back(static_cast<int>(rng.below(3)));
        d.categorical[2].push_back(static_cast<int>(rng.below(2)));
        d.numeric[3].push_back(3.0 * rng.normal());
    }
    std::vector<std::size_t> all(rows);
    for (std::size_t i = 0; i < rows; ++i) all[i] = i;
    return encode(d, fit_stats(d, all));
}

FGTTConfig small_config() {
    FGTTConfig cfg;
    cfg.hidden_dim = 8;
    cfg.ffn_dim = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.dropout_rate = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("partition_columns groups the default schema in canonical order") {
    auto schema = default_schema();
    auto cols = encoded_columns(schema);
    GroupPartition p = partition_columns(cols, schema);
    REQUIRE(p.names == std::vector<std::string>{"Event", "Traffic", "Environment", "Pavement",
                                                "Driver", "Contextual", "Geometric", "Vehicle"});
    CHECK(p.total_columns() == cols.size());

    // the Vehicle group holds exactly the one-hot columns of Veh1_type and Veh2_type
    const auto& vehicle = p.columns[7];
    REQUIRE(vehicle.size() == 10);
    for (std::size_t c : vehicle) {
        CHECK((cols[c].feature == "Veh1_type" || cols[c].feature == "Veh2_type"));
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].feature == "Veh1_type" || cols[c].feature == "Veh2_type") {
            CHECK(std::find(vehicle.begin(), vehicle.end(), c) != vehicle.end());
        }
    }
    // Event = Crash_location + Veh1_maneuver one-hots
    CHECK(p.columns[0].size() == 5 + 8);
}

TEST_CASE("partition_columns single group and orphan column") {
    FeatureSchema schema;
    schema.group_order = {"Only"};
    schema.features.push_back(Feature{"f", FeatureKind::numeric, {}, "Only"});
    schema.validate();
    auto cols = encoded_columns(schema);
    GroupPartition p = partition_columns(cols, schema);
    REQUIRE(p.n_groups() == 1);
    CHECK(p.columns[0] == std::vector<std::size_t>{0});

    std::vector<ColumnMeta> orphan{{"ghost", "Nowhere", ""}};
    CHECK_THROWS_AS(partition_columns(orphan, schema), data_error);
}

TEST_CASE("project_tokens maps zero rows to zero group tokens and keeps CLS") {
    auto X = toy_matrix(2, 1);
    auto schema = testutil::toy_schema();
    GroupPartition p = partition_columns(X.columns, schema);
    FGTTModel m = init_model(small_config(), p, 7);
    for (std::size_t j = 0; j < m.cls.size(); ++j) m.cls.values()[j] = 0.5 + static_cast<double>(j);

    Tape tape;
    Tensor zero_rows = Tensor::zeros({2, X.cols()});
    Tensor toks = project_tokens(tape, zero_rows, m);
    REQUIRE(toks.shape() == Shape{2, 3, 8});
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(toks.data()[(b * 3 + 0) * 8 + j] == m.cls.values()[j]);  // CLS passthrough
            CHECK(toks.data()[(b * 3 + 1) * 8 + j] == 0.0);
            CHECK(toks.data()[(b * 3 + 2) * 8 + j] == 0.0);
        }
    }
}

TEST_CASE("project_tokens shape contract under the default config") {
    auto schema = default_schema();
    EncodedMatrix X;
    X.columns = encoded_columns(schema);
    X.rows = 4;
    Rng rng(3);
    X.values.resize(X.rows * X.cols());
    for (auto& v : X.values) v = rng.normal();
    std::vector<std::size_t> all{0, 1, 2, 3};
    GroupPartition p = partition_columns(X.columns, schema);
    FGTTModel m = init_model(FGTTConfig{}, p, 1);
    Tape tape;
    Tensor toks = project_tokens(tape, batch_tensor(X, all), m);
    CHECK(toks.shape() == Shape{4, 9, 64});
    CHECK_THROWS_AS(project_tokens(tape, Tensor::zeros({4, X.cols() + 1}), m), shape_error);
}

TEST_CASE("group locality: perturbing one group's column moves only its token") {
    auto X = toy_matrix(3, 5);
    auto schema = testutil::toy_schema();
    GroupPartition p = partition_columns(X.columns, schema);
    FGTTModel m = init_model(small_config(), p, 11);

    std::vector<std::size_t> rows{0};
    Tensor x1 = batch_tensor(X, rows);
    Tensor x2(x1.shape(), x1.values());
    const std::size_t g2_col = p.columns[1][0];  // a G2 column
    x2.values()[g2_col] += 0.75;

    Tape tape;
    Tensor t1 = project_tokens(tape, x1, m);
    Tensor t2 = project_tokens(tape, x2, m);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(t1.data()[0 * 8 + j] == t2.data()[0 * 8 + j]);  // CLS
        CHECK(t1.data()[1 * 8 + j] == t2.data()[1 * 8 + j]);  // G1 token untouched
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < 8; ++j) diff += std::abs(t1.data()[2 * 8 + j] - t2.data()[2 * 8 + j]);
    CHECK(diff > 1e-6);
}

TEST_CASE("attention basics") {
    Rng rng(31);
    Linear identity2{Tensor({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2})};

    SECTION("single token gets weight 1 in every head") {
        Tensor q({1, 1, 2}, {0.3, -0.2});
        Tensor k({1, 1, 2}, {1.0, 2.0});
        Tensor v({1, 1, 2}, {5.0, 7.0});
        Tape tape;
        auto out = attention(tape, q, k, v, 2, identity2);
        REQUIRE(out.head_weights.size() == 2);
        for (const auto& w : out.head_weights) {
            REQUIRE(w.shape() == Shape{1, 1, 1});
            CHECK(w.data()[0] == Catch::Approx(1.0));
        }
        CHECK(out.values.data()[0] == Catch::Approx(5.0));
        CHECK(out.values.data()[1] == Catch::Approx(7.0));
    }

    SECTION("zero queries give uniform rows over 9 tokens") {
        Tensor q = Tensor::zeros({1, 9, 8});
        std::vector<double> kv(1 * 9 * 8);
        for (auto& x : kv) x = rng.normal();
        Tensor k({1, 9, 8}, kv);
        Tensor v({1, 9, 8}, kv);
        Linear identity8{Tensor::zeros({8, 8}), Tensor::zeros({8})};
        Tape tape;
        auto out = attention(tape, q, k, v, 4, identity8);
        for (const auto& w : out.head_weights)
            for (std::size_t i = 0; i < 81; ++i)
                CHECK(w.data()[i] == Catch::Approx(1.0 / 9.0).margin(1e-12));
    }

    SECTION("two tokens, d_k = 2, matches scalar evaluation") {
        // single head so the head width is 2
        const double q11 = 0.5, q12 = -1.0, q21 = 2.0, q22 = 0.25;
        const double k11 = 1.0, k12 = 0.5, k21 = -0.75, k22 = 1.5;
        const double v11 = 1.0, v12 = 2.0, v21 = 3.0, v22 = -1.0;
        Tensor q({1, 2, 2}, {q11, q12, q21, q22});
        Tensor k({1, 2, 2}, {k11, k12, k21, k22});
        Tensor v({1, 2, 2}, {v11, v12, v21, v22});
        Tape tape;
        auto out = attention(tape, q, k, v, 1, identity2);

        const double inv = 1.0 / std::sqrt(2.0);
        auto softmax2 = [](double a, double b) {
            const double m = std::max(a, b);
            const double ea = std::exp(a - m), eb = std::exp(b - m);
            return std::pair<double, double>{ea / (ea + eb), eb / (ea + eb)};
        };
        const double s11 = (q11 * k11 + q12 * k12) * inv, s12 = (q11 * k21 + q12 * k22) * inv;
        const double s21 = (q21 * k11 + q22 * k12) * inv, s22 = (q21 * k21 + q22 * k22) * inv;
        auto [w11, w12] = softmax2(s11, s12);
        auto [w21, w22] = softmax2(s21, s22);
        const auto& w = out.head_weights[0];
        CHECK(w.data()[0] == Catch::Approx(w11).margin(1e-9));
        CHECK(w.data()[1] == Catch::Approx(w12).margin(1e-9));
        CHECK(w.data()[2] == Catch::Approx(w21).margin(1e-9));
        CHECK(w.data()[3] == Catch::Approx(w22).margin(1e-9));
        CHECK(out.values.data()[0] == Catch::Approx(w11 * v11 + w12 * v21).margin(1e-9));
        CHECK(out.values.data()[1] == Catch::Approx(w11 * v12 + w12 * v22).margin(1e-9));
        CHECK(out.values.data()[2] == Catch::Approx(w21 * v11 + w22 * v21).margin(1e-9));
        CHECK(out.values.data()[3] == Catch::Approx(w21 * v12 + w22 * v22).margin(1e-9));
    }

    SECTION("indivisible width is rejected") {
        Tensor q = Tensor::zeros({1, 2, 6});
        Tape tape;
        Linear mix{Tensor::zeros({6, 6}), Tensor::zeros({6})};
        CHECK_THROWS_AS(attention(tape, q, q, q, 4, mix), config_error);
    }
}

TEST_CASE("encoder_forward degenerate and deterministic behavior") {
    auto X = toy_matrix(3, 9);
    auto schema = testutil::toy_schema();
    GroupPartition p = partition_columns(X.columns, schema);

    SECTION("zero layers pass tokens through") {
        auto cfg = small_config();
        cfg.n_layers = 0;
        FGTTModel m = init_model(cfg, p, 3);
        Rng rng(0);
        Tape tape;
        Tensor toks = project_tokens(tape, batch_tensor(X, {0, 1, 2}), m);
        AttentionRecord rec;
        Tensor out = encoder_forward(tape, toks, m, false, rng, &rec);
        CHECK(out.values() == toks.values());
    }

    SECTION("attention rows are stochastic and eval mode is deterministic") {
        FGTTModel m = init_model(small_config(), p, 4);
        Rng rng(0);
        Tape tape;
        Tensor toks = project_tokens(tape, batch_tensor(X, {0, 1, 2}), m);
        AttentionRecord rec;
        Tensor out1 = encoder_forward(tape, toks, m, false, rng, &rec);
        REQUIRE(rec.per_example.size() == 3);
        for (std::size_t e = 0; e < 3; ++e)
            for (std::size_t h = 0; h < rec.n_heads; ++h)
                for (std::size_t i = 0; i < rec.n_tokens; ++i) {
                    double sum = 0.0;
                    for (std::size_t j = 0; j < rec.n_tokens; ++j) {
                        CHECK(rec.at(e, h, i, j) >= 0.0);
                        sum += rec.at(e, h, i, j);
                    }
                    CHECK(std::abs(sum - 1.0) < 1e-6);
                }
        Tensor out2 = encoder_forward(tape, toks, m, false, rng);
        CHECK(out1.values() == out2.values());
    }
}

TEST_CASE("predict yields proper probability rows") {
    auto X = toy_matrix(6, 13);
    auto schema = testutil::toy_schema();
    GroupPartition p = partition_columns(X.columns, schema);
    FGTTModel m = init_model(small_config(), p, 21);
    auto pred = predict(m, X);
    REQUIRE(pred.probs.size() == 6 * 3);
    for (std::size_t r = 0; r < 6; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = pred.probs[r * 3 + c];
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }

    // zeroing the head's output layer forces the uniform distribution
    m.head2.w.values().assign(m.head2.w.size(), 0.0);
    m.head2.b.values().assign(m.head2.b.size(), 0.0);
    auto uniform = predict(m, X);
    for (double v : uniform.probs) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("permuting group token order permutes outputs and fixes CLS") {
    auto X = toy_matrix(2, 17);
    auto schema = testutil::toy_schema();
    GroupPartition p = partition_columns(X.columns, schema);
    FGTTModel m = init_model(small_config(), p, 5);

    // model with the two groups (and their projectors) swapped
    FGTTModel swapped = m;
    std::swap(swapped.partition.names[0], swapped.partition.names[1]);
    std::swap(swapped.partition.columns[0], swapped.partition.columns[1]);
    std::swap(swapped.projectors[0], swapped.projectors[1]);

    auto a = predict(m, X);
    auto b = predict(swapped, X);
    for (std::size_t i = 0; i < a.probs.size(); ++i)
        CHECK(a.probs[i] == Catch::Approx(b.probs[i]).margin(1e-9));

    // encoder-level check: permuted tokens produce correspondingly permuted outputs
    Rng rng(0);
    Tape tape;
    Tensor toks = project_tokens(tape, batch_tensor(X, {0, 1}), m);
    Tensor out = encoder_forward(tape, toks, m, false, rng);
    Tensor ptoks = Tensor::zeros(toks.shape());
    const std::size_t T = 3, H = 8;
    const std::size_t perm[] = {0, 2, 1};
    for (std::size_t b2 = 0; b2 < 2; ++b2)
        for (std::size_t t = 0; t < T; ++t)
            std::copy_n(toks.data() + (b2 * T + perm[t]) * H, H, ptoks.data() + (b2 * T + t) * H);
    Tensor pout = encoder_forward(tape, ptoks, m, false, rng);
    for (std::size_t b2 = 0; b2 < 2; ++b2)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < H; ++j)
                CHECK(pout.data()[(b2 * T + t) * H + j] ==
                      Catch::Approx(out.data()[(b2 * T + perm[t]) * H + j]).margin(1e-9));
}

TEST_CASE("end-to-end gradients match finite differences on a small model") {
    auto X = toy_matrix(4, 23);
    auto schema = testutil::toy_schema();
    GroupPartition p = partition_columns(X.columns, schema);
    FGTTModel m = init_model(small_config(), p, 29);
    Tensor xb = batch_tensor(X, {0, 1, 2, 3});

    // gradient w.r.t. the input
    auto forward_of_input = [&](Tape& t, const Tensor& v) {
        Rng rng(0);
        return forward_probs(t, v, m, false, rng);
    };
    CHECK(finite_diff_check(forward_of_input, xb, 1e-5) < 1e-3);

    // gradient w.r.t. a projector weight, an attention weight and the CLS
    // token: substitute the probe tensor for the parameter in a handle copy
    auto check_param = [&](auto slot_of) {
        auto fn = [&](Tape& t, const Tensor& v) {
            FGTTModel mm = m;
            slot_of(mm) = v;
            Rng rng(0);
            return forward_probs(t, xb, mm, false, rng);
        };
        return finite_diff_check(fn, slot_of(m), 1e-5);
    };
    CHECK(check_param([](FGTTModel& mm) -> Tensor& { return mm.projectors[0].first.w; }) < 1e-3);
    CHECK(check_param([](FGTTModel& mm) -> Tensor& { return mm.layers[0].q.w; }) < 1e-3);
    CHECK(check_param([](FGTTModel& mm) -> Tensor& { return mm.cls; }) < 1e-3);
    CHECK(check_param([](FGTTModel& mm) -> Tensor& { return mm.head2.b; }) < 1e-3);
}

TEST_CASE("aggregate_attention reductions") {
    AttentionRecord rec;
    rec.n_heads = 1;
    rec.n_tokens = 9;

    SECTION("mean of one example equals the example") {
        std::vector<double> w(81, 0.0);
        Rng rng(3);
        for (std::size_t i = 0; i < 9; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 9; ++j) {
                w[i * 9 + j] = rng.unit() + 0.1;
                sum += w[i * 9 + j];
            }
            for (std::size_t j = 0; j < 9; ++j) w[i * 9 + j] /= sum;
        }
        rec.per_example = {w};
        auto agg = aggregate_attention(rec, {2}, 2);
        CHECK(agg.n_examples == 1);
        auto own = rec.cls_scores(0);
        for (std::size_t j = 0; j < 8; ++j) CHECK(agg.cls_scores[j] == Catch::Approx(own[j]));
        for (std::size_t i = 0; i < 81; ++i) CHECK(agg.pair_heatmap[i] == Catch::Approx(w[i]));
    }

    SECTION("uniform attention gives 1/8 per group") {
        rec.per_example = {std::vector<double>(81, 1.0 / 9.0)};
        auto agg = aggregate_attention(rec, {0}, 0);
        for (double v : agg.cls_scores) CHECK(v == Catch::Approx(1.0 / 8.0));
        double sum = 0.0;
        for (double v : agg.cls_scores) sum += v;
        CHECK(sum == Catch::Approx(1.0));
    }

    SECTION("empty class subset is an error") {
        rec.per_example = {std::vector<double>(81, 1.0 / 9.0)};
        CHECK_THROWS_AS(aggregate_attention(rec, {0}, 1), data_error);
    }
}

TEST_CASE("checkpoint round-trip and fingerprint guard") {
    auto dir = testutil::scratch_dir("ckpt");
    auto X = toy_matrix(5, 37);
    auto schema = testutil::toy_schema();
    GroupPartition p = partition_columns(X.columns, schema);
    FGTTModel m = init_model(small_config(), p, 41);

    NormalizationStats stats;
    stats.names = {"num_a", "num_c"};
    stats.mean = {2.0, 0.0};
    stats.sd = {1.0, 3.0};
    const std::string path = (dir / "model.json").string();
    save_checkpoint(path, m, schema, stats);

    auto loaded = load_checkpoint(path, schema);
    auto a = predict(m, X);
    auto b = predict(loaded.model, X);
    CHECK(a.probs == b.probs);
    CHECK(loaded.stats.names == stats.names);

    auto other = default_schema();
    CHECK_THROWS_MATCHES(load_checkpoint(path, other), data_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("fingerprint")));
}

TEST_CASE("trained model mostly agrees with the planted Bayes rule") {
    synth::GeneratorConfig gc;
    gc.n_rows = 1500;
    gc.seed = 61;
    gc.missing_rate = 0.0;
    auto schema = default_schema();
    auto gen = synth::generate(gc, schema);
    auto sp = stratified_split(gen.dataset.labels, {0.8, 0.1, 0.1}, 3);
    auto stats = fit_stats(gen.dataset, sp.train);
    EncodedMatrix all = encode(gen.dataset, stats);
    EncodedMatrix Xtr = all.subset(sp.train), Xval = all.subset(sp.validation),
                  Xte = all.subset(sp.test);
    std::vector<int> ytr, yval;
    for (auto r : sp.train) ytr.push_back(gen.dataset.labels[r]);
    for (auto r : sp.validation) yval.push_back(gen.dataset.labels[r]);

    FGTTConfig cfg;
    cfg.hidden_dim = 16;
    cfg.ffn_dim = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.dropout_rate = 0.1;
    FGTTModel m = init_model(cfg, partition_columns(all.columns, schema), 17);

    train::TrainConfig tc;
    tc.learning_rate = 0.01;
    tc.optimizer = train::OptimizerKind::Adam;
    tc.batch_size = 64;
    tc.max_epochs = 15;
    tc.patience = 15;
    tc.seed = 5;
    train::FocalLossParams fl;
    fl.alpha = train::inverse_frequency_alpha(ytr);
    train::train(m, Xtr, ytr, Xval, yval, fl, tc);

    auto pred = predict(m, Xte);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < sp.test.size(); ++i)
        agree += pred.classes[i] == gen.bayes_predictions[sp.test[i]] ? 1 : 0;
    CHECK(static_cast<double>(agree) / static_cast<double>(sp.test.size()) >= 0.70);
}
