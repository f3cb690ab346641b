// Command-line pipeline driver: synthetic data generation, preprocessing,
// stratified splitting, FGTT training and tuning, tree-ensemble baselines,
// evaluation and attention/importance reports.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fgtt/fgtt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fgtt;

namespace {

struct RunContext {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    fs::path out(const std::string& name) {
        fs::create_directories(out_dir);
        fs::path p = fs::path(out_dir) / name;
        outputs.push_back(p.string());
        return p;
    }

    void finish() {
        report::RunManifest m;
        m.command = command;
        m.config_path = config_path;
        m.seed = seed;
        m.inputs = inputs;
        m.outputs = outputs;
        m.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        fs::create_directories(out_dir);
        const fs::path p = fs::path(out_dir) / "manifest.json";
        m.write(p.string());
        std::cout << "wrote " << p.string() << "\n";
    }
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config: " + path);
    json j;
    in >> j;
    return j;
}

data::FeatureSchema schema_of(const json& config) {
    if (config.contains("schema")) return data::FeatureSchema::from_json(config.at("schema"));
    return data::default_schema();
}

synth::GeneratorConfig generator_of(const json& config) {
    synth::GeneratorConfig g;
    if (!config.contains("generator")) return g;
    const json& j = config.at("generator");
    g.n_rows = j.value("rows", g.n_rows);
    g.seed = j.value("seed", g.seed);
    g.signal_strength = j.value("signal_strength", g.signal_strength);
    g.missing_rate = j.value("missing_rate", g.missing_rate);
    if (j.contains("class_mix")) {
        auto mix = j.at("class_mix").get<std::vector<double>>();
        if (mix.size() != 3) throw config_error("generator.class_mix needs 3 entries");
        g.class_mix = {mix[0], mix[1], mix[2]};
    }
    return g;
}

nn::FGTTConfig model_of(const json& config) {
    nn::FGTTConfig m;
    if (!config.contains("model")) return m;
    const json& j = config.at("model");
    m.hidden_dim = j.value("hidden_dim", m.hidden_dim);
    m.ffn_dim = j.value("ffn_dim", m.ffn_dim);
    m.n_heads = j.value("n_heads", m.n_heads);
    m.n_layers = j.value("n_layers", m.n_layers);
    m.dropout_rate = j.value("dropout_rate", m.dropout_rate);
    m.projector_hidden = j.value("projector_hidden", m.projector_hidden);
    return m;
}

train::TrainConfig training_of(const json& config) {
    train::TrainConfig t;
    t.max_epochs = 40;
    t.patience = 8;
    if (!config.contains("training")) return t;
    const json& j = config.at("training");
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    if (j.contains("optimizer")) t.optimizer = train::optimizer_from_string(j.at("optimizer"));
    t.batch_size = j.value("batch_size", t.batch_size);
    t.max_epochs = j.value("max_epochs", t.max_epochs);
    t.patience = j.value("patience", t.patience);
    t.seed = j.value("seed", t.seed);
    return t;
}

train::FocalLossParams focal_of(const json& config, const std::vector<int>& train_labels) {
    train::FocalLossParams f;
    f.alpha = train::inverse_frequency_alpha(train_labels);
    if (!config.contains("focal")) return f;
    const json& j = config.at("focal");
    f.gamma = j.value("gamma", f.gamma);
    if (j.contains("alpha")) {
        if (j.at("alpha").is_string()) {
            if (j.at("alpha").get<std::string>() != "inverse_frequency")
                throw config_error("focal.alpha: expected numbers or \"inverse_frequency\"");
        } else {
            auto a = j.at("alpha").get<std::vector<double>>();
            if (a.size() != 3) throw config_error("focal.alpha needs 3 entries");
            f.alpha = {a[0], a[1], a[2]};
        }
    }
    return f;
}

// the two reference imputation rules, unless the config overrides them
std::vector<std::pair<std::string, std::vector<std::string>>> imputation_of(
    const json& config, const data::FeatureSchema& schema) {
    std::vector<std::pair<std::string, std::vector<std::string>>> rules;
    if (config.contains("imputation")) {
        for (const auto& j : config.at("imputation"))
            rules.push_back({j.at("target").get<std::string>(),
                             j.at("group_by").get<std::vector<std::string>>()});
        return rules;
    }
    if (schema.index_of("Precip_accum") >= 0)
        rules.push_back({"Precip_accum", {"City", "Date_element"}});
    if (schema.index_of("Hourly_avg_speed") >= 0)
        rules.push_back({"Hourly_avg_speed",
                         {"Num_lanes", "Day_of_week", "Facility_type", "Area_type", "Time_of_day"}});
    return rules;
}

data::Dataset load_imputed(RunContext& ctx, const std::string& path,
                           const data::FeatureSchema& schema, const json& config) {
    ctx.inputs.push_back(path);
    data::Dataset d = data::load_dataset(path, schema);
    for (const auto& [target, keys] : imputation_of(config, schema))
        d = data::impute_group_mean(d, target, keys);
    return d;
}

struct EncodedSplits {
    data::EncodedMatrix train, validation, test;
    std::vector<int> ytrain, yval, ytest;
    data::NormalizationStats stats;
    data::EncodedMatrix all;
    data::SplitIndices splits;
};

EncodedSplits encode_with_splits(RunContext& ctx, const data::Dataset& d,
                                 const std::string& splits_path) {
    ctx.inputs.push_back(splits_path);
    EncodedSplits es;
    es.splits = data::load_splits(splits_path);
    es.stats = data::fit_stats(d, es.splits.train);
    es.all = data::encode(d, es.stats);
    es.train = es.all.subset(es.splits.train);
    es.validation = es.all.subset(es.splits.validation);
    es.test = es.all.subset(es.splits.test);
    for (auto r : es.splits.train) es.ytrain.push_back(d.labels[r]);
    for (auto r : es.splits.validation) es.yval.push_back(d.labels[r]);
    for (auto r : es.splits.test) es.ytest.push_back(d.labels[r]);
    return es;
}

void write_text(RunContext& ctx, const std::string& name,
                const std::function<void(std::ostream&)>& fn) {
    const fs::path p = ctx.out(name);
    std::ofstream out(p);
    if (!out) throw data_error("cannot write file: " + p.string());
    fn(out);
    std::cout << "wrote " << p.string() << "\n";
}

std::array<double, 3> parse_ratios(const std::string& s) {
    std::array<double, 3> r{};
    std::stringstream ss(s);
    std::string tok;
    std::size_t i = 0;
    while (std::getline(ss, tok, ',')) {
        if (i >= 3) throw config_error("--ratios expects three comma-separated values");
        r[i++] = std::stod(tok);
    }
    if (i != 3) throw config_error("--ratios expects three comma-separated values");
    return r;
}

// ---------------------------------------------------------------------------

int cmd_generate(RunContext& ctx, const json& config, std::size_t rows_flag, double signal_flag,
                 double missing_flag, bool seed_set) {
    auto schema = schema_of(config);
    synth::GeneratorConfig g = generator_of(config);
    if (rows_flag) g.n_rows = rows_flag;
    if (signal_flag >= 0.0) g.signal_strength = signal_flag;
    if (missing_flag >= 0.0) g.missing_rate = missing_flag;
    if (seed_set) g.seed = ctx.seed;  // --seed wins over the config seed
    ctx.seed = g.seed;

    auto gen = synth::generate(g, schema);
    const fs::path data_path = ctx.out("dataset.csv");
    data::save_dataset(data_path.string(), gen.dataset);
    std::cout << "wrote " << data_path.string() << " (" << g.n_rows << " rows)\n";

    write_text(ctx, "generator_manifest.json", [&](std::ostream& out) {
        out << synth::generator_manifest(g, gen).dump(1) << '\n';
    });
    write_text(ctx, "marginals.csv",
               [&](std::ostream& out) { synth::marginal_report(out, gen.dataset); });
    std::cout << "bayes ceiling: accuracy " << csv::num(gen.bayes_ceiling.overall_accuracy)
              << ", weighted F1 " << csv::num(gen.bayes_ceiling.weighted_f1) << "\n";
    return 0;
}

int cmd_split(RunContext& ctx, const json& config, const std::string& data_path,
              const std::string& ratios) {
    auto schema = schema_of(config);
    ctx.inputs.push_back(data_path);
    data::Dataset d = data::load_dataset(data_path, schema);
    auto sp = data::stratified_split(d.labels, parse_ratios(ratios), ctx.seed);
    const fs::path p = ctx.out("splits.csv");
    data::save_splits(p.string(), sp, d.labels);
    std::cout << "wrote " << p.string() << " (train " << sp.train.size() << ", validation "
              << sp.validation.size() << ", test " << sp.test.size() << ")\n";
    return 0;
}

int cmd_preprocess(RunContext& ctx, const json& config, const std::string& data_path,
                   const std::string& splits_path) {
    auto schema = schema_of(config);
    data::Dataset d = load_imputed(ctx, data_path, schema, config);
    EncodedSplits es = encode_with_splits(ctx, d, splits_path);

    const fs::path imputed = ctx.out("imputed.csv");
    data::save_dataset(imputed.string(), d);
    std::cout << "wrote " << imputed.string() << "\n";
    write_text(ctx, "stats.csv", [&](std::ostream& out) {
        csv::write_row(out, {"feature", "mean", "sd"});
        for (std::size_t i = 0; i < es.stats.names.size(); ++i)
            csv::write_row(out, {es.stats.names[i], csv::num(es.stats.mean[i]),
                                 csv::num(es.stats.sd[i])});
    });
    const fs::path encoded = ctx.out("encoded.csv");
    data::save_encoded(encoded.string(), es.all, d.labels);
    std::cout << "wrote " << encoded.string() << "\n";
    const fs::path cols = ctx.out("columns.csv");
    data::save_column_meta(cols.string(), es.all.columns);
    std::cout << "wrote " << cols.string() << "\n";
    return 0;
}

int cmd_train(RunContext& ctx, const json& config, const std::string& data_path,
              const std::string& splits_path, bool seed_set) {
    auto schema = schema_of(config);
    data::Dataset d = load_imputed(ctx, data_path, schema, config);
    EncodedSplits es = encode_with_splits(ctx, d, splits_path);

    nn::FGTTConfig mc = model_of(config);
    train::TrainConfig tc = training_of(config);
    if (seed_set) tc.seed = ctx.seed;
    ctx.seed = tc.seed;
    auto fl = focal_of(config, es.ytrain);

    auto partition = nn::partition_columns(es.all.columns, schema);
    nn::FGTTModel model = nn::init_model(mc, partition, ctx.seed, schema.label_classes.size());
    auto res = train::train(model, es.train, es.ytrain, es.validation, es.yval, fl, tc);
    std::cout << "best validation weighted F1 " << csv::num(res.best_val_f1) << " at epoch "
              << res.best_epoch << " (" << res.history.size() << " epochs run)\n";

    const fs::path ckpt = ctx.out("checkpoint.json");
    nn::save_checkpoint(ckpt.string(), model, schema, es.stats);
    std::cout << "wrote " << ckpt.string() << "\n";
    write_text(ctx, "history.csv", [&](std::ostream& out) {
        csv::write_row(out, {"epoch", "train_loss", "val_loss", "val_weighted_f1"});
        for (const auto& e : res.history)
            csv::write_row(out, {std::to_string(e.epoch), csv::num(e.train_loss),
                                 csv::num(e.val_loss), csv::num(e.val_weighted_f1)});
    });
    auto val_pred = nn::predict(model, es.validation);
    const auto vm = train::compute_metrics(val_pred.classes, es.yval, model.n_classes);
    write_text(ctx, "val_metrics.csv",
               [&](std::ostream& out) { train::write_metrics_report(out, vm, schema.label_classes); });
    return 0;
}

int cmd_evaluate(RunContext& ctx, const json& config, const std::string& ckpt_path,
                 const std::string& data_path, const std::string& splits_path) {
    auto schema = schema_of(config);
    ctx.inputs.push_back(ckpt_path);
    auto loaded = nn::load_checkpoint(ckpt_path, schema);
    data::Dataset d = load_imputed(ctx, data_path, schema, config);

    data::EncodedMatrix X = data::encode(d, loaded.stats);
    std::vector<int> y = d.labels;
    if (!splits_path.empty()) {
        ctx.inputs.push_back(splits_path);
        auto sp = data::load_splits(splits_path);
        X = X.subset(sp.test);
        y.clear();
        for (auto r : sp.test) y.push_back(d.labels[r]);
        std::cout << "evaluating on the test split (" << y.size() << " rows)\n";
    }
    auto pred = nn::predict(loaded.model, X);
    const auto m = train::compute_metrics(pred.classes, y, loaded.model.n_classes);
    write_text(ctx, "metrics.csv",
               [&](std::ostream& out) { train::write_metrics_report(out, m, schema.label_classes); });
    train::write_metrics_report(std::cout, m, schema.label_classes);
    return 0;
}

trees::ParamGrid grid_of(const json& config, const std::string& family) {
    trees::ParamGrid grid;
    const char* key = family == "forest" ? "forest_grid" : "booster_grid";
    if (config.contains(key)) {
        for (const auto& [name, values] : config.at(key).items())
            grid.push_back({name, values.get<std::vector<double>>()});
        return grid;
    }
    if (family == "forest") {
        grid.push_back({"n_estimators", {50, 100}});
        grid.push_back({"max_depth", {10, 20}});
        grid.push_back({"min_samples_split", {2, 5}});
    } else {
        grid.push_back({"eta", {0.05, 0.1, 0.3}});
        grid.push_back({"n_estimators", {50, 100}});
        grid.push_back({"max_depth", {3, 5}});
    }
    return grid;
}

int cmd_baseline(RunContext& ctx, const json& config, const std::string& family,
                 const std::string& data_path, const std::string& splits_path, std::size_t folds) {
    auto schema = schema_of(config);
    data::Dataset d = load_imputed(ctx, data_path, schema, config);
    EncodedSplits es = encode_with_splits(ctx, d, splits_path);

    auto grid = grid_of(config, family);
    auto res = trees::grid_search_cv(family, grid, es.train, es.ytrain, folds, ctx.seed);
    write_text(ctx, "cv_table.csv", [&](std::ostream& out) { trees::write_cv_table(out, res); });
    std::cout << family << " best mean CV weighted F1 " << csv::num(res.best.mean_f1) << "\n";

    report::Predictor predictor;
    if (family == "forest") {
        auto forest = trees::train_random_forest(
            es.train, es.ytrain, trees::detail::forest_config_of(res.best.params, ctx.seed));
        predictor = [forest](const data::EncodedMatrix& X) {
            return trees::predict_forest(forest, X).classes;
        };
    } else {
        auto booster = trees::train_booster(
            es.train, es.ytrain, trees::detail::booster_config_of(res.best.params, ctx.seed));
        predictor = [booster](const data::EncodedMatrix& X) {
            return trees::predict_booster(booster, X).classes;
        };
    }
    const auto m = train::compute_metrics(predictor(es.test), es.ytest, 3);
    write_text(ctx, "metrics.csv",
               [&](std::ostream& out) { train::write_metrics_report(out, m, schema.label_classes); });
    std::cout << "test weighted F1 " << csv::num(m.weighted_f1) << ", accuracy "
              << csv::num(m.overall_accuracy) << "\n";

    auto imp = report::permutation_importance(predictor, es.test, es.ytest, 3, ctx.seed);
    write_text(ctx, "importance.csv",
               [&](std::ostream& out) { report::write_importance(out, imp); });
    return 0;
}

int cmd_tune(RunContext& ctx, const json& config, const std::string& data_path,
             const std::string& splits_path, std::size_t budget, std::size_t n_init,
             const std::string& resume) {
    auto schema = schema_of(config);
    data::Dataset d = load_imputed(ctx, data_path, schema, config);
    EncodedSplits es = encode_with_splits(ctx, d, splits_path);
    auto partition = nn::partition_columns(es.all.columns, schema);
    train::TrainConfig base_tc = training_of(config);

    hpo::SearchSpace space = config.contains("search_space")
                                 ? hpo::space_from_json(config.at("search_space"))
                                 : hpo::default_fgtt_space();

    auto objective = [&](const hpo::Point& p) -> double {
        nn::FGTTConfig mc;
        train::TrainConfig tc = base_tc;
        for (std::size_t i = 0; i < space.dims.size(); ++i) {
            const auto& dim = space.dims[i];
            if (dim.name == "learning_rate") tc.learning_rate = p.value(i);
            else if (dim.name == "optimizer")
                tc.optimizer = train::optimizer_from_string(
                    dim.options[static_cast<std::size_t>(p.index(i))]);
            else if (dim.name == "ffn_dim") mc.ffn_dim = static_cast<std::size_t>(p.value(i));
            else if (dim.name == "hidden_dim") mc.hidden_dim = static_cast<std::size_t>(p.value(i));
            else if (dim.name == "dropout") mc.dropout_rate = p.value(i);
            else if (dim.name == "n_heads") mc.n_heads = static_cast<std::size_t>(p.value(i));
            else if (dim.name == "n_layers") mc.n_layers = static_cast<std::size_t>(p.value(i));
            else throw config_error("tune: unknown search dimension " + dim.name);
        }
        if (mc.hidden_dim % mc.n_heads != 0) return std::nan("");  // infeasible combination
        tc.seed = ctx.seed;
        nn::FGTTModel model = nn::init_model(mc, partition, ctx.seed, schema.label_classes.size());
        auto fl = focal_of(config, es.ytrain);
        auto res = train::train(model, es.train, es.ytrain, es.validation, es.yval, fl, tc);
        std::cout << "trial: " << space.describe(p) << " -> " << csv::num(res.best_val_f1) << "\n";
        return res.best_val_f1;
    };

    std::vector<hpo::Trial> warm;
    if (!resume.empty()) {
        ctx.inputs.push_back(resume);
        warm = hpo::read_trials(resume, space);
        std::cout << "resuming from " << warm.size() << " prior trials\n";
    }
    auto res = hpo::optimize(objective, space, budget, n_init, ctx.seed,
                             warm.empty() ? nullptr : &warm);
    write_text(ctx, "trials.csv", [&](std::ostream& out) { hpo::write_trials(out, res, space); });
    write_text(ctx, "best.json", [&](std::ostream& out) {
        json j;
        j["objective"] = res.best.objective;
        for (std::size_t i = 0; i < space.dims.size(); ++i) {
            const auto& dim = space.dims[i];
            if (dim.kind == hpo::Dim::Categorical)
                j["point"][dim.name] = dim.options[static_cast<std::size_t>(res.best.point.index(i))];
            else j["point"][dim.name] = res.best.point.value(i);
        }
        out << j.dump(1) << '\n';
    });
    std::cout << "best " << space.describe(res.best.point) << " -> " << csv::num(res.best.objective)
              << "\n";
    return 0;
}

int cmd_explain(RunContext& ctx, const json& config, const std::string& ckpt_path,
                const std::string& data_path, const std::string& splits_path, std::size_t repeats) {
    auto schema = schema_of(config);
    ctx.inputs.push_back(ckpt_path);
    auto loaded = nn::load_checkpoint(ckpt_path, schema);
    data::Dataset d = load_imputed(ctx, data_path, schema, config);
    data::EncodedMatrix X = data::encode(d, loaded.stats);
    std::vector<int> y = d.labels;
    if (!splits_path.empty()) {
        ctx.inputs.push_back(splits_path);
        auto sp = data::load_splits(splits_path);
        X = X.subset(sp.test);
        y.clear();
        for (auto r : sp.test) y.push_back(d.labels[r]);
    }

    auto pred = nn::predict(loaded.model, X);
    const auto& part = loaded.model.partition;
    std::vector<std::string> pair_labels{"CLS"};
    pair_labels.insert(pair_labels.end(), part.names.begin(), part.names.end());

    auto slug = [](std::string s) {
        for (auto& c : s)
            if (c == ' ' || c == '/') c = '_';
        return s;
    };
    for (std::size_t cls = 0; cls < schema.label_classes.size(); ++cls) {
        auto agg = nn::aggregate_attention(pred.attention, y, static_cast<int>(cls));
        const std::string tag = slug(schema.label_classes[cls]);
        const fs::path bars_csv = ctx.out("cls_attention_" + tag + ".csv");
        report::write_bars_csv(bars_csv.string(), part.names, agg.cls_scores);
        const fs::path bars_svg = ctx.out("cls_attention_" + tag + ".svg");
        report::write_bars_svg(bars_svg.string(), part.names, agg.cls_scores,
                               "CLS attention by feature group: " + schema.label_classes[cls]);
        const fs::path heat_csv = ctx.out("attention_pairs_" + tag + ".csv");
        report::write_matrix_csv(heat_csv.string(), pair_labels, agg.pair_heatmap);
        // rendering is always derived from the text matrix it sits next to
        std::vector<std::string> back_labels;
        auto matrix = report::read_matrix_csv(heat_csv.string(), back_labels);
        const fs::path heat_svg = ctx.out("attention_pairs_" + tag + ".svg");
        report::write_heatmap_svg(heat_svg.string(), back_labels, matrix,
                                  "Feature group attention: " + schema.label_classes[cls]);
        std::cout << "wrote attention reports for " << schema.label_classes[cls] << " ("
                  << agg.n_examples << " examples)\n";
    }

    report::Predictor predictor = [&loaded](const data::EncodedMatrix& M) {
        return nn::predict(loaded.model, M).classes;
    };
    auto imp = report::permutation_importance(predictor, X, y, repeats, ctx.seed);
    write_text(ctx, "importance.csv",
               [&](std::ostream& out) { report::write_importance(out, imp); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-group tabular transformer pipeline"};
    app.require_subcommand(1);

    std::string config_path, data_path, splits_path, ckpt_path, out_dir = ".", ratios =
        "0.885,0.0575,0.0575";
    std::string family = "forest", resume;
    std::uint64_t seed = 0;
    std::size_t rows = 0, budget = 30, n_init = 10, repeats = 3, folds = 5;
    double signal = -1.0, missing = -1.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--config", config_path, "JSON config document");
        cmd->add_option("--out", out_dir, "output directory");
    };

    auto* g = app.add_subcommand("generate", "emit a synthetic dataset with a planted signal");
    add_common(g);
    g->add_option("--rows", rows, "number of rows");
    g->add_option("--signal-strength", signal, "planted signal sharpness");
    g->add_option("--missing-rate", missing, "masking rate for the two imputed features");

    auto* s = app.add_subcommand("split", "stratified train/validation/test indices");
    add_common(s);
    s->add_option("--data", data_path, "dataset csv")->required();
    s->add_option("--ratios", ratios, "train,validation,test ratios");

    auto* p = app.add_subcommand("preprocess", "impute, fit stats on train, encode");
    add_common(p);
    p->add_option("--data", data_path, "dataset csv")->required();
    p->add_option("--splits", splits_path, "split index file")->required();

    auto* t = app.add_subcommand("train", "train the transformer with focal loss");
    add_common(t);
    t->add_option("--data", data_path, "dataset csv")->required();
    t->add_option("--splits", splits_path, "split index file")->required();

    auto* e = app.add_subcommand("evaluate", "score a checkpoint on a dataset or its test split");
    add_common(e);
    e->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    e->add_option("--data", data_path, "dataset csv")->required();
    e->add_option("--splits", splits_path, "split index file (evaluates the test split)");

    auto* b = app.add_subcommand("baseline", "grid-searched tree-ensemble baselines");
    add_common(b);
    b->add_option("--family", family, "forest | booster");
    b->add_option("--data", data_path, "dataset csv")->required();
    b->add_option("--splits", splits_path, "split index file")->required();
    b->add_option("--folds", folds, "cross-validation folds");

    auto* u = app.add_subcommand("tune", "Bayesian optimization of model hyperparameters");
    add_common(u);
    u->add_option("--data", data_path, "dataset csv")->required();
    u->add_option("--splits", splits_path, "split index file")->required();
    u->add_option("--budget", budget, "total trials");
    u->add_option("--n-init", n_init, "random trials before the surrogate");
    u->add_option("--resume", resume, "trial history file to continue from");

    auto* x = app.add_subcommand("explain", "attention aggregates and permutation importance");
    add_common(x);
    x->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    x->add_option("--data", data_path, "dataset csv")->required();
    x->add_option("--splits", splits_path, "split index file (uses the test split)");
    x->add_option("--repeats", repeats, "permutation repeats");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        if (err.get_exit_code() == 0) return app.exit(err);  // --help
        app.exit(err);
        return 1;
    }

    RunContext ctx;
    ctx.command = app.get_subcommands()[0]->get_name();
    ctx.config_path = config_path;
    ctx.seed = seed;
    ctx.out_dir = out_dir;
    if (!config_path.empty()) ctx.inputs.push_back(config_path);

    const bool seed_set = app.get_subcommands()[0]->count("--seed") > 0;
    try {
        const json config = load_config(config_path);
        int rc = 0;
        if (g->parsed()) rc = cmd_generate(ctx, config, rows, signal, missing, seed_set);
        else if (s->parsed()) rc = cmd_split(ctx, config, data_path, ratios);
        else if (p->parsed()) rc = cmd_preprocess(ctx, config, data_path, splits_path);
        else if (t->parsed()) rc = cmd_train(ctx, config, data_path, splits_path, seed_set);
        else if (e->parsed()) rc = cmd_evaluate(ctx, config, ckpt_path, data_path, splits_path);
        else if (b->parsed()) rc = cmd_baseline(ctx, config, family, data_path, splits_path, folds);
        else if (u->parsed()) rc = cmd_tune(ctx, config, data_path, splits_path, budget, n_init, resume);
        else if (x->parsed()) rc = cmd_explain(ctx, config, ckpt_path, data_path, splits_path, repeats);
        if (rc == 0) ctx.finish();
        return rc;
    } catch (const train_error& err) {
        std::cerr << "training/optimization failure: " << err.what() << "\n";
        return 3;
    } catch (const error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
}
