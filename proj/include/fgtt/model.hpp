#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fgtt/encode.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/partition.hpp"
#include "fgtt/rng.hpp"
#include "fgtt/schema.hpp"
#include "fgtt/tensor.hpp"

namespace fgtt::nn {

struct FGTTConfig {
    std::size_t hidden_dim = 64;
    std::size_t ffn_dim = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 3;
    double dropout_rate = 0.2;
    std::size_t projector_hidden = 0;  // 0 = hidden_dim

    std::size_t projector_width() const { return projector_hidden ? projector_hidden : hidden_dim; }

    void validate() const {
        if (hidden_dim == 0 || ffn_dim == 0 || n_heads == 0)
            throw config_error("fgtt config: dimensions must be positive");
        if (hidden_dim % n_heads != 0)
            throw config_error("fgtt config: hidden_dim " + std::to_string(hidden_dim) +
                               " not divisible by n_heads " + std::to_string(n_heads));
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw config_error("fgtt config: dropout_rate must be in [0,1)");
    }
};

struct Linear {
    ad::Tensor w;  // [in, out]
    ad::Tensor b;  // [out]
};

struct EncoderLayer {
    Linear q, k, v, o;
    ad::Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    Linear f1, f2;
};

// Last-layer attention weights per example plus the derived aggregates.
struct AttentionRecord {
    std::size_t n_heads = 0;
    std::size_t n_tokens = 0;  // G+1, CLS at position 0
    std::vector<std::vector<double>> per_example;  // each heads*T*T, row-major [head][query][key]

    double at(std::size_t example, std::size_t head, std::size_t qi, std::size_t ki) const {
        return per_example[example][(head * n_tokens + qi) * n_tokens + ki];
    }

    // head-averaged CLS row over the G groups, CLS self-attention excluded and
    // the remainder renormalized
    std::vector<double> cls_scores(std::size_t example) const {
        std::vector<double> row(n_tokens, 0.0);
        for (std::size_t h = 0; h < n_heads; ++h)
            for (std::size_t j = 0; j < n_tokens; ++j) row[j] += at(example, h, 0, j);
        double rest = 0.0;
        for (std::size_t j = 1; j < n_tokens; ++j) rest += row[j];
        std::vector<double> out(n_tokens - 1, 0.0);
        if (rest > 0.0)
            for (std::size_t j = 1; j < n_tokens; ++j) out[j - 1] = row[j] / rest;
        return out;
    }

    // head-averaged full (G+1)x(G+1) matrix
    std::vector<double> pair_matrix(std::size_t example) const {
        std::vector<double> m(n_tokens * n_tokens, 0.0);
        for (std::size_t h = 0; h < n_heads; ++h)
            for (std::size_t i = 0; i < n_tokens * n_tokens; ++i)
                m[i] += per_example[example][h * n_tokens * n_tokens + i] /
                        static_cast<double>(n_heads);
        return m;
    }

    void append(const AttentionRecord& other) {
        if (per_example.empty()) {
            n_heads = other.n_heads;
            n_tokens = other.n_tokens;
        }
        per_example.insert(per_example.end(), other.per_example.begin(), other.per_example.end());
    }
};

struct FGTTModel {
    FGTTConfig config;
    GroupPartition partition;
    ad::Tensor cls;                                 // [hidden]
    std::vector<std::pair<Linear, Linear>> projectors;  // per group: width -> proj_hidden -> hidden
    std::vector<EncoderLayer> layers;
    Linear head1, head2;  // hidden -> ffn -> n_classes
    std::size_t n_classes = 3;

    std::vector<ad::Tensor> parameters() const {
        std::vector<ad::Tensor> ps{cls};
        for (const auto& [a, b] : projectors) {
            ps.push_back(a.w);
            ps.push_back(a.b);
            ps.push_back(b.w);
            ps.push_back(b.b);
        }
        for (const auto& l : layers) {
            for (const Linear* lin : {&l.q, &l.k, &l.v, &l.o, &l.f1, &l.f2}) {
                ps.push_back(lin->w);
                ps.push_back(lin->b);
            }
            ps.push_back(l.ln1_g);
            ps.push_back(l.ln1_b);
            ps.push_back(l.ln2_g);
            ps.push_back(l.ln2_b);
        }
        for (const Linear* lin : {&head1, &head2}) {
            ps.push_back(lin->w);
            ps.push_back(lin->b);
        }
        return ps;
    }
};

namespace detail {

inline Linear init_linear(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-limit, limit);
    return Linear{ad::Tensor({fan_in, fan_out}, std::move(w), true),
                  ad::Tensor::zeros({fan_out}, true)};
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace detail

inline FGTTModel init_model(const FGTTConfig& config, const GroupPartition& partition,
                            std::uint64_t seed, std::size_t n_classes = 3) {
    config.validate();
    FGTTModel m;
    m.config = config;
    m.partition = partition;
    m.n_classes = n_classes;
    Rng rng(seed);
    const std::size_t H = config.hidden_dim, P = config.projector_width();
    m.cls = ad::Tensor::zeros({H}, true);
    for (const auto& cols : partition.columns) {
        Linear a = detail::init_linear(cols.size(), P, rng);
        Linear b = detail::init_linear(P, H, rng);
        m.projectors.emplace_back(std::move(a), std::move(b));
    }
    for (std::size_t li = 0; li < config.n_layers; ++li) {
        EncoderLayer l;
        l.q = detail::init_linear(H, H, rng);
        l.k = detail::init_linear(H, H, rng);
        l.v = detail::init_linear(H, H, rng);
        l.o = detail::init_linear(H, H, rng);
        l.f1 = detail::init_linear(H, config.ffn_dim, rng);
        l.f2 = detail::init_linear(config.ffn_dim, H, rng);
        l.ln1_g = ad::Tensor({H}, std::vector<double>(H, 1.0), true);
        l.ln1_b = ad::Tensor::zeros({H}, true);
        l.ln2_g = ad::Tensor({H}, std::vector<double>(H, 1.0), true);
        l.ln2_b = ad::Tensor::zeros({H}, true);
        m.layers.push_back(std::move(l));
    }
    m.head1 = detail::init_linear(H, config.ffn_dim, rng);
    m.head2 = detail::init_linear(config.ffn_dim, n_classes, rng);
    return m;
}

inline ad::Tensor linear(ad::Tape& tape, const ad::Tensor& x, const Linear& l) {
    return ad::add_bias(tape, ad::matmul(tape, x, l.w), l.b);
}

// token 0 is the CLS token; token g is projector_g applied to group g's columns
inline ad::Tensor project_tokens(ad::Tape& tape, const ad::Tensor& x, const FGTTModel& m) {
    if (x.rank() != 2 || x.dim(1) != m.partition.total_columns())
        throw shape_error("project_tokens: input " + ad::shape_str(x.shape()) + " does not match " +
                          std::to_string(m.partition.total_columns()) + " partitioned columns");
    const std::size_t B = x.dim(0);
    std::vector<ad::Tensor> toks;
    toks.push_back(ad::repeat_row(tape, m.cls, B));
    for (std::size_t g = 0; g < m.partition.n_groups(); ++g) {
        ad::Tensor xg = ad::gather_cols(tape, x, m.partition.columns[g]);
        ad::Tensor h = ad::relu(tape, linear(tape, xg, m.projectors[g].first));
        toks.push_back(linear(tape, h, m.projectors[g].second));
    }
    return ad::stack_tokens(tape, toks);
}

struct AttentionOut {
    ad::Tensor values;                    // [B,T,H] after the output mix
    std::vector<ad::Tensor> head_weights;  // per head [B,T,T]
};

// scaled dot-product attention over pre-projected Q/K/V, heads concatenated
// then linearly mixed
inline AttentionOut attention(ad::Tape& tape, const ad::Tensor& q, const ad::Tensor& k,
                              const ad::Tensor& v, std::size_t n_heads, const Linear& out_proj) {
    const std::size_t width = q.shape().back();
    if (width % n_heads != 0)
        throw config_error("attention: width " + std::to_string(width) + " not divisible by " +
                           std::to_string(n_heads) + " heads");
    const std::size_t dk = width / n_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<ad::Tensor> ctx, weights;
    for (std::size_t h = 0; h < n_heads; ++h) {
        ad::Tensor qh = ad::slice_last(tape, q, h * dk, dk);
        ad::Tensor kh = ad::slice_last(tape, k, h * dk, dk);
        ad::Tensor vh = ad::slice_last(tape, v, h * dk, dk);
        ad::Tensor scores = ad::scale(tape, ad::matmul_nt(tape, qh, kh), inv_sqrt_dk);
        ad::Tensor w = ad::softmax_rows(tape, scores);
        weights.push_back(w);
        ctx.push_back(ad::matmul(tape, w, vh));
    }
    ad::Tensor mixed = linear(tape, ad::concat_last(tape, ctx), out_proj);
    return AttentionOut{std::move(mixed), std::move(weights)};
}

namespace detail {

inline void capture_attention(const std::vector<ad::Tensor>& head_weights, AttentionRecord& rec) {
    const std::size_t B = head_weights[0].dim(0), T = head_weights[0].dim(1);
    rec.n_heads = head_weights.size();
    rec.n_tokens = T;
    rec.per_example.assign(B, std::vector<double>(rec.n_heads * T * T, 0.0));
    for (std::size_t h = 0; h < rec.n_heads; ++h) {
        const double* w = head_weights[h].data();
        for (std::size_t b = 0; b < B; ++b)
            std::copy_n(w + b * T * T, T * T, rec.per_example[b].begin() + h * T * T);
    }
}

}  // namespace detail

// post-norm encoder: x = LN(x + drop(attn)), then x = LN(x + drop(ffn));
// the record captures the final layer's weights
inline ad::Tensor encoder_forward(ad::Tape& tape, const ad::Tensor& tokens, const FGTTModel& m,
                                  bool training, Rng& rng, AttentionRecord* rec = nullptr) {
    if (tokens.rank() != 3 || tokens.shape().back() != m.config.hidden_dim)
        throw shape_error("encoder_forward: tokens " + ad::shape_str(tokens.shape()) +
                          " do not match hidden_dim " + std::to_string(m.config.hidden_dim));
    ad::Tensor x = tokens;
    const double rate = m.config.dropout_rate;
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const EncoderLayer& l = m.layers[li];
        AttentionOut at = attention(tape, linear(tape, x, l.q), linear(tape, x, l.k),
                                    linear(tape, x, l.v), m.config.n_heads, l.o);
        if (rec && li + 1 == m.layers.size()) detail::capture_attention(at.head_weights, *rec);
        ad::Tensor a = ad::dropout(tape, at.values, rate, training, rng);
        x = ad::affine_last(tape, ad::layer_norm(tape, ad::add(tape, x, a), detail::kLayerNormEps),
                            l.ln1_g, l.ln1_b);
        ad::Tensor h = ad::relu(tape, linear(tape, x, l.f1));
        ad::Tensor f = ad::dropout(tape, linear(tape, h, l.f2), rate, training, rng);
        x = ad::affine_last(tape, ad::layer_norm(tape, ad::add(tape, x, f), detail::kLayerNormEps),
                            l.ln2_g, l.ln2_b);
    }
    if (rec && m.layers.empty()) {
        rec->n_heads = m.config.n_heads;
        rec->n_tokens = tokens.dim(1);
        rec->per_example.assign(tokens.dim(0), std::vector<double>(m.config.n_heads * rec->n_tokens *
                                                                   rec->n_tokens, 0.0));
    }
    return x;
}

// full forward to class probabilities; the classifier reads the encoded CLS token
inline ad::Tensor forward_probs(ad::Tape& tape, const ad::Tensor& x, const FGTTModel& m,
                                bool training, Rng& rng, AttentionRecord* rec = nullptr) {
    ad::Tensor tokens = project_tokens(tape, x, m);
    ad::Tensor enc = encoder_forward(tape, tokens, m, training, rng, rec);
    ad::Tensor cls = ad::token_at(tape, enc, 0);
    ad::Tensor h = ad::relu(tape, linear(tape, cls, m.head1));
    h = ad::dropout(tape, h, m.config.dropout_rate, training, rng);
    ad::Tensor logits = linear(tape, h, m.head2);
    return ad::softmax_rows(tape, logits);
}

inline ad::Tensor batch_tensor(const data::EncodedMatrix& X, const std::vector<std::size_t>& rows) {
    std::vector<double> v(rows.size() * X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(X.values.begin() + static_cast<std::ptrdiff_t>(rows[i] * X.cols()), X.cols(),
                    v.begin() + static_cast<std::ptrdiff_t>(i * X.cols()));
    return ad::Tensor({rows.size(), X.cols()}, std::move(v));
}

struct PredictResult {
    std::vector<double> probs;  // rows x n_classes
    std::vector<int> classes;
    AttentionRecord attention;
};

inline PredictResult predict(const FGTTModel& m, const data::EncodedMatrix& X,
                             std::size_t batch_size = 256) {
    PredictResult out;
    out.probs.reserve(X.rows * m.n_classes);
    Rng rng(0);  // eval mode; dropout is off
    for (std::size_t start = 0; start < X.rows; start += batch_size) {
        std::vector<std::size_t> rows;
        for (std::size_t r = start; r < std::min(X.rows, start + batch_size); ++r) rows.push_back(r);
        ad::Tape tape;
        AttentionRecord rec;
        ad::Tensor probs = forward_probs(tape, batch_tensor(X, rows), m, false, rng, &rec);
        out.probs.insert(out.probs.end(), probs.values().begin(), probs.values().end());
        out.attention.append(rec);
    }
    for (std::size_t r = 0; r < X.rows; ++r)
        out.classes.push_back(train::argmax_class(out.probs.data() + r * m.n_classes, m.n_classes));
    return out;
}

struct ClassAttention {
    std::vector<double> cls_scores;    // per group
    std::vector<double> pair_heatmap;  // (G+1)^2 head- and example-averaged
    std::size_t n_examples = 0;
};

// aggregates over the examples whose (true) class matches cls
inline ClassAttention aggregate_attention(const AttentionRecord& rec, const std::vector<int>& labels,
                                          int cls) {
    if (labels.size() != rec.per_example.size())
        throw contract_error("aggregate_attention: label count does not match attention records");
    const std::size_t T = rec.n_tokens;
    ClassAttention out;
    out.cls_scores.assign(T - 1, 0.0);
    out.pair_heatmap.assign(T * T, 0.0);
    for (std::size_t e = 0; e < labels.size(); ++e) {
        if (labels[e] != cls) continue;
        auto scores = rec.cls_scores(e);
        auto pairs = rec.pair_matrix(e);
        for (std::size_t j = 0; j < scores.size(); ++j) out.cls_scores[j] += scores[j];
        for (std::size_t j = 0; j < pairs.size(); ++j) out.pair_heatmap[j] += pairs[j];
        ++out.n_examples;
    }
    if (out.n_examples == 0)
        throw data_error("aggregate_attention: no examples with class " + std::to_string(cls));
    for (auto& v : out.cls_scores) v /= static_cast<double>(out.n_examples);
    for (auto& v : out.pair_heatmap) v /= static_cast<double>(out.n_examples);
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint: self-describing JSON with config, schema fingerprint, partition,
// normalization stats and all parameter arrays
// ---------------------------------------------------------------------------

inline nlohmann::json checkpoint_json(const FGTTModel& m, const data::FeatureSchema& schema,
                                      const data::NormalizationStats& stats) {
    nlohmann::json j;
    j["format"] = "fgtt-checkpoint-v1";
    j["schema_fingerprint"] = schema.fingerprint();
    j["n_classes"] = m.n_classes;
    j["config"] = {{"hidden_dim", m.config.hidden_dim},   {"ffn_dim", m.config.ffn_dim},
                   {"n_heads", m.config.n_heads},         {"n_layers", m.config.n_layers},
                   {"dropout_rate", m.config.dropout_rate},
                   {"projector_hidden", m.config.projector_hidden}};
    j["partition"] = nlohmann::json::array();
    for (std::size_t g = 0; g < m.partition.n_groups(); ++g)
        j["partition"].push_back({{"group", m.partition.names[g]}, {"columns", m.partition.columns[g]}});
    j["stats"] = {{"names", stats.names}, {"mean", stats.mean}, {"sd", stats.sd}};
    auto dump = [](const ad::Tensor& t) {
        return nlohmann::json{{"shape", t.shape()}, {"values", t.values()}};
    };
    j["params"] = nlohmann::json::array();
    for (const auto& p : m.parameters()) j["params"].push_back(dump(p));
    return j;
}

inline void save_checkpoint(const std::string& path, const FGTTModel& m,
                            const data::FeatureSchema& schema, const data::NormalizationStats& stats) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write checkpoint: " + path);
    out << checkpoint_json(m, schema, stats).dump(1) << '\n';
}

struct LoadedCheckpoint {
    FGTTModel model;
    data::NormalizationStats stats;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path, const data::FeatureSchema& schema) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != std::string("fgtt-checkpoint-v1"))
        throw data_error("not an fgtt checkpoint: " + path);
    if (j.at("schema_fingerprint").get<std::string>() != schema.fingerprint())
        throw data_error("checkpoint schema fingerprint mismatch: " + path);

    FGTTConfig cfg;
    cfg.hidden_dim = j["config"]["hidden_dim"].get<std::size_t>();
    cfg.ffn_dim = j["config"]["ffn_dim"].get<std::size_t>();
    cfg.n_heads = j["config"]["n_heads"].get<std::size_t>();
    cfg.n_layers = j["config"]["n_layers"].get<std::size_t>();
    cfg.dropout_rate = j["config"]["dropout_rate"].get<double>();
    cfg.projector_hidden = j["config"]["projector_hidden"].get<std::size_t>();

    GroupPartition part;
    for (const auto& jg : j.at("partition")) {
        part.names.push_back(jg.at("group").get<std::string>());
        part.columns.push_back(jg.at("columns").get<std::vector<std::size_t>>());
    }

    LoadedCheckpoint out{init_model(cfg, part, 0, j.at("n_classes").get<std::size_t>()), {}};
    out.stats.names = j["stats"]["names"].get<std::vector<std::string>>();
    out.stats.mean = j["stats"]["mean"].get<std::vector<double>>();
    out.stats.sd = j["stats"]["sd"].get<std::vector<double>>();

    auto params = out.model.parameters();
    const auto& jp = j.at("params");
    if (jp.size() != params.size()) throw data_error("checkpoint parameter count mismatch: " + path);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto shape = jp[i].at("shape").get<std::vector<std::size_t>>();
        if (shape != params[i].shape())
            throw data_error("checkpoint parameter shape mismatch at index " + std::to_string(i));
        params[i].values() = jp[i].at("values").get<std::vector<double>>();
        if (params[i].values().size() != ad::shape_numel(shape))
            throw data_error("checkpoint parameter size mismatch at index " + std::to_string(i));
    }
    return out;
}

}  // namespace fgtt::nn
