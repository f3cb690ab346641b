#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fgtt/csv.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/loss.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/model.hpp"
#include "fgtt/optimizer.hpp"

namespace fgtt::train {

struct TrainConfig {
    double learning_rate = 0.017;
    OptimizerKind optimizer = OptimizerKind::SGD;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;  // epochs without validation improvement before stopping
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw config_error("train: learning rate must be positive");
        if (batch_size == 0 || max_epochs == 0) throw config_error("train: batch/epochs must be positive");
    }
};

struct EpochStats {
    std::size_t epoch;
    double train_loss;
    double val_loss;
    double val_weighted_f1;
};

struct TrainResult {
    std::vector<EpochStats> history;
    double best_val_f1 = 0.0;
    std::size_t best_epoch = 0;
};

namespace detail {

inline double eval_loss(const nn::FGTTModel& model, const data::EncodedMatrix& X,
                        const std::vector<int>& y, const FocalLossParams& loss_params) {
    Rng rng(0);
    double total = 0.0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < X.rows; start += chunk) {
        std::vector<std::size_t> rows;
        for (std::size_t r = start; r < std::min(X.rows, start + chunk); ++r) rows.push_back(r);
        ad::Tape tape;
        ad::Tensor probs = nn::forward_probs(tape, nn::batch_tensor(X, rows), model, false, rng);
        std::vector<int> yb;
        for (std::size_t r : rows) yb.push_back(y[r]);
        total += focal_loss(tape, probs, yb, loss_params).item() * static_cast<double>(rows.size());
    }
    return total / static_cast<double>(X.rows);
}

}  // namespace detail

// Seeded mini-batch loop with early stopping on validation weighted F1; the
// best-so-far parameters are restored before returning.
inline TrainResult train(nn::FGTTModel& model, const data::EncodedMatrix& Xtr,
                         const std::vector<int>& ytr, const data::EncodedMatrix& Xval,
                         const std::vector<int>& yval, const FocalLossParams& loss_params,
                         const TrainConfig& config) {
    config.validate();
    loss_params.validate();
    if (Xtr.rows == 0 || Xval.rows == 0) throw contract_error("train: empty split");
    if (ytr.size() != Xtr.rows || yval.size() != Xval.rows)
        throw contract_error("train: label/row count mismatch");

    auto params = model.parameters();
    Optimizer opt(config.optimizer, config.learning_rate);
    Rng master(config.seed);
    Rng shuffle_rng = master.substream(1);
    Rng dropout_rng = master.substream(2);

    TrainResult res;
    std::vector<std::vector<double>> best_params;
    for (const auto& p : params) best_params.push_back(p.values());
    double best_f1 = -1.0;
    std::size_t best_epoch = 0, since_best = 0;

    std::vector<std::size_t> order(Xtr.rows);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(
                                              order.size(), start + config.batch_size)));
            std::vector<int> yb;
            for (std::size_t r : rows) yb.push_back(ytr[r]);
            ad::Tape tape;
            ad::Tensor probs = nn::forward_probs(tape, nn::batch_tensor(Xtr, rows), model, true,
                                                 dropout_rng);
            ad::Tensor loss = focal_loss(tape, probs, yb, loss_params);
            if (!std::isfinite(loss.item()))
                throw train_error("non-finite training loss at epoch " + std::to_string(epoch));
            zero_grads(params);
            ad::backward(tape, loss);
            opt.step(params);
            epoch_loss += loss.item() * static_cast<double>(rows.size());
            seen += rows.size();
        }
        epoch_loss /= static_cast<double>(seen);

        auto pred = nn::predict(model, Xval);
        const Metrics m = compute_metrics(pred.classes, yval, model.n_classes);
        const double val_loss = detail::eval_loss(model, Xval, yval, loss_params);
        res.history.push_back(EpochStats{epoch, epoch_loss, val_loss, m.weighted_f1});

        if (m.weighted_f1 > best_f1) {
            best_f1 = m.weighted_f1;
            best_epoch = epoch;
            since_best = 0;
            for (std::size_t i = 0; i < params.size(); ++i) best_params[i] = params[i].values();
        } else {
            ++since_best;
            if (since_best > config.patience) break;
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i].values() = best_params[i];
    res.best_val_f1 = best_f1;
    res.best_epoch = best_epoch;
    return res;
}

inline void save_history_stream(std::ostream& out, const std::vector<EpochStats>& history) {
    csv::write_row(out, {"epoch", "train_loss", "val_loss", "val_weighted_f1"});
    for (const auto& e : history)
        csv::write_row(out, {std::to_string(e.epoch), csv::num(e.train_loss), csv::num(e.val_loss),
                             csv::num(e.val_weighted_f1)});
}

inline void save_history(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    save_history_stream(out, history);
}

}  // namespace fgtt::train
