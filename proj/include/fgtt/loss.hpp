#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "fgtt/errors.hpp"
#include "fgtt/tensor.hpp"

namespace fgtt::train {

struct FocalLossParams {
    double gamma = 2.0;
    std::array<double, 3> alpha{1.0, 1.0, 1.0};

    void validate() const {
        if (!(gamma >= 0.0)) throw config_error("focal loss: gamma must be >= 0");
        for (double a : alpha)
            if (!(a > 0.0)) throw config_error("focal loss: alpha weights must be positive");
    }
};

// inverse class frequency, normalized to mean 1; gamma=0 with uniform alpha is
// plain cross-entropy
inline std::array<double, 3> inverse_frequency_alpha(const std::vector<int>& labels) {
    std::array<double, 3> counts{0, 0, 0};
    for (int l : labels) {
        if (l < 0 || l > 2) throw contract_error("inverse_frequency_alpha: class id out of range");
        counts[static_cast<std::size_t>(l)] += 1.0;
    }
    std::array<double, 3> alpha{};
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        alpha[c] = counts[c] > 0.0 ? static_cast<double>(labels.size()) / (3.0 * counts[c]) : 1.0;
        sum += alpha[c];
    }
    for (auto& a : alpha) a *= 3.0 / sum;
    return alpha;
}

// mean over the batch of -alpha_c (1-p_c)^gamma log(p_c), p_c clamped to >= 1e-12
inline ad::Tensor focal_loss(ad::Tape& tape, const ad::Tensor& probs, const std::vector<int>& targets,
                             const FocalLossParams& params) {
    params.validate();
    if (probs.rank() != 2 || probs.dim(1) != 3)
        throw shape_error("focal_loss: probs must be [batch x 3], got " + ad::shape_str(probs.shape()));
    const std::size_t B = probs.dim(0), C = 3;
    if (targets.size() != B)
        throw contract_error("focal_loss: target count " + std::to_string(targets.size()) +
                             " does not match batch " + std::to_string(B));
    for (int t : targets)
        if (t < 0 || static_cast<std::size_t>(t) >= C)
            throw contract_error("focal_loss: invalid target class id " + std::to_string(t));

    constexpr double kClamp = 1e-12;
    const double gamma = params.gamma;
    const auto alpha = params.alpha;
    double acc = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const std::size_t c = static_cast<std::size_t>(targets[i]);
        double p = std::min(std::max(probs.data()[i * C + c], kClamp), 1.0);
        acc += -alpha[c] * std::pow(1.0 - p, gamma) * std::log(p);
    }
    ad::Tensor out = ad::Tensor::scalar(acc / static_cast<double>(B));

    if (probs.requires_grad()) {
        out.set_requires_grad(true);
        auto tgt = std::make_shared<std::vector<int>>(targets);
        tape.push("focal_loss", [probs, out, tgt, gamma, alpha, B, C]() {
            if (!out.has_grad()) return;
            const double d = out.grad()[0] / static_cast<double>(B);
            double* dp = probs.grad().data();
            for (std::size_t i = 0; i < B; ++i) {
                const std::size_t c = static_cast<std::size_t>((*tgt)[i]);
                const double p = probs.data()[i * C + c];
                if (p < kClamp || p >= 1.0) continue;  // flat beyond the clamp
                const double q = 1.0 - p;
                double grad = -alpha[c] * std::pow(q, gamma) / p;
                if (gamma > 0.0) grad += alpha[c] * gamma * std::pow(q, gamma - 1.0) * std::log(p);
                dp[i * C + c] += d * grad;
            }
        });
    }
    return out;
}

}  // namespace fgtt::train
