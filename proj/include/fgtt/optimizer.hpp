#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fgtt/errors.hpp"
#include "fgtt/tensor.hpp"

namespace fgtt::train {

enum class OptimizerKind { SGD, Adam, RMSProp };

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "SGD") return OptimizerKind::SGD;
    if (s == "Adam") return OptimizerKind::Adam;
    if (s == "RMSProp") return OptimizerKind::RMSProp;
    throw config_error("unknown optimizer: " + s);
}

inline std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::SGD: return "SGD";
        case OptimizerKind::Adam: return "Adam";
        default: return "RMSProp";
    }
}

// Adam: beta1 0.9, beta2 0.999, eps 1e-8 (bias-corrected);
// RMSProp: decay 0.9, eps 1e-8. Constants fixed for reproducibility.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
        if (!(lr > 0.0)) throw config_error("optimizer: learning rate must be positive");
    }

    void step(std::vector<ad::Tensor>& params) {
        if (state_m_.empty()) {
            state_m_.resize(params.size());
            state_v_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                state_m_[i].assign(params[i].size(), 0.0);
                state_v_[i].assign(params[i].size(), 0.0);
            }
        }
        if (state_m_.size() != params.size())
            throw contract_error("optimizer: parameter list changed between steps");
        ++t_;
        for (std::size_t i = 0; i < params.size(); ++i) {
            ad::Tensor& p = params[i];
            if (!p.has_grad()) continue;
            double* pv = p.data();
            const double* g = p.grad().data();
            switch (kind_) {
                case OptimizerKind::SGD:
                    for (std::size_t j = 0; j < p.size(); ++j) pv[j] -= lr_ * g[j];
                    break;
                case OptimizerKind::Adam: {
                    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
                    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
                    auto& m = state_m_[i];
                    auto& v = state_v_[i];
                    for (std::size_t j = 0; j < p.size(); ++j) {
                        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                        pv[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
                    }
                    break;
                }
                case OptimizerKind::RMSProp: {
                    const double decay = 0.9, eps = 1e-8;
                    auto& v = state_v_[i];
                    for (std::size_t j = 0; j < p.size(); ++j) {
                        v[j] = decay * v[j] + (1.0 - decay) * g[j] * g[j];
                        pv[j] -= lr_ * g[j] / (std::sqrt(v[j]) + eps);
                    }
                    break;
                }
            }
        }
    }

    OptimizerKind kind() const { return kind_; }
    double lr() const { return lr_; }

private:
    OptimizerKind kind_;
    double lr_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> state_m_, state_v_;
};

inline void zero_grads(std::vector<ad::Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace fgtt::train
