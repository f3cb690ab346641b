#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "fgtt/errors.hpp"

namespace fgtt::hpo {

// Gaussian-process surrogate: Matern-5/2 kernel on encoded points, unit signal
// variance on standardized objectives; length-scale and observation noise are
// picked from a fixed small grid by log marginal likelihood.
struct GpModel {
    std::vector<std::vector<double>> X;
    std::vector<double> alpha;  // K^{-1} y (standardized)
    std::vector<double> chol;   // lower-triangular factor, row-major n x n
    double y_mean = 0.0, y_sd = 1.0;
    double length_scale = 0.5, noise = 1e-4;
    std::size_t n = 0;

    double kernel(const std::vector<double>& a, const std::vector<double>& b) const {
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            d2 += d * d;
        }
        const double r = std::sqrt(d2) / length_scale;
        const double s = 2.2360679774997896 * r;  // sqrt(5) r
        return (1.0 + s + 5.0 * d2 / (3.0 * length_scale * length_scale)) * std::exp(-s);
    }

    // posterior mean and variance of the latent function (unstandardized)
    std::pair<double, double> predict(const std::vector<double>& x) const {
        std::vector<double> ks(n);
        for (std::size_t i = 0; i < n; ++i) ks[i] = kernel(x, X[i]);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += ks[i] * alpha[i];
        // v = L^{-1} k*
        std::vector<double> v(ks);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) v[i] -= chol[i * n + j] * v[j];
            v[i] /= chol[i * n + i];
        }
        double var = 1.0;
        for (std::size_t i = 0; i < n; ++i) var -= v[i] * v[i];
        var = std::max(var, 0.0);
        return {y_mean + y_sd * mean, y_sd * y_sd * var};
    }
};

namespace detail {

// in-place Cholesky; false when the matrix is not positive definite
inline bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (!(s > 0.0)) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
}

struct FitCandidate {
    bool ok = false;
    double logml = -1e300;
    std::vector<double> chol, alpha;
};

inline FitCandidate try_fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                            double length_scale, double noise) {
    const std::size_t n = X.size();
    GpModel probe;
    probe.length_scale = length_scale;
    FitCandidate out;
    std::vector<double> K(n * n);
    double jitter = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double k = probe.kernel(X[i], X[j]);
                K[i * n + j] = k;
                K[j * n + i] = k;
            }
        for (std::size_t i = 0; i < n; ++i) K[i * n + i] += noise + jitter;
        std::vector<double> L = K;
        if (cholesky(L, n)) {
            // alpha = K^{-1} y via two triangular solves
            std::vector<double> a(y);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < i; ++j) a[i] -= L[i * n + j] * a[j];
                a[i] /= L[i * n + i];
            }
            for (std::size_t ii = n; ii-- > 0;) {
                for (std::size_t j = ii + 1; j < n; ++j) a[ii] -= L[j * n + ii] * a[j];
                a[ii] /= L[ii * n + ii];
            }
            double logml = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                logml += -0.5 * y[i] * a[i] - std::log(L[i * n + i]);
            logml -= 0.5 * static_cast<double>(n) * 1.8378770664093453;  // log(2 pi)
            out.ok = true;
            out.logml = logml;
            out.chol = std::move(L);
            out.alpha = std::move(a);
            return out;
        }
        jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
        if (jitter > 1e-4) break;
    }
    return out;
}

}  // namespace detail

inline GpModel gp_fit_encoded(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    if (X.size() < 2 || X.size() != y.size())
        throw contract_error("gp_fit: need at least 2 completed trials");
    GpModel m;
    m.X = X;
    m.n = X.size();
    double sum = 0.0;
    for (double v : y) sum += v;
    m.y_mean = sum / static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - m.y_mean) * (v - m.y_mean);
    m.y_sd = std::sqrt(ss / static_cast<double>(y.size()));
    if (!(m.y_sd > 0.0)) m.y_sd = 1.0;
    std::vector<double> ys(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ys[i] = (y[i] - m.y_mean) / m.y_sd;

    static const double ls_grid[] = {0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
    static const double noise_grid[] = {1e-6, 1e-4, 1e-3, 1e-2, 1e-1};
    bool any = false;
    double best = -1e300;
    for (double ls : ls_grid) {
        for (double nz : noise_grid) {
            auto cand = detail::try_fit(X, ys, ls, nz);
            if (cand.ok && cand.logml > best) {
                best = cand.logml;
                m.length_scale = ls;
                m.noise = nz;
                m.chol = std::move(cand.chol);
                m.alpha = std::move(cand.alpha);
                any = true;
            }
        }
    }
    if (!any) throw train_error("gp surrogate: kernel matrix degenerate beyond 1e-4 jitter");
    return m;
}

}  // namespace fgtt::hpo
