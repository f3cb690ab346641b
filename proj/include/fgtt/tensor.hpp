#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fgtt/errors.hpp"
#include "fgtt/rng.hpp"

namespace fgtt::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

struct TensorData {
    Shape shape;
    std::vector<double> v;
    std::vector<double> g;  // empty until backward touches it
    bool requires_grad = false;
};

// Value-semantic handle to shared storage. Forward values are immutable by
// convention once produced by an op; only gradients accumulate.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false) {
        if (shape.empty()) throw shape_error("tensor shape must have at least one dimension");
        for (auto d : shape)
            if (d == 0) throw shape_error("tensor dimensions must be positive, got " + shape_str(shape));
        if (shape_numel(shape) != values.size())
            throw shape_error("values length " + std::to_string(values.size()) +
                              " does not match shape " + shape_str(shape));
        d_ = std::make_shared<TensorData>();
        d_->shape = std::move(shape);
        d_->v = std::move(values);
        d_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor scalar(double x) { return Tensor({1}, {x}); }

    // Tensor is a shared handle: const applies to the handle, not the storage.
    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    std::size_t rank() const { return d_->shape.size(); }
    std::size_t size() const { return d_->v.size(); }
    std::size_t dim(std::size_t i) const { return d_->shape[i]; }

    std::vector<double>& values() const { return d_->v; }
    double* data() const { return d_->v.data(); }

    double item() const {
        if (size() != 1) throw contract_error("item() on non-scalar tensor " + shape_str(shape()));
        return d_->v[0];
    }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool b) const { d_->requires_grad = b; }

    bool has_grad() const { return !d_->g.empty(); }
    std::vector<double>& grad() const {
        if (d_->g.empty()) d_->g.assign(d_->v.size(), 0.0);
        return d_->g;
    }
    void zero_grad() const { d_->g.assign(d_->v.size(), 0.0); }

    std::shared_ptr<TensorData> d_;
};

// Ordered record of ops; construction order is a topological order, so a
// single reverse sweep propagates gradients.
class Tape {
public:
    struct Node {
        const char* op;
        std::function<void()> back;
    };

    void push(const char* op, std::function<void()> back) {
        nodes_.push_back(Node{op, std::move(back)});
    }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    void clear() { nodes_.clear(); }

private:
    std::vector<Node> nodes_;
};

namespace detail {

inline bool any_grad(std::initializer_list<const Tensor*> ins) {
    for (auto* t : ins)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

// out_g may be empty when the node did not influence the loss
inline const std::vector<double>* out_grad(const Tensor& out) {
    return out.d_->g.empty() ? nullptr : &out.d_->g;
}

// C[m,n] += A[m,k] B[k,n]
inline void mm_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            const double* bt = b + t * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

// C[m,n] += A[m,k] B[n,k]^T
inline void mm_nt_acc(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
            ci[j] += acc;
        }
    }
}

// C[k,n] += A[m,k]^T B[m,n]
inline void mm_tn_acc(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            if (av == 0.0) continue;
            double* ct = c + t * n;
            for (std::size_t j = 0; j < n; ++j) ct[j] += av * bi[j];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul: [m,k]x[k,n], [b,m,k]x[b,k,n], or [b,m,k]x[k,n] (shared right-hand side)
// ---------------------------------------------------------------------------
inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    auto bad = [&]() {
        throw shape_error("matmul shape mismatch: " + shape_str(sa) + " x " + shape_str(sb));
    };
    std::size_t batch = 1, m, k, n;
    bool batched_a = false, batched_b = false;
    if (sa.size() == 2 && sb.size() == 2) {
        m = sa[0]; k = sa[1]; n = sb[1];
        if (sb[0] != k) bad();
    } else if (sa.size() == 3 && sb.size() == 3) {
        batch = sa[0]; m = sa[1]; k = sa[2]; n = sb[2];
        if (sb[0] != batch || sb[1] != k) bad();
        batched_a = batched_b = true;
    } else if (sa.size() == 3 && sb.size() == 2) {
        batch = sa[0]; m = sa[1]; k = sa[2]; n = sb[1];
        if (sb[0] != k) bad();
        batched_a = true;
    } else {
        bad();
        return Tensor();  // unreachable
    }

    Shape so = batched_a ? Shape{batch, m, n} : Shape{m, n};
    Tensor out = Tensor::zeros(std::move(so));
    const std::size_t an = m * k, bn = k * n, cn = m * n;
    if (batched_a && !batched_b) {
        // shared right operand: fold batch into rows
        detail::mm_acc(a.data(), b.data(), out.data(), batch * m, k, n);
    } else {
        for (std::size_t bi = 0; bi < batch; ++bi)
            detail::mm_acc(a.data() + bi * an, b.data() + bi * bn, out.data() + bi * cn, m, k, n);
    }

    if (detail::any_grad({&a, &b})) {
        out.set_requires_grad(true);
        tape.push("matmul", [a, b, out, batch, m, k, n, an, bn, cn, batched_b]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dc = og->data();
            if (a.requires_grad()) {
                double* da = a.grad().data();
                if (!batched_b) {
                    detail::mm_nt_acc(dc, b.data(), da, batch * m, n, k);
                } else {
                    for (std::size_t bi = 0; bi < batch; ++bi)
                        detail::mm_nt_acc(dc + bi * cn, b.data() + bi * bn, da + bi * an, m, n, k);
                }
            }
            if (b.requires_grad()) {
                double* db = b.grad().data();
                if (!batched_b) {
                    detail::mm_tn_acc(a.data(), dc, db, batch * m, k, n);
                } else {
                    for (std::size_t bi = 0; bi < batch; ++bi)
                        detail::mm_tn_acc(a.data() + bi * an, dc + bi * cn, db + bi * bn, m, k, n);
                }
            }
        });
    }
    return out;
}

// A x B^T over the last two dims: [..,m,k] x [..,n,k] -> [..,m,n]
inline Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    auto bad = [&]() {
        throw shape_error("matmul_nt shape mismatch: " + shape_str(sa) + " x " + shape_str(sb));
    };
    std::size_t batch = 1, m, k, n;
    bool batched = false;
    if (sa.size() == 2 && sb.size() == 2) {
        m = sa[0]; k = sa[1]; n = sb[0];
        if (sb[1] != k) bad();
    } else if (sa.size() == 3 && sb.size() == 3) {
        batch = sa[0]; m = sa[1]; k = sa[2]; n = sb[1];
        if (sb[0] != batch || sb[2] != k) bad();
        batched = true;
    } else {
        bad();
        return Tensor();
    }

    Tensor out = Tensor::zeros(batched ? Shape{batch, m, n} : Shape{m, n});
    const std::size_t an = m * k, bn = n * k, cn = m * n;
    for (std::size_t bi = 0; bi < batch; ++bi)
        detail::mm_nt_acc(a.data() + bi * an, b.data() + bi * bn, out.data() + bi * cn, m, k, n);

    if (detail::any_grad({&a, &b})) {
        out.set_requires_grad(true);
        tape.push("matmul_nt", [a, b, out, batch, m, k, n, an, bn, cn]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dc = og->data();
            for (std::size_t bi = 0; bi < batch; ++bi) {
                if (a.requires_grad())  // dA = dC B
                    detail::mm_acc(dc + bi * cn, b.data() + bi * bn, a.grad().data() + bi * an, m, n, k);
                if (b.requires_grad())  // dB = dC^T A
                    detail::mm_tn_acc(dc + bi * cn, a.data() + bi * an, b.grad().data() + bi * bn, m, n, k);
            }
        });
    }
    return out;
}

// softmax over the last dimension, max-subtracted for stability
inline Tensor softmax_rows(Tape& tape, const Tensor& x) {
    const std::size_t h = x.shape().back();
    const std::size_t outer = x.size() / h;
    Tensor out = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = out.data();
    for (std::size_t r = 0; r < outer; ++r) {
        const double* xr = xv + r * h;
        double* yr = yv + r * h;
        double mx = xr[0];
        for (std::size_t j = 1; j < h; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (std::size_t j = 0; j < h; ++j) yr[j] /= sum;
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("softmax_rows", [x, out, outer, h]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* y = out.data();
            const double* dy = og->data();
            for (std::size_t r = 0; r < outer; ++r) {
                const double* yr = y + r * h;
                const double* dyr = dy + r * h;
                double dot = 0.0;
                for (std::size_t j = 0; j < h; ++j) dot += yr[j] * dyr[j];
                double* dxr = dx + r * h;
                for (std::size_t j = 0; j < h; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
            }
        });
    }
    return out;
}

inline Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = out.data();
    // std::max(x, 0.0) keeps NaN, so divergence surfaces instead of clamping away
    for (std::size_t i = 0; i < x.size(); ++i) yv[i] = std::max(xv[i], 0.0);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("relu", [x, out]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* xv2 = x.data();
            const double* dy = og->data();
            for (std::size_t i = 0; i < x.size(); ++i)
                if (xv2[i] > 0.0) dx[i] += dy[i];
        });
    }
    return out;
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw shape_error("add shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (detail::any_grad({&a, &b})) {
        out.set_requires_grad(true);
        tape.push("add", [a, b, out]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dy = og->data();
            if (a.requires_grad()) {
                double* da = a.grad().data();
                for (std::size_t i = 0; i < a.size(); ++i) da[i] += dy[i];
            }
            if (b.requires_grad()) {
                double* db = b.grad().data();
                for (std::size_t i = 0; i < b.size(); ++i) db[i] += dy[i];
            }
        });
    }
    return out;
}

inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw shape_error("mul shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (detail::any_grad({&a, &b})) {
        out.set_requires_grad(true);
        tape.push("mul", [a, b, out]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dy = og->data();
            if (a.requires_grad()) {
                double* da = a.grad().data();
                for (std::size_t i = 0; i < a.size(); ++i) da[i] += dy[i] * b.data()[i];
            }
            if (b.requires_grad()) {
                double* db = b.grad().data();
                for (std::size_t i = 0; i < b.size(); ++i) db[i] += dy[i] * a.data()[i];
            }
        });
    }
    return out;
}

inline Tensor scale(Tape& tape, const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = c * x.data()[i];
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("scale", [x, out, c]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* dy = og->data();
            for (std::size_t i = 0; i < x.size(); ++i) dx[i] += c * dy[i];
        });
    }
    return out;
}

// broadcast bias over the last dimension
inline Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& b) {
    const std::size_t h = x.shape().back();
    if (b.rank() != 1 || b.dim(0) != h)
        throw shape_error("add_bias: bias " + shape_str(b.shape()) + " does not match last dim of " +
                          shape_str(x.shape()));
    const std::size_t outer = x.size() / h;
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t r = 0; r < outer; ++r)
        for (std::size_t j = 0; j < h; ++j)
            out.data()[r * h + j] = x.data()[r * h + j] + b.data()[j];
    if (detail::any_grad({&x, &b})) {
        out.set_requires_grad(true);
        tape.push("add_bias", [x, b, out, outer, h]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dy = og->data();
            if (x.requires_grad()) {
                double* dx = x.grad().data();
                for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dy[i];
            }
            if (b.requires_grad()) {
                double* db = b.grad().data();
                for (std::size_t r = 0; r < outer; ++r)
                    for (std::size_t j = 0; j < h; ++j) db[j] += dy[r * h + j];
            }
        });
    }
    return out;
}

// normalize the last dimension with population variance
inline Tensor layer_norm(Tape& tape, const Tensor& x, double eps) {
    if (!(eps > 0.0)) throw config_error("layer_norm epsilon must be > 0");
    const std::size_t h = x.shape().back();
    const std::size_t outer = x.size() / h;
    Tensor out = Tensor::zeros(x.shape());
    auto inv_std = std::make_shared<std::vector<double>>(outer);
    for (std::size_t r = 0; r < outer; ++r) {
        const double* xr = x.data() + r * h;
        double* yr = out.data() + r * h;
        double mean = 0.0;
        for (std::size_t j = 0; j < h; ++j) mean += xr[j];
        mean /= static_cast<double>(h);
        double var = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(h);
        double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (std::size_t j = 0; j < h; ++j) yr[j] = (xr[j] - mean) * inv;
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("layer_norm", [x, out, inv_std, outer, h]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* y = out.data();
            const double* dy = og->data();
            const double hn = static_cast<double>(h);
            for (std::size_t r = 0; r < outer; ++r) {
                const double* yr = y + r * h;
                const double* dyr = dy + r * h;
                double sum_dy = 0.0, sum_dyy = 0.0;
                for (std::size_t j = 0; j < h; ++j) {
                    sum_dy += dyr[j];
                    sum_dyy += dyr[j] * yr[j];
                }
                const double inv = (*inv_std)[r];
                double* dxr = dx + r * h;
                for (std::size_t j = 0; j < h; ++j)
                    dxr[j] += inv * (dyr[j] - sum_dy / hn - yr[j] * sum_dyy / hn);
            }
        });
    }
    return out;
}

// y = x*gamma + beta, gamma/beta broadcast over the last dimension
inline Tensor affine_last(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    const std::size_t h = x.shape().back();
    if (gamma.rank() != 1 || gamma.dim(0) != h || beta.rank() != 1 || beta.dim(0) != h)
        throw shape_error("affine_last: parameter shapes " + shape_str(gamma.shape()) + "/" +
                          shape_str(beta.shape()) + " do not match last dim of " + shape_str(x.shape()));
    const std::size_t outer = x.size() / h;
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t r = 0; r < outer; ++r)
        for (std::size_t j = 0; j < h; ++j)
            out.data()[r * h + j] = x.data()[r * h + j] * gamma.data()[j] + beta.data()[j];
    if (detail::any_grad({&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        tape.push("affine_last", [x, gamma, beta, out, outer, h]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dy = og->data();
            if (x.requires_grad()) {
                double* dx = x.grad().data();
                for (std::size_t r = 0; r < outer; ++r)
                    for (std::size_t j = 0; j < h; ++j)
                        dx[r * h + j] += dy[r * h + j] * gamma.data()[j];
            }
            if (gamma.requires_grad()) {
                double* dg = gamma.grad().data();
                for (std::size_t r = 0; r < outer; ++r)
                    for (std::size_t j = 0; j < h; ++j)
                        dg[j] += dy[r * h + j] * x.data()[r * h + j];
            }
            if (beta.requires_grad()) {
                double* db = beta.grad().data();
                for (std::size_t r = 0; r < outer; ++r)
                    for (std::size_t j = 0; j < h; ++j) db[j] += dy[r * h + j];
            }
        });
    }
    return out;
}

// inverted dropout: kept activations scaled by 1/(1-rate); identity in eval mode
inline Tensor dropout(Tape& tape, const Tensor& x, double rate, bool training, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw config_error("dropout rate must be in [0,1)");
    if (!training || rate == 0.0) return x;
    auto mask = std::make_shared<std::vector<double>>(x.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double m = rng.unit() < rate ? 0.0 : keep_scale;
        (*mask)[i] = m;
        out.data()[i] = x.data()[i] * m;
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("dropout", [x, out, mask]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* dy = og->data();
            for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dy[i] * (*mask)[i];
        });
    }
    return out;
}

// select columns of a 2-D tensor (group extraction; indices need not be contiguous)
inline Tensor gather_cols(Tape& tape, const Tensor& x, const std::vector<std::size_t>& cols) {
    if (x.rank() != 2) throw shape_error("gather_cols expects a 2-D tensor, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), d = x.dim(1), w = cols.size();
    for (auto c : cols)
        if (c >= d) throw shape_error("gather_cols: column " + std::to_string(c) + " out of range for " +
                                      shape_str(x.shape()));
    Tensor out = Tensor::zeros({n, w});
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.data() + r * d;
        double* yr = out.data() + r * w;
        for (std::size_t j = 0; j < w; ++j) yr[j] = xr[cols[j]];
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        auto idx = std::make_shared<std::vector<std::size_t>>(cols);
        tape.push("gather_cols", [x, out, idx, n, d, w]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* dy = og->data();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < w; ++j) dx[r * d + (*idx)[j]] += dy[r * w + j];
        });
    }
    return out;
}

// tile a vector [h] into [n,h]; gradient sums over rows
inline Tensor repeat_row(Tape& tape, const Tensor& row, std::size_t n) {
    if (row.rank() != 1) throw shape_error("repeat_row expects a 1-D tensor, got " + shape_str(row.shape()));
    const std::size_t h = row.dim(0);
    Tensor out = Tensor::zeros({n, h});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < h; ++j) out.data()[r * h + j] = row.data()[j];
    if (row.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("repeat_row", [row, out, n, h]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dr = row.grad().data();
            const double* dy = og->data();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < h; ++j) dr[j] += dy[r * h + j];
        });
    }
    return out;
}

// stack per-token [b,h] tensors into a [b,t,h] sequence
inline Tensor stack_tokens(Tape& tape, const std::vector<Tensor>& toks) {
    if (toks.empty()) throw contract_error("stack_tokens: empty token list");
    const std::size_t b = toks[0].dim(0), h = toks[0].dim(1), t = toks.size();
    for (const auto& tk : toks)
        if (tk.rank() != 2 || tk.dim(0) != b || tk.dim(1) != h)
            throw shape_error("stack_tokens: token shape " + shape_str(tk.shape()) + " does not match " +
                              shape_str(toks[0].shape()));
    Tensor out = Tensor::zeros({b, t, h});
    for (std::size_t ti = 0; ti < t; ++ti)
        for (std::size_t r = 0; r < b; ++r)
            std::copy_n(toks[ti].data() + r * h, h, out.data() + (r * t + ti) * h);
    bool wants = false;
    for (const auto& tk : toks) wants = wants || tk.requires_grad();
    if (wants) {
        out.set_requires_grad(true);
        auto saved = std::make_shared<std::vector<Tensor>>(toks);
        tape.push("stack_tokens", [saved, out, b, t, h]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dy = og->data();
            for (std::size_t ti = 0; ti < t; ++ti) {
                Tensor& tk = (*saved)[ti];
                if (!tk.requires_grad()) continue;
                double* dt = tk.grad().data();
                for (std::size_t r = 0; r < b; ++r)
                    for (std::size_t j = 0; j < h; ++j) dt[r * h + j] += dy[(r * t + ti) * h + j];
            }
        });
    }
    return out;
}

// extract token ti from [b,t,h] -> [b,h]
inline Tensor token_at(Tape& tape, const Tensor& x, std::size_t ti) {
    if (x.rank() != 3) throw shape_error("token_at expects a 3-D tensor, got " + shape_str(x.shape()));
    const std::size_t b = x.dim(0), t = x.dim(1), h = x.dim(2);
    if (ti >= t) throw shape_error("token_at: index " + std::to_string(ti) + " out of range");
    Tensor out = Tensor::zeros({b, h});
    for (std::size_t r = 0; r < b; ++r)
        std::copy_n(x.data() + (r * t + ti) * h, h, out.data() + r * h);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("token_at", [x, out, b, t, h, ti]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* dy = og->data();
            for (std::size_t r = 0; r < b; ++r)
                for (std::size_t j = 0; j < h; ++j) dx[(r * t + ti) * h + j] += dy[r * h + j];
        });
    }
    return out;
}

// subrange of the last dimension
inline Tensor slice_last(Tape& tape, const Tensor& x, std::size_t start, std::size_t len) {
    const std::size_t h = x.shape().back();
    if (start + len > h)
        throw shape_error("slice_last: [" + std::to_string(start) + "," + std::to_string(start + len) +
                          ") out of range for " + shape_str(x.shape()));
    const std::size_t outer = x.size() / h;
    Shape so = x.shape();
    so.back() = len;
    Tensor out = Tensor::zeros(std::move(so));
    for (std::size_t r = 0; r < outer; ++r)
        std::copy_n(x.data() + r * h + start, len, out.data() + r * len);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("slice_last", [x, out, outer, h, start, len]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            double* dx = x.grad().data();
            const double* dy = og->data();
            for (std::size_t r = 0; r < outer; ++r)
                for (std::size_t j = 0; j < len; ++j) dx[r * h + start + j] += dy[r * len + j];
        });
    }
    return out;
}

// concatenate along the last dimension
inline Tensor concat_last(Tape& tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_last: empty part list");
    Shape lead = parts[0].shape();
    lead.pop_back();
    std::size_t total = 0;
    for (const auto& p : parts) {
        Shape pl = p.shape();
        std::size_t last = pl.back();
        pl.pop_back();
        if (pl != lead)
            throw shape_error("concat_last: leading dims differ: " + shape_str(parts[0].shape()) + " vs " +
                              shape_str(p.shape()));
        total += last;
    }
    Shape so = lead;
    so.push_back(total);
    Tensor out = Tensor::zeros(std::move(so));
    const std::size_t outer = out.size() / total;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.shape().back();
        for (std::size_t r = 0; r < outer; ++r)
            std::copy_n(p.data() + r * w, w, out.data() + r * total + off);
        off += w;
    }
    bool wants = false;
    for (const auto& p : parts) wants = wants || p.requires_grad();
    if (wants) {
        out.set_requires_grad(true);
        auto saved = std::make_shared<std::vector<Tensor>>(parts);
        tape.push("concat_last", [saved, out, outer, total]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double* dy = og->data();
            std::size_t off2 = 0;
            for (auto& p : *saved) {
                const std::size_t w = p.shape().back();
                if (p.requires_grad()) {
                    double* dp = p.grad().data();
                    for (std::size_t r = 0; r < outer; ++r)
                        for (std::size_t j = 0; j < w; ++j) dp[r * w + j] += dy[r * total + off2 + j];
                }
                off2 += w;
            }
        });
    }
    return out;
}

inline Tensor weighted_sum(Tape& tape, const Tensor& x, const std::vector<double>& w) {
    if (w.size() != x.size())
        throw shape_error("weighted_sum: weight count " + std::to_string(w.size()) + " vs tensor " +
                          shape_str(x.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x.data()[i];
    Tensor out = Tensor::scalar(acc);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        auto saved = std::make_shared<std::vector<double>>(w);
        tape.push("weighted_sum", [x, out, saved]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double d = (*og)[0];
            double* dx = x.grad().data();
            for (std::size_t i = 0; i < x.size(); ++i) dx[i] += d * (*saved)[i];
        });
    }
    return out;
}

inline Tensor sum(Tape& tape, const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    Tensor out = Tensor::scalar(acc);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push("sum", [x, out]() {
            const auto* og = detail::out_grad(out);
            if (!og) return;
            const double d = (*og)[0];
            double* dx = x.grad().data();
            for (std::size_t i = 0; i < x.size(); ++i) dx[i] += d;
        });
    }
    return out;
}

// Reverse sweep. Gradients accumulate additively across fan-out; callers zero
// parameter grads between steps.
inline void backward(Tape& tape, const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw contract_error("backward requires a scalar loss" +
                             (loss.defined() ? ", got " + shape_str(loss.shape()) : std::string()));
    loss.d_->g.assign(1, 1.0);
    const auto& nodes = tape.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) it->back();
}

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// f must be deterministic (re-seed any dropout per call).
using TensorFn = std::function<Tensor(Tape&, const Tensor&)>;

inline double finite_diff_check(const TensorFn& f, const Tensor& x, double step) {
    if (!(step > 0.0)) throw contract_error("finite_diff_check requires step > 0");
    Tape tape;
    Tensor xi(x.shape(), x.values(), true);
    Tensor y = f(tape, xi);
    Rng wr(0xfd5eed);
    std::vector<double> w(y.size());
    for (auto& e : w) e = 0.5 + wr.unit();
    Tensor s = weighted_sum(tape, y, w);
    backward(tape, s);
    std::vector<double> analytic = xi.grad();

    std::vector<double> vals = x.values();
    auto eval = [&](const std::vector<double>& v) {
        Tape t2;
        Tensor xx(x.shape(), v, false);
        Tensor yy = f(t2, xx);
        double acc = 0.0;
        for (std::size_t i = 0; i < yy.size(); ++i) acc += w[i] * yy.data()[i];
        return acc;
    };
    double max_err = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + step;
        const double fp = eval(vals);
        vals[i] = orig - step;
        const double fm = eval(vals);
        vals[i] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace fgtt::ad
