#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "mcn/core/rng.hpp"
#include "mcn/nn/conv_core.hpp"

namespace mcn::nn {

/// Called with (name, value, grad) for every learnable parameter.
using ParamVisitor = std::function<void(const std::string&, Tensor&, Tensor&)>;
/// Called with (name, value) for non-learnable state (e.g. running stats).
using BufferVisitor = std::function<void(const std::string&, Tensor&)>;

inline void he_normal_init(Tensor& w, int fan_in, Rng& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, sd);
}

class Conv3d {
public:
    Conv3d() = default;
    Conv3d(int in_c, int out_c, std::array<int, 3> kernel, std::array<int, 3> stride,
           std::array<int, 3> pad, Rng& rng)
        : geom_{kernel, stride, pad},
          w_({out_c, in_c, kernel[0], kernel[1], kernel[2]}),
          b_({out_c}),
          gw_({out_c, in_c, kernel[0], kernel[1], kernel[2]}),
          gb_({out_c}) {
        he_normal_init(w_, in_c * kernel[0] * kernel[1] * kernel[2], rng);
    }

    struct Cache {
        Tensor x;
    };

    Tensor forward(const Tensor& x, Cache* cache) const {
        if (cache) cache->x = x;
        return conv3d_forward(x, w_, b_.data(), geom_);
    }

    Tensor backward(const Tensor& gy, const Cache& cache) {
        conv3d_backward_weights(cache.x, gy, geom_, gw_, gb_.data());
        return conv3d_backward_data(gy, w_, geom_,
                                    {cache.x.dim(0), cache.x.dim(1), cache.x.dim(2), cache.x.dim(3)});
    }

    void visit_params(const std::string& prefix, const ParamVisitor& v) {
        v(prefix + ".w", w_, gw_);
        v(prefix + ".b", b_, gb_);
    }

    const ConvGeom& geom() const { return geom_; }
    Tensor& weight() { return w_; }
    const Tensor& weight() const { return w_; }

private:
    ConvGeom geom_;
    Tensor w_, b_, gw_, gb_;
};

/// Weight layout (in_c, out_c, KT, KH, KW); forward is the adjoint of a
/// convolution with that weight, so output dims are (L-1)*stride-2*pad+K.
class ConvTranspose3d {
public:
    ConvTranspose3d() = default;
    ConvTranspose3d(int in_c, int out_c, std::array<int, 3> kernel, std::array<int, 3> stride,
                    std::array<int, 3> pad, Rng& rng)
        : geom_{kernel, stride, pad},
          w_({in_c, out_c, kernel[0], kernel[1], kernel[2]}),
          b_({out_c}),
          gw_({in_c, out_c, kernel[0], kernel[1], kernel[2]}),
          gb_({out_c}) {
        he_normal_init(w_, in_c * kernel[0] * kernel[1] * kernel[2], rng);
    }

    struct Cache {
        Tensor x;
    };

    Tensor forward(const Tensor& x, Cache* cache) const {
        if (cache) cache->x = x;
        const auto od = geom_.transpose_out_dims({x.dim(1), x.dim(2), x.dim(3)});
        Tensor y = conv3d_backward_data(x, w_, geom_, {w_.dim(1), od[0], od[1], od[2]});
        const int64_t plane = int64_t(od[0]) * od[1] * od[2];
        for (int c = 0; c < w_.dim(1); ++c) {
            double* dst = y.data() + c * plane;
            for (int64_t i = 0; i < plane; ++i) dst[i] += b_[c];
        }
        return y;
    }

    Tensor backward(const Tensor& gy, const Cache& cache) {
        conv3d_backward_weights(gy, cache.x, geom_, gw_, nullptr);
        const int64_t plane = gy.numel() / gy.dim(0);
        for (int c = 0; c < gy.dim(0); ++c) {
            const double* src = gy.data() + c * plane;
            double s = 0.0;
            for (int64_t i = 0; i < plane; ++i) s += src[i];
            gb_[c] += s;
        }
        return conv3d_forward(gy, w_, nullptr, geom_);
    }

    void visit_params(const std::string& prefix, const ParamVisitor& v) {
        v(prefix + ".w", w_, gw_);
        v(prefix + ".b", b_, gb_);
    }

private:
    ConvGeom geom_;
    Tensor w_, b_, gw_, gb_;
};

/// Per-channel normalization over the (T,H,W) extent of a single sample.
/// Training uses batch statistics and updates running estimates; eval uses
/// the frozen running estimates.
class BatchNorm3d {
public:
    BatchNorm3d() = default;
    explicit BatchNorm3d(int channels, double eps = 1e-5, double momentum = 0.1)
        : eps_(eps),
          momentum_(momentum),
          gamma_({channels}),
          beta_({channels}),
          ggamma_({channels}),
          gbeta_({channels}),
          run_mean_({channels}),
          run_var_({channels}) {
        gamma_.fill(1.0);
        run_var_.fill(1.0);
    }

    struct Cache {
        Tensor xhat;
        Tensor inv_std;  // per channel, train mode only
    };

    Tensor forward(const Tensor& x, Cache* cache, bool train) {
        const int c = x.dim(0);
        const int64_t n = x.numel() / c;
        Tensor y(x.shape());
        Tensor xhat(x.shape());
        Tensor inv_std({c});
        for (int ch = 0; ch < c; ++ch) {
            const double* xs = x.data() + ch * n;
            double mean, var;
            if (train) {
                double s = 0.0;
                for (int64_t i = 0; i < n; ++i) s += xs[i];
                mean = s / static_cast<double>(n);
                double sq = 0.0;
                for (int64_t i = 0; i < n; ++i) sq += (xs[i] - mean) * (xs[i] - mean);
                var = sq / static_cast<double>(n);
                run_mean_[ch] = (1.0 - momentum_) * run_mean_[ch] + momentum_ * mean;
                run_var_[ch] = (1.0 - momentum_) * run_var_[ch] + momentum_ * var;
            } else {
                mean = run_mean_[ch];
                var = run_var_[ch];
            }
            const double is = 1.0 / std::sqrt(var + eps_);
            inv_std[ch] = is;
            double* xh = xhat.data() + ch * n;
            double* ys = y.data() + ch * n;
            for (int64_t i = 0; i < n; ++i) {
                xh[i] = (xs[i] - mean) * is;
                ys[i] = gamma_[ch] * xh[i] + beta_[ch];
            }
        }
        if (cache) {
            cache->xhat = std::move(xhat);
            cache->inv_std = std::move(inv_std);
        }
        return y;
    }

    /// Inference path: frozen running statistics, no cache, shareable across
    /// threads.
    Tensor forward_eval(const Tensor& x) const {
        const int c = x.dim(0);
        const int64_t n = x.numel() / c;
        Tensor y(x.shape());
        for (int ch = 0; ch < c; ++ch) {
            const double is = 1.0 / std::sqrt(run_var_[ch] + eps_);
            const double* xs = x.data() + ch * n;
            double* ys = y.data() + ch * n;
            for (int64_t i = 0; i < n; ++i) ys[i] = gamma_[ch] * (xs[i] - run_mean_[ch]) * is + beta_[ch];
        }
        return y;
    }

    /// Train-mode backward: gradients flow through the batch statistics.
    Tensor backward(const Tensor& gy, const Cache& cache) {
        const int c = gy.dim(0);
        const int64_t n = gy.numel() / c;
        Tensor gx(gy.shape());
        for (int ch = 0; ch < c; ++ch) {
            const double* g = gy.data() + ch * n;
            const double* xh = cache.xhat.data() + ch * n;
            double sum_g = 0.0, sum_gxh = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                sum_g += g[i];
                sum_gxh += g[i] * xh[i];
            }
            ggamma_[ch] += sum_gxh;
            gbeta_[ch] += sum_g;
            const double k = gamma_[ch] * cache.inv_std[ch] / static_cast<double>(n);
            double* gx_c = gx.data() + ch * n;
            for (int64_t i = 0; i < n; ++i)
                gx_c[i] = k * (static_cast<double>(n) * g[i] - sum_g - xh[i] * sum_gxh);
        }
        return gx;
    }

    void visit_params(const std::string& prefix, const ParamVisitor& v) {
        v(prefix + ".gamma", gamma_, ggamma_);
        v(prefix + ".beta", beta_, gbeta_);
    }

    void visit_buffers(const std::string& prefix, const BufferVisitor& v) {
        v(prefix + ".run_mean", run_mean_);
        v(prefix + ".run_var", run_var_);
    }

private:
    double eps_ = 1e-5;
    double momentum_ = 0.1;
    Tensor gamma_, beta_, ggamma_, gbeta_;
    Tensor run_mean_, run_var_;
};

/// y = W x + b for x of shape (in) or (in, cols); bias broadcasts per column.
class Linear {
public:
    Linear() = default;
    Linear(int in, int out, Rng& rng) : w_({out, in}), b_({out}), gw_({out, in}), gb_({out}) {
        he_normal_init(w_, in, rng);
    }

    struct Cache {
        Tensor x;
    };

    Tensor forward(const Tensor& x, Cache* cache) const {
        if (cache) cache->x = x;
        const int in = w_.dim(1), out = w_.dim(0);
        const int cols = x.rank() == 1 ? 1 : x.dim(1);
        if (x.dim(0) != in) throw ConfigError("linear: input size mismatch");
        Tensor y(x.rank() == 1 ? std::vector<int>{out} : std::vector<int>{out, cols});
        blas::gemm(false, false, out, cols, in, 1.0, w_.data(), x.data(), 0.0, y.data());
        for (int o = 0; o < out; ++o)
            for (int j = 0; j < cols; ++j) y[int64_t(o) * cols + j] += b_[o];
        return y;
    }

    Tensor backward(const Tensor& gy, const Cache& cache) {
        const int in = w_.dim(1), out = w_.dim(0);
        const int cols = cache.x.rank() == 1 ? 1 : cache.x.dim(1);
        blas::gemm(false, true, out, in, cols, 1.0, gy.data(), cache.x.data(), 1.0, gw_.data());
        for (int o = 0; o < out; ++o)
            for (int j = 0; j < cols; ++j) gb_[o] += gy[int64_t(o) * cols + j];
        Tensor gx(cache.x.shape());
        blas::gemm(true, false, in, cols, out, 1.0, w_.data(), gy.data(), 0.0, gx.data());
        return gx;
    }

    void visit_params(const std::string& prefix, const ParamVisitor& v) {
        v(prefix + ".w", w_, gw_);
        v(prefix + ".b", b_, gb_);
    }

private:
    Tensor w_, b_, gw_, gb_;
};

// --- stateless activations ---

inline Tensor relu(const Tensor& x, Tensor* mask) {
    Tensor y(x.shape());
    if (mask && mask->shape() != x.shape()) *mask = Tensor(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) {
        const bool on = x[i] > 0.0;
        y[i] = on ? x[i] : 0.0;
        if (mask) (*mask)[i] = on ? 1.0 : 0.0;
    }
    return y;
}

inline Tensor relu_backward(const Tensor& gy, const Tensor& mask) {
    Tensor gx(gy.shape());
    for (int64_t i = 0; i < gy.numel(); ++i) gx[i] = gy[i] * mask[i];
    return gx;
}

inline double sigmoid_scalar(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = sigmoid_scalar(x[i]);
    return y;
}

/// gx given gy and the forward output y.
inline Tensor sigmoid_backward(const Tensor& gy, const Tensor& y) {
    Tensor gx(gy.shape());
    for (int64_t i = 0; i < gy.numel(); ++i) gx[i] = gy[i] * y[i] * (1.0 - y[i]);
    return gx;
}

inline Tensor softmax(const Tensor& logits) {
    Tensor p(logits.shape());
    double mx = logits[0];
    for (int64_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits[i]);
    double denom = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        denom += p[i];
    }
    for (int64_t i = 0; i < p.numel(); ++i) p[i] /= denom;
    return p;
}

/// Mean element-wise binary cross-entropy evaluated on pre-sigmoid values.
/// If mask is non-null only elements with mask>0 contribute; with no active
/// elements the loss and gradient are zero.
inline double bce_with_logits(const Tensor& z, const Tensor& target, const Tensor* mask, Tensor* gz) {
    if (z.shape() != target.shape()) throw ConfigError("bce: shape mismatch");
    if (gz && gz->shape() != z.shape()) *gz = Tensor(z.shape());
    int64_t active = 0;
    if (mask) {
        for (int64_t i = 0; i < mask->numel(); ++i)
            if ((*mask)[i] > 0.0) ++active;
    } else {
        active = z.numel();
    }
    if (active == 0) {
        if (gz) gz->fill(0.0);
        return 0.0;
    }
    const double inv = 1.0 / static_cast<double>(active);
    double loss = 0.0;
    for (int64_t i = 0; i < z.numel(); ++i) {
        const bool on = !mask || (*mask)[i] > 0.0;
        if (!on) {
            if (gz) (*gz)[i] = 0.0;
            continue;
        }
        const double zi = z[i], ti = target[i];
        loss += std::max(zi, 0.0) - zi * ti + std::log1p(std::exp(-std::abs(zi)));
        if (gz) (*gz)[i] = (sigmoid_scalar(zi) - ti) * inv;
    }
    return loss * inv;
}

/// Cross-entropy of softmax(logits) against an integer label.
inline double cross_entropy_with_logits(const Tensor& logits, int label, Tensor* gz) {
    if (label < 0 || label >= logits.numel()) throw ConfigError("cross entropy: label out of range");
    const Tensor p = softmax(logits);
    if (gz) {
        *gz = p;
        (*gz)[label] -= 1.0;
    }
    return -std::log(std::max(p[label], 1e-300));
}

}  // namespace mcn::nn
