#pragma once

#include <array>
#include <vector>

#include "mcn/core/blas.hpp"
#include "mcn/core/tensor.hpp"

namespace mcn::nn {

/// 3D convolution geometry over (C,T,H,W) tensors, weights (OC,IC,KT,KH,KW).
/// All routines chunk the im2col buffer by output temporal slice so the
/// working set stays at rows=IC*KT*KH*KW by cols=OH*OW.
struct ConvGeom {
    std::array<int, 3> kernel{1, 1, 1};
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> pad{0, 0, 0};

    std::array<int, 3> out_dims(const std::array<int, 3>& in) const {
        std::array<int, 3> out{};
        for (int i = 0; i < 3; ++i) {
            const int span = in[i] + 2 * pad[i] - kernel[i];
            if (span < 0)
                throw ConfigError("conv: kernel larger than padded input on axis " + std::to_string(i));
            out[i] = span / stride[i] + 1;
        }
        return out;
    }

    /// Transposed-conv output: (L-1)*stride - 2*pad + kernel.
    std::array<int, 3> transpose_out_dims(const std::array<int, 3>& in) const {
        std::array<int, 3> out{};
        for (int i = 0; i < 3; ++i) {
            out[i] = (in[i] - 1) * stride[i] - 2 * pad[i] + kernel[i];
            if (out[i] <= 0) throw ConfigError("transposed conv: non-positive output dim");
        }
        return out;
    }
};

namespace detail {

/// Gather one output-temporal slice of x into col (rows=IC*KT*KH*KW, cols=OH*OW).
inline void im2col_slice(const double* x, int ic, int t, int h, int w, const ConvGeom& g, int to, int oh,
                         int ow, double* col) {
    const int kt = g.kernel[0], kh = g.kernel[1], kw = g.kernel[2];
    const int64_t plane = int64_t(h) * w;
    const int64_t cols = int64_t(oh) * ow;
    int64_t row = 0;
    for (int c = 0; c < ic; ++c) {
        const double* xc = x + int64_t(c) * t * plane;
        for (int dt = 0; dt < kt; ++dt) {
            const int ti = to * g.stride[0] - g.pad[0] + dt;
            const bool t_ok = ti >= 0 && ti < t;
            const double* xt = xc + int64_t(ti) * plane;
            for (int dh = 0; dh < kh; ++dh) {
                for (int dw = 0; dw < kw; ++dw, ++row) {
                    double* dst = col + row * cols;
                    if (!t_ok) {
                        for (int64_t i = 0; i < cols; ++i) dst[i] = 0.0;
                        continue;
                    }
                    for (int y = 0; y < oh; ++y) {
                        const int hi = y * g.stride[1] - g.pad[1] + dh;
                        double* drow = dst + int64_t(y) * ow;
                        if (hi < 0 || hi >= h) {
                            for (int xw = 0; xw < ow; ++xw) drow[xw] = 0.0;
                            continue;
                        }
                        const double* srow = xt + int64_t(hi) * w;
                        for (int xw = 0; xw < ow; ++xw) {
                            const int wi = xw * g.stride[2] - g.pad[2] + dw;
                            drow[xw] = (wi >= 0 && wi < w) ? srow[wi] : 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add one output-temporal slice of col gradients back into gx.
inline void col2im_add_slice(const double* col, int ic, int t, int h, int w, const ConvGeom& g, int to,
                             int oh, int ow, double* gx) {
    const int kt = g.kernel[0], kh = g.kernel[1], kw = g.kernel[2];
    const int64_t plane = int64_t(h) * w;
    const int64_t cols = int64_t(oh) * ow;
    int64_t row = 0;
    for (int c = 0; c < ic; ++c) {
        double* xc = gx + int64_t(c) * t * plane;
        for (int dt = 0; dt < kt; ++dt) {
            const int ti = to * g.stride[0] - g.pad[0] + dt;
            const bool t_ok = ti >= 0 && ti < t;
            double* xt = xc + int64_t(ti) * plane;
            for (int dh = 0; dh < kh; ++dh) {
                for (int dw = 0; dw < kw; ++dw, ++row) {
                    if (!t_ok) continue;
                    const double* src = col + row * cols;
                    for (int y = 0; y < oh; ++y) {
                        const int hi = y * g.stride[1] - g.pad[1] + dh;
                        if (hi < 0 || hi >= h) continue;
                        double* drow = xt + int64_t(hi) * w;
                        const double* srow = src + int64_t(y) * ow;
                        for (int xw = 0; xw < ow; ++xw) {
                            const int wi = xw * g.stride[2] - g.pad[2] + dw;
                            if (wi >= 0 && wi < w) drow[wi] += srow[xw];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// y(OC,OT,OH,OW) = w(OC,IC,K) * x(IC,T,H,W); bias optional (per out channel).
inline Tensor conv3d_forward(const Tensor& x, const Tensor& w, const double* bias, const ConvGeom& g) {
    const int ic = x.dim(0), t = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int oc = w.dim(0);
    if (w.dim(1) != ic)
        throw ConfigError("conv: weight expects " + std::to_string(w.dim(1)) + " input channels, got " +
                          std::to_string(ic));
    const auto od = g.out_dims({t, h, ww});
    const int ot = od[0], oh = od[1], ow = od[2];
    Tensor y({oc, ot, oh, ow});
    const int64_t krows = int64_t(ic) * g.kernel[0] * g.kernel[1] * g.kernel[2];
    const int64_t cols = int64_t(oh) * ow;
    std::vector<double> col(static_cast<size_t>(krows * cols));
    for (int to = 0; to < ot; ++to) {
        detail::im2col_slice(x.data(), ic, t, h, ww, g, to, oh, ow, col.data());
        // y_slice(oc, cols), gathered per slice then strided back out
        std::vector<double> ys(static_cast<size_t>(oc) * cols);
        blas::gemm(false, false, oc, static_cast<int>(cols), static_cast<int>(krows), 1.0, w.data(),
                   col.data(), 0.0, ys.data());
        for (int c = 0; c < oc; ++c) {
            double* dst = y.data() + (int64_t(c) * ot + to) * cols;
            const double* src = ys.data() + int64_t(c) * cols;
            const double bv = bias ? bias[c] : 0.0;
            for (int64_t i = 0; i < cols; ++i) dst[i] = src[i] + bv;
        }
    }
    return y;
}

/// gw += d(sum(gy*y))/dw; gbias (optional) += per-channel sums of gy.
inline void conv3d_backward_weights(const Tensor& x, const Tensor& gy, const ConvGeom& g, Tensor& gw,
                                    double* gbias) {
    const int ic = x.dim(0), t = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int oc = gy.dim(0), ot = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    const int64_t krows = int64_t(ic) * g.kernel[0] * g.kernel[1] * g.kernel[2];
    const int64_t cols = int64_t(oh) * ow;
    std::vector<double> col(static_cast<size_t>(krows * cols));
    std::vector<double> gys(static_cast<size_t>(oc) * cols);
    for (int to = 0; to < ot; ++to) {
        detail::im2col_slice(x.data(), ic, t, h, ww, g, to, oh, ow, col.data());
        for (int c = 0; c < oc; ++c) {
            const double* src = gy.data() + (int64_t(c) * ot + to) * cols;
            std::copy(src, src + cols, gys.begin() + int64_t(c) * cols);
            if (gbias) {
                double s = 0.0;
                for (int64_t i = 0; i < cols; ++i) s += src[i];
                gbias[c] += s;
            }
        }
        blas::gemm(false, true, oc, static_cast<int>(krows), static_cast<int>(cols), 1.0, gys.data(),
                   col.data(), 1.0, gw.data());
    }
}

/// gx = d(sum(gy*y))/dx for x of shape (IC,T,H,W).
inline Tensor conv3d_backward_data(const Tensor& gy, const Tensor& w, const ConvGeom& g,
                                   const std::array<int, 4>& x_shape) {
    const int ic = x_shape[0], t = x_shape[1], h = x_shape[2], ww = x_shape[3];
    const int oc = gy.dim(0), ot = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    Tensor gx({ic, t, h, ww});
    const int64_t krows = int64_t(ic) * g.kernel[0] * g.kernel[1] * g.kernel[2];
    const int64_t cols = int64_t(oh) * ow;
    std::vector<double> colg(static_cast<size_t>(krows * cols));
    std::vector<double> gys(static_cast<size_t>(oc) * cols);
    for (int to = 0; to < ot; ++to) {
        for (int c = 0; c < oc; ++c) {
            const double* src = gy.data() + (int64_t(c) * ot + to) * cols;
            std::copy(src, src + cols, gys.begin() + int64_t(c) * cols);
        }
        blas::gemm(true, false, static_cast<int>(krows), static_cast<int>(cols), oc, 1.0, w.data(),
                   gys.data(), 0.0, colg.data());
        detail::col2im_add_slice(colg.data(), ic, t, h, ww, g, to, oh, ow, gx.data());
    }
    return gx;
}

}  // namespace mcn::nn
