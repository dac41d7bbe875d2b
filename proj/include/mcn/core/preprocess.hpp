#pragma once

#include <cmath>

#include "mcn/core/rng.hpp"
#include "mcn/core/types.hpp"

namespace mcn {

inline constexpr double kFlowTruncation = 20.0;  // raw flow clamp, px/frame

/// Single-frame gaze map: Gaussian bump with peak exactly 1.0 at the point.
inline Tensor make_gaussian_gt_map(double x, double y, int h, int w, double sigma) {
    if (sigma <= 0.0) throw InputError("gt map: sigma must be positive");
    if (x < 0.0 || x >= w || y < 0.0 || y >= h) throw InputError("gt map: gaze point out of bounds");
    Tensor map({h, w});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double dx = c - x, dy = r - y;
            map[int64_t(r) * w + c] = std::exp(-(dx * dx + dy * dy) * inv);
        }
    return map;
}

/// Stack of per-frame GT maps plus a per-frame validity mask; invalid frames
/// get an all-zero map and a zero mask entry (dropped from the gaze loss).
inline Tensor make_gt_map_stack(const std::vector<GazeGt>& gaze, int h, int w, double sigma,
                                Tensor* valid_mask = nullptr) {
    const int n = static_cast<int>(gaze.size());
    Tensor maps({n, h, w});
    if (valid_mask) *valid_mask = Tensor({n});
    for (int i = 0; i < n; ++i) {
        if (!gaze[i].valid) continue;
        Tensor m = make_gaussian_gt_map(gaze[i].x, gaze[i].y, h, w, sigma);
        std::copy(m.data(), m.data() + m.numel(), maps.data() + int64_t(i) * h * w);
        if (valid_mask) (*valid_mask)[i] = 1.0;
    }
    return maps;
}

/// Truncate raw flow to [-T, T] and rescale affinely so -T -> 0, T -> 255.
inline Tensor preprocess_flow(const Tensor& raw) {
    Tensor out(raw.shape());
    const double scale = 255.0 / (2.0 * kFlowTruncation);
    for (int64_t i = 0; i < raw.numel(); ++i) {
        const double v = raw[i];
        if (std::isnan(v)) throw InputError("flow: NaN value");
        out[i] = (std::clamp(v, -kFlowTruncation, kFlowTruncation) + kFlowTruncation) * scale;
    }
    return out;
}

/// Bilinear resize of a (C, N, H, W) stack to (C, N, nh, nw).
inline Tensor bilinear_resize(const Tensor& x, int nh, int nw) {
    const int c = x.dim(0), n = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (nh == h && nw == w) return x;
    Tensor y({c, n, nh, nw});
    const double sy = static_cast<double>(h) / nh;
    const double sx = static_cast<double>(w) / nw;
    for (int ci = 0; ci < c; ++ci)
        for (int ni = 0; ni < n; ++ni) {
            const double* src = x.data() + (int64_t(ci) * n + ni) * h * w;
            double* dst = y.data() + (int64_t(ci) * n + ni) * nh * nw;
            for (int r = 0; r < nh; ++r) {
                const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, h - 1.0);
                const int y0 = static_cast<int>(fy);
                const int y1 = std::min(y0 + 1, h - 1);
                const double wy = fy - y0;
                for (int cc = 0; cc < nw; ++cc) {
                    const double fx = std::clamp((cc + 0.5) * sx - 0.5, 0.0, w - 1.0);
                    const int x0 = static_cast<int>(fx);
                    const int x1 = std::min(x0 + 1, w - 1);
                    const double wx = fx - x0;
                    const double top = src[int64_t(y0) * w + x0] * (1 - wx) + src[int64_t(y0) * w + x1] * wx;
                    const double bot = src[int64_t(y1) * w + x0] * (1 - wx) + src[int64_t(y1) * w + x1] * wx;
                    dst[int64_t(r) * nw + cc] = top * (1 - wy) + bot * wy;
                }
            }
        }
    return y;
}

/// Resize to resize_dim, crop to crop_dim (random offsets when training,
/// center otherwise), flip horizontally with p=0.5 when training. Gaze
/// coordinates follow the same transform; entries leaving the crop turn
/// invalid. Flow u-values mirror around the zero-motion level on flip.
inline ClipSample augment_sample(const ClipSample& in, int resize_dim, int crop_dim, Rng& rng,
                                 bool train) {
    if (crop_dim > resize_dim) throw ConfigError("augment: crop larger than resize");
    const int h = in.height(), w = in.width();
    ClipSample out;
    out.clip_id = in.clip_id;
    out.action_id = in.action_id;

    Tensor rgb = bilinear_resize(in.rgb, resize_dim, resize_dim);
    Tensor flow = bilinear_resize(in.flow, resize_dim, resize_dim);
    const double rx = static_cast<double>(resize_dim) / w;
    const double ry = static_cast<double>(resize_dim) / h;
    if (resize_dim != w || resize_dim != h) {
        // flow images encode clamped px/frame affinely; rescale magnitudes in
        // raw units to match the new pixel pitch
        const double mid = 255.0 / 2.0;
        const int64_t plane = flow.numel() / 2;
        for (int64_t i = 0; i < plane; ++i)
            flow[i] = std::clamp(mid + (flow[i] - mid) * rx, 0.0, 255.0);
        for (int64_t i = plane; i < flow.numel(); ++i)
            flow[i] = std::clamp(mid + (flow[i] - mid) * ry, 0.0, 255.0);
    }

    const int span = resize_dim - crop_dim;
    const int ox = train ? rng.uniform_int(0, span) : span / 2;
    const int oy = train ? rng.uniform_int(0, span) : span / 2;
    const bool flip = train && rng.bernoulli(0.5);

    auto crop_stack = [&](const Tensor& src) {
        const int c = src.dim(0), n = src.dim(1);
        Tensor dst({c, n, crop_dim, crop_dim});
        for (int ci = 0; ci < c; ++ci)
            for (int ni = 0; ni < n; ++ni) {
                const double* sp = src.data() + (int64_t(ci) * n + ni) * resize_dim * resize_dim;
                double* dp = dst.data() + (int64_t(ci) * n + ni) * crop_dim * crop_dim;
                for (int r = 0; r < crop_dim; ++r)
                    for (int cc = 0; cc < crop_dim; ++cc) {
                        const int sc = flip ? ox + crop_dim - 1 - cc : ox + cc;
                        dp[int64_t(r) * crop_dim + cc] = sp[int64_t(oy + r) * resize_dim + sc];
                    }
            }
        return dst;
    };
    out.rgb = crop_stack(rgb);
    out.flow = crop_stack(flow);
    if (flip) {
        // mirrored horizontal motion points the other way
        const int64_t plane = out.flow.numel() / 2;
        for (int64_t i = 0; i < plane; ++i) out.flow[i] = 255.0 - out.flow[i];
    }

    out.gaze_gt.resize(in.gaze_gt.size());
    for (size_t i = 0; i < in.gaze_gt.size(); ++i) {
        const GazeGt& g = in.gaze_gt[i];
        GazeGt& o = out.gaze_gt[i];
        if (!g.valid) continue;
        double x = g.x * rx - ox;
        double y = g.y * ry - oy;
        if (flip) x = crop_dim - 1 - x;
        if (x < 0.0 || x >= crop_dim || y < 0.0 || y >= crop_dim) continue;
        o = {x, y, true};
    }
    return out;
}

/// Cut a clip to a fixed temporal window: random offset when an RNG is given
/// (training), centered otherwise. Shorter clips are rejected.
inline ClipSample temporal_window(const ClipSample& in, int n_frames, Rng* rng) {
    const int n = in.n_frames();
    if (n < n_frames)
        throw IntegrityError("clip " + in.clip_id + ": fewer frames than the model window");
    if (n == n_frames) return in;
    const int off = rng ? rng->uniform_int(0, n - n_frames) : (n - n_frames) / 2;
    const int h = in.height(), w = in.width();
    const int64_t plane = int64_t(h) * w;
    ClipSample out;
    out.clip_id = in.clip_id;
    out.action_id = in.action_id;
    out.rgb = Tensor({3, n_frames, h, w});
    out.flow = Tensor({2, n_frames, h, w});
    for (int c = 0; c < 3; ++c)
        std::copy(in.rgb.data() + (int64_t(c) * n + off) * plane,
                  in.rgb.data() + (int64_t(c) * n + off + n_frames) * plane,
                  out.rgb.data() + int64_t(c) * n_frames * plane);
    for (int c = 0; c < 2; ++c)
        std::copy(in.flow.data() + (int64_t(c) * n + off) * plane,
                  in.flow.data() + (int64_t(c) * n + off + n_frames) * plane,
                  out.flow.data() + int64_t(c) * n_frames * plane);
    out.gaze_gt.assign(in.gaze_gt.begin() + off, in.gaze_gt.begin() + off + n_frames);
    return out;
}

}  // namespace mcn
