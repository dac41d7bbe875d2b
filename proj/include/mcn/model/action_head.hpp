#pragma once

#include "mcn/nn/layers.hpp"

namespace mcn {

/// How the compact features are pooled before classification.
enum class PoolMode {
    standard,   // hard window around the gaze cell vs the rest
    global,     // one global mean fed to both branches
    center,     // gaze cell pinned to the grid center
    gaze_only,  // standard pooling, non-gaze branch evidence dropped
    soft,       // pooled gaze map weights every cell
};

/// Gaze location on the compact feature grid, cell coordinates.
struct GazeCell {
    int x = 0;
    int y = 0;
};

/// Non-overlapping 3D max-pool of G down to grid_dims, plus the per-slice
/// argmax cell (ties break to the smallest row-major index).
struct PooledGaze {
    Tensor pooled;                // (t', h', w')
    std::vector<GazeCell> cells;  // one per temporal slice
};

inline PooledGaze extract_gaze_points(const Tensor& g, const std::array<int, 3>& grid_dims) {
    if (g.rank() != 3) throw InputError("gaze map stack must be (N,H,W)");
    const int n = g.dim(0), h = g.dim(1), w = g.dim(2);
    const int tp = grid_dims[0], hp = grid_dims[1], wp = grid_dims[2];
    if (n % tp != 0 || h % hp != 0 || w % wp != 0)
        throw ConfigError("gaze map dims not divisible by the pooling grid");
    const int kt = n / tp, kh = h / hp, kw = w / wp;
    PooledGaze out;
    out.pooled = Tensor({tp, hp, wp});
    out.cells.resize(tp);
    for (int t = 0; t < tp; ++t) {
        double best = -1.0;
        GazeCell best_cell;
        for (int i = 0; i < hp; ++i)
            for (int j = 0; j < wp; ++j) {
                double m = g[(int64_t(t * kt) * h + int64_t(i) * kh) * w + int64_t(j) * kw];
                for (int dt = 0; dt < kt; ++dt)
                    for (int di = 0; di < kh; ++di)
                        for (int dj = 0; dj < kw; ++dj) {
                            const double v =
                                g[(int64_t(t * kt + dt) * h + (int64_t(i) * kh + di)) * w +
                                  int64_t(j) * kw + dj];
                            if (v > m) m = v;
                        }
                out.pooled[(int64_t(t) * hp + i) * wp + j] = m;
                if (m > best) {
                    best = m;
                    best_cell = {j, i};
                }
            }
        out.cells[t] = best_cell;
    }
    return out;
}

/// Element counts of the two regions for one slice's gaze cell.
struct RegionCounts {
    int gaze = 0;
    int rest = 0;
};

inline RegionCounts region_counts(int hp, int wp, const GazeCell& cell, int r) {
    const int y0 = std::max(0, cell.y - r), y1 = std::min(hp - 1, cell.y + r);
    const int x0 = std::max(0, cell.x - r), x1 = std::min(wp - 1, cell.x + r);
    RegionCounts c;
    c.gaze = (y1 - y0 + 1) * (x1 - x0 + 1);
    c.rest = hp * wp - c.gaze;
    return c;
}

/// Two-way spatial pooling: v_g[c,t] is the mean of F'[c,t] over the
/// (2r+1)^2 window around the slice's gaze cell clipped to the grid; v_n is
/// the mean over every remaining cell. Normalizers are the exact element
/// counts of each region.
inline void two_way_pool(const Tensor& fp, const std::vector<GazeCell>& cells, int r, Tensor& v_g,
                         Tensor& v_n) {
    if (fp.rank() != 4) throw InputError("two-way pool expects (c',t',h',w')");
    const int c = fp.dim(0), tp = fp.dim(1), hp = fp.dim(2), wp = fp.dim(3);
    if (static_cast<int>(cells.size()) != tp) throw InputError("one gaze cell per temporal slice required");
    if (r < 1) throw ConfigError("pool radius must be >= 1");
    for (const auto& cell : cells) {
        if (cell.x < 0 || cell.x >= wp || cell.y < 0 || cell.y >= hp)
            throw InputError("gaze cell outside the feature grid");
        if (region_counts(hp, wp, cell, r).rest == 0)
            throw ConfigError("gaze window covers the full grid; non-gaze region empty");
    }
    v_g = Tensor({c, tp});
    v_n = Tensor({c, tp});
    for (int t = 0; t < tp; ++t) {
        const auto& cell = cells[t];
        const int y0 = std::max(0, cell.y - r), y1 = std::min(hp - 1, cell.y + r);
        const int x0 = std::max(0, cell.x - r), x1 = std::min(wp - 1, cell.x + r);
        const RegionCounts counts = region_counts(hp, wp, cell, r);
        for (int ch = 0; ch < c; ++ch) {
            const double* plane = fp.data() + (int64_t(ch) * tp + t) * hp * wp;
            double total = 0.0, window = 0.0;
            for (int i = 0; i < hp; ++i)
                for (int j = 0; j < wp; ++j) {
                    const double v = plane[int64_t(i) * wp + j];
                    total += v;
                    if (i >= y0 && i <= y1 && j >= x0 && j <= x1) window += v;
                }
            v_g[int64_t(ch) * tp + t] = window / counts.gaze;
            v_n[int64_t(ch) * tp + t] = (total - window) / counts.rest;
        }
    }
}

/// Scatter the pooled-mean gradients back onto the feature grid.
inline Tensor two_way_pool_backward(const Tensor& gv_g, const Tensor& gv_n,
                                    const std::vector<GazeCell>& cells, int r,
                                    const std::array<int, 4>& fp_shape) {
    const int c = fp_shape[0], tp = fp_shape[1], hp = fp_shape[2], wp = fp_shape[3];
    Tensor gfp({c, tp, hp, wp});
    for (int t = 0; t < tp; ++t) {
        const auto& cell = cells[t];
        const int y0 = std::max(0, cell.y - r), y1 = std::min(hp - 1, cell.y + r);
        const int x0 = std::max(0, cell.x - r), x1 = std::min(wp - 1, cell.x + r);
        const RegionCounts counts = region_counts(hp, wp, cell, r);
        for (int ch = 0; ch < c; ++ch) {
            const double gg = gv_g[int64_t(ch) * tp + t] / counts.gaze;
            const double gn = gv_n[int64_t(ch) * tp + t] / counts.rest;
            double* plane = gfp.data() + (int64_t(ch) * tp + t) * hp * wp;
            for (int i = 0; i < hp; ++i)
                for (int j = 0; j < wp; ++j) {
                    const bool in_window = i >= y0 && i <= y1 && j >= x0 && j <= x1;
                    plane[int64_t(i) * wp + j] += in_window ? gg : gn;
                }
        }
    }
    return gfp;
}

/// Soft variant of the two-way pooling: the pooled gaze map G' weights every
/// cell instead of routing through a hard window.
inline void soft_two_way_pool(const Tensor& fp, const Tensor& g_pooled, Tensor& v_g, Tensor& v_n) {
    const int c = fp.dim(0), tp = fp.dim(1), hp = fp.dim(2), wp = fp.dim(3);
    if (g_pooled.rank() != 3 || g_pooled.dim(0) != tp || g_pooled.dim(1) != hp || g_pooled.dim(2) != wp)
        throw InputError("soft pooling: G' must match the feature grid");
    v_g = Tensor({c, tp});
    v_n = Tensor({c, tp});
    const double eps = 1e-12;
    for (int t = 0; t < tp; ++t) {
        double wsum = 0.0, csum = 0.0;
        const double* gp = g_pooled.data() + int64_t(t) * hp * wp;
        for (int64_t i = 0; i < int64_t(hp) * wp; ++i) {
            wsum += gp[i];
            csum += 1.0 - gp[i];
        }
        for (int ch = 0; ch < c; ++ch) {
            const double* plane = fp.data() + (int64_t(ch) * tp + t) * hp * wp;
            double acc_g = 0.0, acc_n = 0.0;
            for (int64_t i = 0; i < int64_t(hp) * wp; ++i) {
                acc_g += gp[i] * plane[i];
                acc_n += (1.0 - gp[i]) * plane[i];
            }
            v_g[int64_t(ch) * tp + t] = acc_g / std::max(wsum, eps);
            v_n[int64_t(ch) * tp + t] = acc_n / std::max(csum, eps);
        }
    }
}

/// Global mean over all cells, fed identically to both branches (the
/// gaze-free ablation).
inline void global_pool(const Tensor& fp, Tensor& v_g, Tensor& v_n) {
    const int c = fp.dim(0), tp = fp.dim(1);
    const int64_t cells = int64_t(fp.dim(2)) * fp.dim(3);
    v_g = Tensor({c, tp});
    for (int ch = 0; ch < c; ++ch)
        for (int t = 0; t < tp; ++t) {
            const double* plane = fp.data() + (int64_t(ch) * tp + t) * cells;
            double s = 0.0;
            for (int64_t i = 0; i < cells; ++i) s += plane[i];
            v_g[int64_t(ch) * tp + t] = s / static_cast<double>(cells);
        }
    v_n = v_g;
}

/// Two narrow branches over the pooled vectors, concatenated and mapped to
/// class logits per temporal slice, then averaged over slices.
class ActionClassifier {
public:
    ActionClassifier() = default;
    ActionClassifier(int c_in, int s, int n, Rng& rng)
        : s_(s), fg_(c_in, s, rng), fn_(c_in, s / 2, rng), flogit_(s + s / 2, n, rng) {}

    struct Cache {
        nn::Linear::Cache fg, fn, fl;
        Tensor mask_g, mask_n;
        bool drop_non_gaze = false;
    };

    /// Returns class logits (length n). drop_non_gaze zeroes the non-gaze
    /// branch output, removing its evidence while keeping shapes intact.
    Tensor forward(const Tensor& v_g, const Tensor& v_n, Cache* cache,
                   bool drop_non_gaze = false) const {
        if (v_g.shape() != v_n.shape() || v_g.rank() != 2)
            throw InputError("classifier: pooled tensors must both be (c', t')");
        const int tp = v_g.dim(1);
        Tensor a = fg_.forward(v_g, cache ? &cache->fg : nullptr);
        a = nn::relu(a, cache ? &cache->mask_g : nullptr);
        Tensor b = fn_.forward(v_n, cache ? &cache->fn : nullptr);
        b = nn::relu(b, cache ? &cache->mask_n : nullptr);
        if (drop_non_gaze) b.fill(0.0);
        if (cache) cache->drop_non_gaze = drop_non_gaze;
        Tensor cat({a.dim(0) + b.dim(0), tp});
        std::copy(a.data(), a.data() + a.numel(), cat.data());
        std::copy(b.data(), b.data() + b.numel(), cat.data() + a.numel());
        const Tensor z = flogit_.forward(cat, cache ? &cache->fl : nullptr);
        Tensor logits({z.dim(0)});
        for (int o = 0; o < z.dim(0); ++o) {
            double s = 0.0;
            for (int t = 0; t < tp; ++t) s += z[int64_t(o) * tp + t];
            logits[o] = s / tp;
        }
        return logits;
    }

    /// Backward from class-logit gradients to (gv_g, gv_n).
    std::pair<Tensor, Tensor> backward(const Tensor& g_logits, Cache& cache) {
        const int tp = cache.fl.x.dim(1);
        Tensor gz({g_logits.dim(0), tp});
        for (int o = 0; o < g_logits.dim(0); ++o)
            for (int t = 0; t < tp; ++t) gz[int64_t(o) * tp + t] = g_logits[o] / tp;
        const Tensor gcat = flogit_.backward(gz, cache.fl);
        const int sa = s_, sb = s_ / 2;
        Tensor ga({sa, tp}), gb({sb, tp});
        std::copy(gcat.data(), gcat.data() + ga.numel(), ga.data());
        std::copy(gcat.data() + ga.numel(), gcat.data() + gcat.numel(), gb.data());
        ga = nn::relu_backward(ga, cache.mask_g);
        if (cache.drop_non_gaze)
            gb.fill(0.0);
        else
            gb = nn::relu_backward(gb, cache.mask_n);
        return {fg_.backward(ga, cache.fg), fn_.backward(gb, cache.fn)};
    }

    void visit_params(const std::string& prefix, const nn::ParamVisitor& v) {
        fg_.visit_params(prefix + ".fg", v);
        fn_.visit_params(prefix + ".fn", v);
        flogit_.visit_params(prefix + ".flogit", v);
    }

private:
    int s_ = 0;
    nn::Linear fg_, fn_, flogit_;
};

}  // namespace mcn
