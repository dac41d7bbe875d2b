#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "mcn/core/tensor.hpp"
#include "mcn/core/types.hpp"

namespace mcn {

/// Pinhole geometry for angular gaze error. FOV is horizontal; the focal
/// length in pixels follows from it.
struct CameraModel {
    int width = 0;
    int height = 0;
    double horizontal_fov_deg = 60.0;

    double focal_px() const {
        if (horizontal_fov_deg <= 0.0 || horizontal_fov_deg >= 180.0)
            throw ConfigError("camera: horizontal FOV must be in (0, 180)");
        const double half = horizontal_fov_deg * std::numbers::pi / 360.0;
        return (width / 2.0) / std::tan(half);
    }
};

/// Angle in degrees between the camera rays through two pixel locations.
/// atan2 of the cross/dot pair stays well conditioned near zero, so identical
/// pixels give exactly zero.
inline double angular_error_deg(double px, double py, double gx, double gy, const CameraModel& cam) {
    const double f = cam.focal_px();
    const double ax = px - cam.width / 2.0, ay = py - cam.height / 2.0;
    const double bx = gx - cam.width / 2.0, by = gy - cam.height / 2.0;
    const double cx = ay * f - f * by;
    const double cy = f * bx - ax * f;
    const double cz = ax * by - ay * bx;
    const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
    const double dot = ax * bx + ay * by + f * f;
    return std::atan2(cross, dot) * 180.0 / std::numbers::pi;
}

/// Running mean of per-frame angular errors over valid ground-truth frames.
struct AaeAccumulator {
    double sum = 0.0;
    int64_t count = 0;

    void add(double deg) {
        sum += deg;
        ++count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

/// Mean angular error between paired per-frame point lists, skipping frames
/// whose ground truth is invalid. Lists pair by position.
inline double aae_points(const std::vector<GazePoint>& pred, const std::vector<GazeGt>& gt,
                         const CameraModel& cam) {
    if (pred.size() != gt.size()) throw InputError("aae: prediction/GT length mismatch");
    AaeAccumulator acc;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!gt[i].valid) continue;
        acc.add(angular_error_deg(pred[i].x, pred[i].y, gt[i].x, gt[i].y, cam));
    }
    return acc.mean();
}

/// Mean angular error between two predicted point lists (every frame pairs).
inline double aae_point_lists(const std::vector<GazePoint>& a, const std::vector<GazePoint>& b,
                              const CameraModel& cam) {
    if (a.size() != b.size()) throw InputError("aae: point list length mismatch");
    AaeAccumulator acc;
    for (size_t i = 0; i < a.size(); ++i)
        acc.add(angular_error_deg(a[i].x, a[i].y, b[i].x, b[i].y, cam));
    return acc.mean();
}

/// Single-fixation ROC area: the ground-truth pixel is the one positive, all
/// other pixels are negatives, ties credit 0.5.
inline double auc_single_fixation(const Tensor& map, double gt_x, double gt_y) {
    if (map.rank() != 2) throw InputError("auc: map must be (H,W)");
    const int h = map.dim(0), w = map.dim(1);
    const int px = std::clamp(static_cast<int>(std::lround(gt_x)), 0, w - 1);
    const int py = std::clamp(static_cast<int>(std::lround(gt_y)), 0, h - 1);
    const double pos = map[int64_t(py) * w + px];
    int64_t below = 0, equal = 0;
    for (int64_t i = 0; i < map.numel(); ++i) {
        if (map[i] < pos)
            ++below;
        else if (map[i] == pos)
            ++equal;
    }
    const int64_t negatives = map.numel() - 1;
    if (negatives <= 0) return 1.0;
    // the positive itself sits in the equal bucket
    return (below + 0.5 * static_cast<double>(equal - 1)) / static_cast<double>(negatives);
}

/// Instance accuracy and class accuracy (mean per-class recall over classes
/// present in the ground truth).
inline std::pair<double, double> accuracy(const std::vector<int>& preds, const std::vector<int>& gts,
                                          int n) {
    if (preds.empty() || preds.size() != gts.size()) throw InputError("accuracy: empty or mismatched lists");
    std::vector<int64_t> hit(n, 0), total(n, 0);
    int64_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= n || gts[i] < 0 || gts[i] >= n)
            throw InputError("accuracy: class id out of range");
        ++total[gts[i]];
        if (preds[i] == gts[i]) {
            ++correct;
            ++hit[gts[i]];
        }
    }
    double cls_sum = 0.0;
    int present = 0;
    for (int c = 0; c < n; ++c) {
        if (total[c] == 0) continue;
        ++present;
        cls_sum += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
    }
    return {static_cast<double>(correct) / static_cast<double>(preds.size()),
            present ? cls_sum / present : 0.0};
}

/// Row-wise normalization of an AAE score matrix into affinities in [0,1]:
/// the row minimum maps to 1, the maximum to 0; a constant row maps to 0.5.
inline Tensor affinity_from_aae(const Tensor& m) {
    if (m.rank() != 2) throw InputError("affinity: matrix must be 2-D");
    const int rows = m.dim(0), cols = m.dim(1);
    Tensor a({rows, cols});
    for (int i = 0; i < rows; ++i) {
        double lo = m[int64_t(i) * cols], hi = lo;
        for (int j = 1; j < cols; ++j) {
            lo = std::min(lo, m[int64_t(i) * cols + j]);
            hi = std::max(hi, m[int64_t(i) * cols + j]);
        }
        for (int j = 0; j < cols; ++j)
            a[int64_t(i) * cols + j] =
                hi > lo ? 1.0 - (m[int64_t(i) * cols + j] - lo) / (hi - lo) : 0.5;
    }
    return a;
}

}  // namespace mcn
