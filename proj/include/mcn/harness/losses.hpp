#pragma once

#include "mcn/nn/layers.hpp"

namespace mcn {

struct GazeLossResult {
    double loss = 0.0;
    bool all_invalid = false;  // no supervised frame; loss contributed 0
};

/// Per-pixel binary cross-entropy of gaze-map logits against GT maps,
/// averaged over the pixels of valid frames only. Invalid frames contribute
/// nothing to loss or gradient.
inline GazeLossResult gaze_map_loss(const Tensor& logits, const Tensor& gt_maps,
                                    const Tensor& valid_frames, Tensor* g_logits) {
    if (logits.shape() != gt_maps.shape() || logits.rank() != 3)
        throw InputError("gaze loss: logits and GT maps must both be (N,H,W)");
    if (valid_frames.numel() != logits.dim(0))
        throw InputError("gaze loss: one validity flag per frame required");
    const int n = logits.dim(0);
    const int64_t plane = int64_t(logits.dim(1)) * logits.dim(2);
    int64_t active = 0;
    for (int f = 0; f < n; ++f)
        if (valid_frames[f] > 0.0) ++active;
    GazeLossResult res;
    if (g_logits && g_logits->shape() != logits.shape()) *g_logits = Tensor(logits.shape());
    if (active == 0) {
        if (g_logits) g_logits->fill(0.0);
        res.all_invalid = true;
        return res;
    }
    const double inv = 1.0 / static_cast<double>(active * plane);
    double loss = 0.0;
    for (int f = 0; f < n; ++f) {
        const bool on = valid_frames[f] > 0.0;
        const double* z = logits.data() + f * plane;
        const double* t = gt_maps.data() + f * plane;
        double* gz = g_logits ? g_logits->data() + f * plane : nullptr;
        for (int64_t i = 0; i < plane; ++i) {
            if (!on) {
                if (gz) gz[i] = 0.0;
                continue;
            }
            loss += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
            if (gz) gz[i] = (nn::sigmoid_scalar(z[i]) - t[i]) * inv;
        }
    }
    res.loss = loss * inv;
    return res;
}

/// Cross-entropy of class logits against the clip label.
inline double action_loss(const Tensor& logits, int label, Tensor* g_logits) {
    return nn::cross_entropy_with_logits(logits, label, g_logits);
}

}  // namespace mcn
