#pragma once

#include <string>
#include <vector>

#include "mcn/core/errors.hpp"
#include "mcn/core/tensor.hpp"

namespace mcn {

/// Per-frame ground-truth gaze annotation, pixel coordinates.
struct GazeGt {
    double x = 0.0;
    double y = 0.0;
    bool valid = false;
};

/// Predicted gaze location for one frame.
struct GazePoint {
    int frame_idx = 0;
    double x = 0.0;
    double y = 0.0;
};

/// One trimmed action clip: RGB stack, flow-image stack, per-frame gaze
/// ground truth, action label. Tensors are channel-first.
struct ClipSample {
    std::string clip_id;
    int action_id = -1;
    Tensor rgb;   // (3, N, H, W), values in [0,1]
    Tensor flow;  // (2, N, H, W), flow images in [0,255]
    std::vector<GazeGt> gaze_gt;

    int n_frames() const { return rgb.dim(1); }
    int height() const { return rgb.dim(2); }
    int width() const { return rgb.dim(3); }

    void check(int n_actions) const {
        if (rgb.rank() != 4 || rgb.dim(0) != 3) throw IntegrityError(clip_id + ": rgb must be (3,N,H,W)");
        if (flow.rank() != 4 || flow.dim(0) != 2)
            throw IntegrityError(clip_id + ": flow must be (2,N,H,W)");
        for (int d = 1; d < 4; ++d)
            if (rgb.dim(d) != flow.dim(d)) throw IntegrityError(clip_id + ": rgb/flow extents differ");
        if (static_cast<int>(gaze_gt.size()) != n_frames())
            throw IntegrityError(clip_id + ": gaze entries do not match frame count");
        for (const auto& g : gaze_gt) {
            if (!g.valid) continue;
            if (g.x < 0.0 || g.x >= width() || g.y < 0.0 || g.y >= height())
                throw IntegrityError(clip_id + ": valid gaze entry out of bounds");
        }
        if (action_id < 0 || action_id >= n_actions)
            throw IntegrityError(clip_id + ": action_id out of range");
    }
};

/// Index row describing a clip on disk.
struct ClipInfo {
    std::string clip_id;
    std::string split;  // "train" or "test"
    int action_id = -1;
    int n_frames = 0;
};

}  // namespace mcn
