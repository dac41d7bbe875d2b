#pragma once

#include <sstream>

#include "mcn/core/preprocess.hpp"
#include "mcn/metrics/metrics.hpp"
#include "mcn/model/mcn.hpp"

namespace mcn {

struct InferenceConfig {
    double e_threshold = 0.1;  // degrees between successive gaze-point lists
    int max_iter = 10;
    bool flip_average = false;

    void validate() const {
        if (e_threshold <= 0.0) throw ConfigError("inference: e_threshold must be positive");
        if (max_iter < 1) throw ConfigError("inference: max_iter must be >= 1");
    }
};

struct InferenceIter {
    int iter = 0;
    double e = 0.0;
    Tensor l;                       // likelihood snapshot
    std::vector<GazePoint> points;  // per-frame argmax of the updated map
};

struct InferenceTrace {
    std::vector<GazePoint> initial_points;  // from the saliency-only map
    std::vector<InferenceIter> iterations;
    std::string terminated_by;  // "converged" or "max_iter"
};

struct InferenceResult {
    Tensor g;  // final gaze maps (N,H,W)
    Tensor l;  // final action likelihood
    InferenceTrace trace;
};

/// Per-frame argmax pixel; ties break to the smallest row-major index.
inline std::vector<GazePoint> predict_gaze_point(const Tensor& g) {
    if (g.rank() != 3) throw InputError("gaze maps must be (N,H,W)");
    const int n = g.dim(0), h = g.dim(1), w = g.dim(2);
    std::vector<GazePoint> pts(n);
    for (int f = 0; f < n; ++f) {
        const double* m = g.data() + int64_t(f) * h * w;
        int64_t best = 0;
        for (int64_t i = 1; i < int64_t(h) * w; ++i)
            if (m[i] > m[best]) best = i;
        pts[f] = {f, static_cast<double>(best % w), static_cast<double>(best / w)};
    }
    return pts;
}

/// Mirror a clip horizontally (RGB, flow with u reversed around the
/// zero-motion level, gaze x coordinates).
inline ClipSample hflip_clip(const ClipSample& in) {
    ClipSample out;
    out.clip_id = in.clip_id;
    out.action_id = in.action_id;
    const int w = in.width();
    auto mirror = [w](const Tensor& src) {
        Tensor dst(src.shape());
        const int rows = static_cast<int>(src.numel() / w);
        for (int r = 0; r < rows; ++r) {
            const double* s = src.data() + int64_t(r) * w;
            double* d = dst.data() + int64_t(r) * w;
            for (int c = 0; c < w; ++c) d[c] = s[w - 1 - c];
        }
        return dst;
    };
    out.rgb = mirror(in.rgb);
    out.flow = mirror(in.flow);
    const int64_t plane = out.flow.numel() / 2;
    for (int64_t i = 0; i < plane; ++i) out.flow[i] = 255.0 - out.flow[i];
    out.gaze_gt = in.gaze_gt;
    for (auto& gz : out.gaze_gt)
        if (gz.valid) gz.x = w - 1 - gz.x;
    return out;
}

inline Tensor hflip_maps(const Tensor& maps) {
    Tensor out(maps.shape());
    const int w = maps.dim(maps.rank() - 1);
    const int rows = static_cast<int>(maps.numel() / w);
    for (int r = 0; r < rows; ++r) {
        const double* s = maps.data() + int64_t(r) * w;
        double* d = out.data() + int64_t(r) * w;
        for (int c = 0; c < w; ++c) d[c] = s[w - 1 - c];
    }
    return out;
}

/// Shared per-clip encoder work: feature volume, compact grid, saliency map.
struct EncodedClip {
    Tensor f, fc, gs;
    CameraModel cam;
};

template <typename Model>
EncodedClip encode_clip(const ClipSample& clip, const Model& model) {
    EncodedClip enc;
    enc.cam = CameraModel{clip.width(), clip.height(), model.cfg.horizontal_fov_deg};
    enc.f = model.encoder.encode_eval(clip.rgb, clip.flow);
    enc.fc = model.encoder.encode_compact_eval(enc.f);
    enc.gs = model.predict_saliency(enc.f);
    return enc;
}

/// The alternating loop on an already-encoded clip.
template <typename Model>
InferenceResult joint_infer_encoded(const EncodedClip& enc, const Model& model,
                                    const InferenceConfig& icfg) {
    InferenceResult res;
    res.g = enc.gs;
    res.trace.initial_points = predict_gaze_point(enc.gs);
    std::vector<GazePoint> prev = res.trace.initial_points;
    res.trace.terminated_by = "max_iter";
    for (int it = 1; it <= icfg.max_iter; ++it) {
        res.l = model.classify_from_gaze(res.g, enc.fc);
        const Tensor ga = model.predict_action_gaze(res.l, enc.f);
        const Tensor g_new = model.fuse(enc.gs, ga);
        std::vector<GazePoint> pts = predict_gaze_point(g_new);
        const double e = aae_point_lists(prev, pts, enc.cam);
        res.trace.iterations.push_back({it, e, res.l, pts});
        res.g = g_new;
        prev = std::move(pts);
        if (e <= icfg.e_threshold) {
            res.trace.terminated_by = "converged";
            break;
        }
    }
    return res;
}

namespace detail {

template <typename Model>
InferenceResult joint_infer_once(const ClipSample& clip, const Model& model,
                                 const InferenceConfig& icfg) {
    return joint_infer_encoded(encode_clip(clip, model), model, icfg);
}

}  // namespace detail

/// Alternating joint inference: start from the saliency map, then repeatedly
/// classify, regenerate the action-conditioned map, and fuse, until the
/// predicted gaze points stop moving (angular change <= threshold) or the
/// iteration cap is hit. With flip_average the procedure also runs on the
/// mirrored clip and the un-mirrored outputs are averaged; the returned trace
/// is the unmirrored run's.
template <typename Model>
InferenceResult joint_infer(const ClipSample& clip, const Model& model, const InferenceConfig& icfg) {
    icfg.validate();
    InferenceResult res = detail::joint_infer_once(clip, model, icfg);
    if (icfg.flip_average) {
        const InferenceResult mirrored = detail::joint_infer_once(hflip_clip(clip), model, icfg);
        Tensor g2 = hflip_maps(mirrored.g);
        for (int64_t i = 0; i < res.g.numel(); ++i) res.g[i] = 0.5 * (res.g[i] + g2[i]);
        for (int64_t i = 0; i < res.l.numel(); ++i) res.l[i] = 0.5 * (res.l[i] + mirrored.l[i]);
    }
    return res;
}

/// Line-oriented trace record (exact round-trip via %.17g).
inline std::string serialize_trace(const InferenceTrace& trace) {
    std::ostringstream os;
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "initial_points";
    for (const auto& p : trace.initial_points) os << ' ' << num(p.x) << ' ' << num(p.y);
    os << '\n';
    for (const auto& it : trace.iterations) {
        os << "iter " << it.iter << " e " << num(it.e) << " l";
        for (int64_t i = 0; i < it.l.numel(); ++i) os << ' ' << num(it.l[i]);
        os << " points";
        for (const auto& p : it.points) os << ' ' << num(p.x) << ' ' << num(p.y);
        os << '\n';
    }
    os << "terminated_by " << trace.terminated_by << '\n';
    return os.str();
}

inline InferenceTrace parse_trace(const std::string& text) {
    InferenceTrace trace;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "initial_points") {
            double x, y;
            int idx = 0;
            while (ls >> x >> y) trace.initial_points.push_back({idx++, x, y});
        } else if (tag == "iter") {
            InferenceIter it;
            std::string word;
            ls >> it.iter >> word >> it.e >> word;  // consumes "e <val> l"
            std::vector<double> lv;
            while (ls >> word) {
                if (word == "points") break;
                lv.push_back(std::stod(word));
            }
            it.l = Tensor({static_cast<int>(lv.size())});
            for (size_t i = 0; i < lv.size(); ++i) it.l[i] = lv[i];
            double x, y;
            int idx = 0;
            while (ls >> x >> y) it.points.push_back({idx++, x, y});
            trace.iterations.push_back(std::move(it));
        } else if (tag == "terminated_by") {
            ls >> trace.terminated_by;
        }
    }
    return trace;
}

/// Recompute every recorded e from the stored point snapshots.
inline std::vector<double> replay_trace_errors(const InferenceTrace& trace, const CameraModel& cam) {
    std::vector<double> errs;
    const std::vector<GazePoint>* prev = &trace.initial_points;
    for (const auto& it : trace.iterations) {
        errs.push_back(aae_point_lists(*prev, it.points, cam));
        prev = &it.points;
    }
    return errs;
}

}  // namespace mcn
