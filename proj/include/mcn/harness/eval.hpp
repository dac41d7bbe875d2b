#pragma once

#include <map>
#include <optional>

#include "mcn/core/dataset.hpp"
#include "mcn/core/kvconfig.hpp"
#include "mcn/core/parallel.hpp"
#include "mcn/infer/inference.hpp"

namespace mcn {

/// Read-only view of a model with the pooling strategy swapped, so the
/// alternating inference loop runs unchanged under each ablation.
class VariantModel {
public:
    VariantModel(const McnModel& base, PoolMode mode)
        : cfg(base.cfg), encoder(base.encoder), base_(base), mode_(mode) {}

    const ModelConfig& cfg;
    const TwoStreamEncoder& encoder;

    Tensor predict_saliency(const Tensor& f) const { return base_.predict_saliency(f); }
    Tensor predict_action_gaze(const Tensor& l, const Tensor& f) const {
        return base_.predict_action_gaze(l, f);
    }
    Tensor fuse(const Tensor& gs, const Tensor& ga) const { return base_.fuse(gs, ga); }
    Tensor classify_from_gaze(const Tensor& g, const Tensor& fc) const {
        return base_.classify_from_gaze_mode(g, fc, mode_);
    }

private:
    const McnModel& base_;
    PoolMode mode_;
};

/// An evaluation variant: either the alternating loop with some pooling mode,
/// or a single-pass gaze source.
struct VariantSpec {
    std::string name;
    bool loop = false;
    PoolMode mode = PoolMode::standard;
};

inline const std::vector<VariantSpec>& eval_variants() {
    static const std::vector<VariantSpec> v = {
        {"full", true, PoolMode::standard},       // alternating loop, standard pooling
        {"saliency", false, PoolMode::standard},  // bottom-up map only
        {"action", false, PoolMode::standard},    // one top-down pass, no feedback
        {"action_gt", false, PoolMode::standard}, // top-down pass from the GT action
        {"wo_gaze", true, PoolMode::global},      // loop, classification ignores gaze
        {"center_bias", true, PoolMode::center},  // loop, gaze pinned to the center
        {"gaze_region", true, PoolMode::gaze_only},  // loop, non-gaze evidence dropped
        {"soft_gaze", true, PoolMode::soft},      // loop, map-weighted pooling
    };
    return v;
}

inline const VariantSpec& variant_by_name(const std::string& name) {
    for (const auto& v : eval_variants())
        if (v.name == name) return v;
    std::string known;
    for (const auto& v : eval_variants()) known += (known.empty() ? "" : ", ") + v.name;
    throw ConfigError("unknown eval variant '" + name + "' (known: " + known + ")");
}

struct EvalConfig {
    std::vector<std::string> variants{"full"};
    std::string split = "test";
    bool flip_average = false;
    double e_threshold = 0.1;
    int max_iter = 10;
    double fov = 0.0;  // horizontal FOV override in degrees (0 = model default)
    int workers = 0;   // 0 = hardware count
    int limit = 0;     // keep only the first N clips of the split (0 = all)

    void validate() const {
        if (variants.empty()) throw ConfigError("eval: at least one variant required");
        for (const auto& v : variants) variant_by_name(v);
        if (e_threshold <= 0.0) throw ConfigError("eval: e_threshold must be positive");
        if (max_iter < 1) throw ConfigError("eval: max_iter must be >= 1");
        if (fov < 0.0 || fov >= 180.0) throw ConfigError("eval: fov must be in [0, 180)");
        if (limit < 0) throw ConfigError("eval: limit must be non-negative");
    }

    static EvalConfig from_kv(const KvConfig& kv) {
        EvalConfig e;
        const std::string vs = kv.get_str("variants", "full");
        e.variants.clear();
        if (vs == "all") {
            for (const auto& v : eval_variants()) e.variants.push_back(v.name);
        } else {
            std::string cur;
            for (char c : vs + ",") {
                if (c == ',') {
                    if (!cur.empty()) e.variants.push_back(cur);
                    cur.clear();
                } else if (!std::isspace(static_cast<unsigned char>(c))) {
                    cur += c;
                }
            }
        }
        e.split = kv.get_str("split", e.split);
        e.flip_average = kv.get_int("flip_average", e.flip_average ? 1 : 0) != 0;
        e.e_threshold = kv.get_double("e_threshold", e.e_threshold);
        e.max_iter = kv.get_int("max_iter", e.max_iter);
        e.fov = kv.get_double("fov", e.fov);
        e.workers = kv.get_int("workers", e.workers);
        e.limit = kv.get_int("limit", e.limit);
        return e;
    }
};

struct FrameScore {
    int frame = 0;
    double pred_x = 0.0, pred_y = 0.0;
    double gt_x = 0.0, gt_y = 0.0;
    bool gt_valid = false;
    double aae_deg = 0.0;  // meaningful only when gt_valid
    double auc = 0.0;      // likewise
};

struct ClipScore {
    std::string clip_id;
    int action_gt = -1;
    int action_pred = -1;
    int iterations = 0;  // 0 for single-pass variants
    bool converged = false;
    std::vector<FrameScore> frames;
};

struct VariantResult {
    std::string name;
    bool loop = false;
    double aae_deg = 0.0;
    double auc = 0.0;
    double acc_instance = 0.0;
    double acc_class = 0.0;
    int64_t frames_scored = 0;
    double convergence_rate = 0.0;           // loop variants only
    std::map<int, int64_t> iteration_hist;   // loop variants only
    std::vector<ClipScore> clips;
};

struct EvalReport {
    std::string dataset_root;
    std::string fingerprint;
    std::string split;
    std::string preset;
    int n_actions = 0;
    EvalConfig config;
    std::vector<VariantResult> variants;
};

/// Recompute a variant's aggregate numbers from its per-clip records, so
/// every summary figure is reproducible from the dump alone.
inline void summarize_variant(VariantResult& vr, int n_actions) {
    AaeAccumulator aae;
    double auc_sum = 0.0;
    int64_t auc_n = 0;
    std::vector<int> preds, gts;
    int64_t conv = 0;
    vr.iteration_hist.clear();
    for (const auto& clip : vr.clips) {
        preds.push_back(clip.action_pred);
        gts.push_back(clip.action_gt);
        if (vr.loop) {
            ++vr.iteration_hist[clip.iterations];
            if (clip.converged) ++conv;
        }
        for (const auto& fr : clip.frames) {
            if (!fr.gt_valid) continue;
            aae.add(fr.aae_deg);
            auc_sum += fr.auc;
            ++auc_n;
        }
    }
    vr.aae_deg = aae.mean();
    vr.frames_scored = aae.count;
    vr.auc = auc_n ? auc_sum / static_cast<double>(auc_n) : 0.0;
    const auto [inst, cls] = accuracy(preds, gts, n_actions);
    vr.acc_instance = inst;
    vr.acc_class = cls;
    vr.convergence_rate =
        vr.loop && !vr.clips.empty() ? static_cast<double>(conv) / static_cast<double>(vr.clips.size()) : 0.0;
}

inline Tensor one_hot(int id, int n) {
    if (id < 0 || id >= n) throw InputError("one-hot: class id out of range");
    Tensor l({n});
    l[id] = 1.0;
    return l;
}

struct ClipVariantOutput {
    Tensor g;  // final gaze maps (N,H,W)
    Tensor l;  // final likelihood
    int iterations = 0;
    bool converged = false;
};

inline ClipVariantOutput run_variant_once(const McnModel& model, const VariantSpec& vs,
                                          const EncodedClip& enc, int action_gt,
                                          const InferenceConfig& icfg) {
    ClipVariantOutput out;
    if (vs.loop) {
        const VariantModel vm(model, vs.mode);
        InferenceResult r = joint_infer_encoded(enc, vm, icfg);
        out.g = std::move(r.g);
        out.l = std::move(r.l);
        out.iterations = static_cast<int>(r.trace.iterations.size());
        out.converged = r.trace.terminated_by == "converged";
    } else if (vs.name == "saliency") {
        out.g = enc.gs;
        out.l = model.classify_from_gaze(out.g, enc.fc);
    } else if (vs.name == "action") {
        const Tensor l0 = model.classify_from_gaze(enc.gs, enc.fc);
        out.g = model.predict_action_gaze(l0, enc.f);
        out.l = model.classify_from_gaze(out.g, enc.fc);
    } else {  // conditioned on the ground-truth action
        out.g = model.predict_action_gaze(one_hot(action_gt, model.cfg.n_actions), enc.f);
        out.l = model.classify_from_gaze(out.g, enc.fc);
    }
    return out;
}

/// Run one variant on a clip; when the mirrored encoding is supplied, the
/// un-mirrored outputs of both orientations are averaged.
inline ClipVariantOutput run_variant(const McnModel& model, const VariantSpec& vs,
                                     const EncodedClip& enc, const EncodedClip* enc_mirror,
                                     int action_gt, const InferenceConfig& icfg) {
    ClipVariantOutput out = run_variant_once(model, vs, enc, action_gt, icfg);
    if (enc_mirror) {
        const ClipVariantOutput m = run_variant_once(model, vs, *enc_mirror, action_gt, icfg);
        const Tensor gm = hflip_maps(m.g);
        for (int64_t i = 0; i < out.g.numel(); ++i) out.g[i] = 0.5 * (out.g[i] + gm[i]);
        for (int64_t i = 0; i < out.l.numel(); ++i) out.l[i] = 0.5 * (out.l[i] + m.l[i]);
    }
    return out;
}

inline int argmax_index(const Tensor& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.numel()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

inline ClipScore score_clip_variant(const ClipSample& s, const ClipVariantOutput& out,
                                    const CameraModel& cam) {
    ClipScore cs;
    cs.clip_id = s.clip_id;
    cs.action_gt = s.action_id;
    cs.action_pred = argmax_index(out.l);
    cs.iterations = out.iterations;
    cs.converged = out.converged;
    const std::vector<GazePoint> pts = predict_gaze_point(out.g);
    const int h = out.g.dim(1), w = out.g.dim(2);
    cs.frames.resize(pts.size());
    for (size_t f = 0; f < pts.size(); ++f) {
        FrameScore& fr = cs.frames[f];
        fr.frame = static_cast<int>(f);
        fr.pred_x = pts[f].x;
        fr.pred_y = pts[f].y;
        fr.gt_valid = s.gaze_gt[f].valid;
        if (!fr.gt_valid) continue;
        fr.gt_x = s.gaze_gt[f].x;
        fr.gt_y = s.gaze_gt[f].y;
        fr.aae_deg = angular_error_deg(fr.pred_x, fr.pred_y, fr.gt_x, fr.gt_y, cam);
        Tensor plane({h, w});
        std::copy(out.g.data() + int64_t(f) * h * w, out.g.data() + int64_t(f + 1) * h * w,
                  plane.data());
        fr.auc = auc_single_fixation(plane, fr.gt_x, fr.gt_y);
    }
    return cs;
}

/// Centered-window eval preparation for one clip.
inline ClipSample prepare_eval_sample(const ClipSample& raw, const ModelConfig& cfg) {
    Rng rng(0);  // unused on the eval path (no random crop, no flip)
    return augment_sample(temporal_window(raw, cfg.n_frames, nullptr), cfg.resize_dim, cfg.height,
                          rng, false);
}

inline EvalReport evaluate(const McnModel& model, const Dataset& data, const EvalConfig& ec) {
    ec.validate();
    std::vector<ClipInfo> clips = data.split(ec.split);
    if (clips.empty()) throw InputError("eval: split '" + ec.split + "' is empty");
    if (ec.limit > 0 && static_cast<int>(clips.size()) > ec.limit) clips.resize(ec.limit);

    std::vector<const VariantSpec*> specs;
    for (const auto& name : ec.variants) specs.push_back(&variant_by_name(name));
    const InferenceConfig icfg{ec.e_threshold, ec.max_iter, false};

    std::vector<std::vector<ClipScore>> scores(specs.size());
    for (auto& per_variant : scores) per_variant.resize(clips.size());

    parallel_for(
        static_cast<int64_t>(clips.size()),
        [&](int64_t i) {
            const ClipSample s = prepare_eval_sample(load_clip(data.root, clips[i]), model.cfg);
            EncodedClip enc = encode_clip(s, model);
            if (ec.fov > 0.0) enc.cam.horizontal_fov_deg = ec.fov;
            std::optional<EncodedClip> enc_m;
            if (ec.flip_average) {
                enc_m = encode_clip(hflip_clip(s), model);
                if (ec.fov > 0.0) enc_m->cam.horizontal_fov_deg = ec.fov;
            }
            for (size_t v = 0; v < specs.size(); ++v) {
                const ClipVariantOutput out =
                    run_variant(model, *specs[v], enc, enc_m ? &*enc_m : nullptr, s.action_id, icfg);
                scores[v][i] = score_clip_variant(s, out, enc.cam);
            }
        },
        ec.workers);

    EvalReport rep;
    rep.dataset_root = data.root;
    rep.fingerprint = dataset_fingerprint(data.root);
    rep.split = ec.split;
    rep.preset = model.cfg.preset;
    rep.n_actions = model.cfg.n_actions;
    rep.config = ec;
    for (size_t v = 0; v < specs.size(); ++v) {
        VariantResult vr;
        vr.name = specs[v]->name;
        vr.loop = specs[v]->loop;
        vr.clips = std::move(scores[v]);
        summarize_variant(vr, model.cfg.n_actions);
        rep.variants.push_back(std::move(vr));
    }
    return rep;
}

/// Cross-conditioning study: row i = clips of true class i, column j = mean
/// angular error of the gaze map generated under a forced one-hot action j.
/// Low error off the diagonal means the two actions share gaze behavior.
struct AffinityResult {
    std::vector<int> classes;  // row/column class ids, ascending
    Tensor aae;                // (m, m): row = fed one-hot label, column = true class of the clips
    Tensor affinity;           // row-normalized, diag-high when actions are distinct
    std::vector<int64_t> frames_per_class;
};

inline AffinityResult action_gaze_affinity(const McnModel& model, const Dataset& data,
                                           const std::string& split, int workers = 0,
                                           int limit = 0, int top_m = 0) {
    std::vector<ClipInfo> clips = data.split(split);
    if (clips.empty()) throw InputError("affinity: split '" + split + "' is empty");
    const int n = model.cfg.n_actions;

    std::vector<int> classes;
    {
        std::vector<int64_t> counts(n, 0);
        for (const auto& c : clips)
            if (c.action_id >= 0 && c.action_id < n) ++counts[c.action_id];
        for (int c = 0; c < n; ++c)
            if (counts[c] > 0) classes.push_back(c);
        if (classes.empty()) throw InputError("affinity: no labeled clips in split");
        if (top_m > 0 && static_cast<int>(classes.size()) > top_m) {
            std::stable_sort(classes.begin(), classes.end(),
                             [&](int a, int b) { return counts[a] > counts[b]; });
            classes.resize(top_m);
            std::sort(classes.begin(), classes.end());
        }
    }
    const int m = static_cast<int>(classes.size());
    std::vector<int> col_of(n, -1);
    for (int i = 0; i < m; ++i) col_of[classes[i]] = i;
    {
        std::vector<ClipInfo> kept;
        for (auto& c : clips)
            if (c.action_id >= 0 && c.action_id < n && col_of[c.action_id] >= 0)
                kept.push_back(std::move(c));
        clips = std::move(kept);
    }
    if (limit > 0 && static_cast<int>(clips.size()) > limit) clips.resize(limit);

    std::vector<Tensor> err_cols(clips.size());
    std::vector<int64_t> frame_counts(clips.size(), 0);
    parallel_for(
        static_cast<int64_t>(clips.size()),
        [&](int64_t i) {
            const ClipSample s = prepare_eval_sample(load_clip(data.root, clips[i]), model.cfg);
            const CameraModel cam{s.width(), s.height(), model.cfg.horizontal_fov_deg};
            const Tensor f = model.encoder.encode_eval(s.rgb, s.flow);
            Tensor col({m});
            int64_t valid = 0;
            for (int j = 0; j < m; ++j) {
                const Tensor g = model.predict_action_gaze(one_hot(classes[j], n), f);
                const std::vector<GazePoint> pts = predict_gaze_point(g);
                double sum = 0.0;
                int64_t cnt = 0;
                for (size_t fr = 0; fr < pts.size(); ++fr) {
                    if (!s.gaze_gt[fr].valid) continue;
                    sum += angular_error_deg(pts[fr].x, pts[fr].y, s.gaze_gt[fr].x, s.gaze_gt[fr].y, cam);
                    ++cnt;
                }
                col[j] = sum;
                valid = cnt;
            }
            err_cols[i] = std::move(col);
            frame_counts[i] = valid;
        },
        workers);

    Tensor err_sum({m, m});
    std::vector<int64_t> frames(m, 0);
    for (size_t i = 0; i < clips.size(); ++i) {
        const int c = col_of[clips[i].action_id];
        for (int j = 0; j < m; ++j) err_sum[int64_t(j) * m + c] += err_cols[i][j];
        frames[c] += frame_counts[i];
    }
    AffinityResult res;
    res.classes = std::move(classes);
    res.aae = Tensor({m, m});
    for (int j = 0; j < m; ++j)
        for (int c = 0; c < m; ++c)
            res.aae[int64_t(j) * m + c] =
                frames[c] ? err_sum[int64_t(j) * m + c] / static_cast<double>(frames[c]) : 0.0;
    res.affinity = affinity_from_aae(res.aae);
    res.frames_per_class = std::move(frames);
    return res;
}

/// Gaze map blended over an RGB frame as a dark-to-yellow ramp, for visual
/// inspection of predictions.
inline png::Image heatmap_overlay(const Tensor& rgb, int frame, const Tensor& g) {
    if (rgb.rank() != 4 || g.rank() != 3) throw InputError("overlay: rgb (3,N,H,W) and maps (N,H,W)");
    const int n = rgb.dim(1), h = rgb.dim(2), w = rgb.dim(3);
    if (frame < 0 || frame >= n) throw InputError("overlay: frame index out of range");
    png::Image img;
    img.width = w;
    img.height = h;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(h) * w * 3);
    const int64_t plane = int64_t(h) * w;
    for (int64_t i = 0; i < plane; ++i) {
        const double v = std::clamp(g[int64_t(frame) * plane + i], 0.0, 1.0);
        const double cr = std::min(1.0, 2.0 * v), cg = std::max(0.0, 2.0 * v - 1.0);
        const double alpha = 0.55 * v;
        for (int c = 0; c < 3; ++c) {
            const double base = rgb[(int64_t(c) * n + frame) * plane + i];
            const double over = c == 0 ? cr : (c == 1 ? cg : 0.0);
            const double out = base * (1.0 - alpha) + over * alpha;
            img.pixels[static_cast<size_t>(i) * 3 + c] =
                static_cast<uint8_t>(std::lround(std::clamp(out, 0.0, 1.0) * 255.0));
        }
    }
    return img;
}

}  // namespace mcn
