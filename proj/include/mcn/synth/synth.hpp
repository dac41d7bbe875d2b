#pragma once

#include <filesystem>

#include "mcn/core/dataset.hpp"
#include "mcn/core/kvconfig.hpp"
#include "mcn/core/parallel.hpp"
#include "mcn/core/rng.hpp"

namespace mcn {

/// Generator parameters for the synthetic corpus. Classes are verb x noun
/// pairs: the noun picks which colored blob the gaze tracks, the verb picks
/// the target's motion direction. Distractor blobs are at least as bright as
/// the target and move along random canonical directions, so neither
/// saliency nor motion alone identifies the target.
struct SynthSpec {
    int n_verbs = 4;
    int n_nouns = 5;
    int clips_per_class = 40;
    int n_frames = 8;
    int height = 36;  // render size; the training pipeline crops below this
    int width = 36;
    double blob_radius = 3.0;
    double distractor_salience = 1.25;  // brightness multiplier upper bound
    double gaze_jitter = 1.0;           // px around the target center
    double motion_mag = 2.0;            // px/frame
    double train_fraction = 0.75;
    uint64_t seed = 1;

    int n_classes() const { return n_verbs * n_nouns; }

    void validate() const {
        if (n_classes() < 2) throw InputError("synth: need at least 2 classes");
        if (n_nouns < 2) throw InputError("synth: need at least one distractor blob");
        if (n_verbs < 1 || clips_per_class < 1 || n_frames < 1) throw InputError("synth: bad counts");
        if (gaze_jitter >= std::min(height, width) / 4.0)
            throw InputError("synth: gaze jitter too large for the frame");
        if (blob_radius <= 0.0 || motion_mag < 0.0) throw InputError("synth: bad geometry");
        if (distractor_salience < 1.0) throw InputError("synth: salience multiplier must be >= 1");
        if (train_fraction <= 0.0 || train_fraction >= 1.0)
            throw InputError("synth: train_fraction must be in (0,1)");
    }

    static SynthSpec from_kv(const KvConfig& kv) {
        SynthSpec s;
        s.n_verbs = kv.get_int("n_verbs", s.n_verbs);
        s.n_nouns = kv.get_int("n_nouns", s.n_nouns);
        s.clips_per_class = kv.get_int("clips_per_class", s.clips_per_class);
        s.n_frames = kv.get_int("n_frames", s.n_frames);
        s.height = kv.get_int("height", s.height);
        s.width = kv.get_int("width", s.width);
        s.blob_radius = kv.get_double("blob_radius", s.blob_radius);
        s.distractor_salience = kv.get_double("distractor_salience", s.distractor_salience);
        s.gaze_jitter = kv.get_double("gaze_jitter", s.gaze_jitter);
        s.motion_mag = kv.get_double("motion_mag", s.motion_mag);
        s.train_fraction = kv.get_double("train_fraction", s.train_fraction);
        s.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int>(s.seed)));
        s.validate();
        return s;
    }
};

/// Ground-truth construction record for one clip, kept in memory for
/// property tests (never written to disk).
struct SynthClipMeta {
    ClipInfo info;
    int verb = 0, noun = 0;
    std::vector<std::array<double, 2>> centers0;    // per-noun blob center, frame 0
    std::vector<std::array<double, 2>> velocities;  // per-noun px/frame
    std::vector<double> brightness;                 // per-noun multiplier
};

struct SynthResult {
    std::vector<SynthClipMeta> clips;
};

namespace synth_detail {

inline std::array<double, 3> noun_color(int noun, int n_nouns) {
    const double h = 6.0 * noun / n_nouns;  // hue sector
    const int i = static_cast<int>(h) % 6;
    const double f = h - static_cast<int>(h);
    const double v = 0.8, p = 0.0;
    const double q = v * (1.0 - f), t = v * f;
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

inline std::array<double, 2> verb_direction(int verb, int n_verbs) {
    const double theta = 2.0 * std::numbers::pi * verb / n_verbs;
    return {std::cos(theta), std::sin(theta)};
}

inline double torus_delta(double a, double b, double extent) {
    double d = std::abs(a - b);
    return std::min(d, extent - d);
}

inline double wrap(double v, double extent) {
    v = std::fmod(v, extent);
    return v < 0.0 ? v + extent : v;
}

/// Blob layout for one clip: wrap-around rejection sampling keeps centers
/// separated so blobs stay distinguishable.
inline std::vector<std::array<double, 2>> place_blobs(int count, int h, int w, double radius, Rng& rng) {
    std::vector<std::array<double, 2>> centers;
    const double min_sep = 2.0 * radius + 2.0;
    for (int i = 0; i < count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const std::array<double, 2> c{rng.uniform(0.0, w), rng.uniform(0.0, h)};
            placed = true;
            for (const auto& o : centers) {
                const double dx = torus_delta(c[0], o[0], w);
                const double dy = torus_delta(c[1], o[1], h);
                if (dx * dx + dy * dy < min_sep * min_sep) {
                    placed = false;
                    break;
                }
            }
            if (placed) centers.push_back(c);
        }
        if (!placed) throw InputError("synth: blob packing failed; frame too small for blob count");
    }
    return centers;
}

struct RenderedClip {
    std::vector<png::Image> frames;
    Tensor raw_flow;  // (N,H,W,2)
    std::vector<GazeGt> gaze;
};

inline RenderedClip render_clip(const SynthSpec& spec, const SynthClipMeta& meta, Rng& rng) {
    const int h = spec.height, w = spec.width, n = spec.n_frames;
    RenderedClip out;
    out.raw_flow = Tensor({n, h, w, 2});
    out.gaze.resize(n);

    // static background speckle, shared by every frame
    std::vector<double> background(size_t(h) * w);
    for (auto& v : background) v = rng.uniform(0.05, 0.15);

    // jitter draws happen before rendering so frame loops stay deterministic
    std::vector<std::array<double, 2>> jitter(n);
    for (int t = 0; t < n; ++t)
        jitter[t] = {rng.normal(0.0, spec.gaze_jitter), rng.normal(0.0, spec.gaze_jitter)};

    const int blobs = spec.n_nouns;
    for (int t = 0; t < n; ++t) {
        png::Image img;
        img.width = w;
        img.height = h;
        img.channels = 3;
        img.pixels.resize(size_t(h) * w * 3);

        std::vector<std::array<double, 2>> centers(blobs);
        for (int b = 0; b < blobs; ++b)
            centers[b] = {wrap(meta.centers0[b][0] + t * meta.velocities[b][0], w),
                          wrap(meta.centers0[b][1] + t * meta.velocities[b][1], h)};

        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double r = background[size_t(y) * w + x];
                double g = r, bcol = r;
                double fu = 0.0, fv = 0.0;
                bool claimed = false;
                // first blob covering the pixel wins both color and motion
                for (int b = 0; b < blobs; ++b) {
                    const double dx = torus_delta(x + 0.5, centers[b][0], w);
                    const double dy = torus_delta(y + 0.5, centers[b][1], h);
                    const double dist = std::sqrt(dx * dx + dy * dy);
                    const double alpha = std::clamp(spec.blob_radius + 0.5 - dist, 0.0, 1.0);
                    if (alpha <= 0.0) continue;
                    const auto col = noun_color(b, spec.n_nouns);
                    const double bright = meta.brightness[b];
                    r = r * (1 - alpha) + std::min(1.0, col[0] * bright) * alpha;
                    g = g * (1 - alpha) + std::min(1.0, col[1] * bright) * alpha;
                    bcol = bcol * (1 - alpha) + std::min(1.0, col[2] * bright) * alpha;
                    if (alpha >= 0.5 && !claimed) {
                        claimed = true;
                        fu = meta.velocities[b][0];
                        fv = meta.velocities[b][1];
                    }
                }
                uint8_t* px = img.pixels.data() + (size_t(y) * w + x) * 3;
                px[0] = static_cast<uint8_t>(std::lround(std::clamp(r, 0.0, 1.0) * 255.0));
                px[1] = static_cast<uint8_t>(std::lround(std::clamp(g, 0.0, 1.0) * 255.0));
                px[2] = static_cast<uint8_t>(std::lround(std::clamp(bcol, 0.0, 1.0) * 255.0));
                double* fp = out.raw_flow.data() + ((int64_t(t) * h + y) * w + x) * 2;
                fp[0] = fu;
                fp[1] = fv;
            }

        const double tx = wrap(meta.centers0[meta.noun][0] + t * meta.velocities[meta.noun][0], w);
        const double ty = wrap(meta.centers0[meta.noun][1] + t * meta.velocities[meta.noun][1], h);
        GazeGt gz;
        gz.x = std::clamp(tx + jitter[t][0], 0.0, w - 1.0);
        gz.y = std::clamp(ty + jitter[t][1], 0.0, h - 1.0);
        gz.valid = true;
        out.gaze[t] = gz;
        out.frames.push_back(std::move(img));
    }
    return out;
}

}  // namespace synth_detail

/// Derive the full construction record for one clip index. Pure in
/// (spec, index): generation and tests share it.
inline SynthClipMeta synth_clip_meta(const SynthSpec& spec, int index) {
    SynthClipMeta meta;
    const int cls = index % spec.n_classes();
    const int within = index / spec.n_classes();
    meta.verb = cls / spec.n_nouns;
    meta.noun = cls % spec.n_nouns;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05d", index);
    meta.info.clip_id = buf;
    meta.info.action_id = cls;
    meta.info.n_frames = spec.n_frames;
    const int train_per_class = static_cast<int>(std::lround(spec.clips_per_class * spec.train_fraction));
    meta.info.split = within < train_per_class ? "train" : "test";

    Rng rng = Rng::derive(spec.seed, static_cast<uint64_t>(index));
    meta.centers0 =
        synth_detail::place_blobs(spec.n_nouns, spec.height, spec.width, spec.blob_radius, rng);
    meta.velocities.resize(spec.n_nouns);
    meta.brightness.resize(spec.n_nouns);
    for (int b = 0; b < spec.n_nouns; ++b) {
        const bool is_target = b == meta.noun;
        const int verb = is_target ? meta.verb : rng.uniform_int(0, spec.n_verbs - 1);
        const auto dir = synth_detail::verb_direction(verb, spec.n_verbs);
        meta.velocities[b] = {dir[0] * spec.motion_mag, dir[1] * spec.motion_mag};
        meta.brightness[b] = is_target ? 1.0 : rng.uniform(1.0, spec.distractor_salience);
    }
    return meta;
}

/// Render one clip's pixel and flow data (used by generation and by tests
/// that need in-memory samples without disk I/O).
inline synth_detail::RenderedClip synth_render(const SynthSpec& spec, const SynthClipMeta& meta,
                                               int index) {
    Rng rng = Rng::derive(spec.seed ^ 0x9e3779b97f4a7c15ull, static_cast<uint64_t>(index));
    return synth_detail::render_clip(spec, meta, rng);
}

/// Generate the corpus under root: every clip directory plus index.tsv.
/// Byte-identical for identical (spec, root contents).
inline SynthResult generate_dataset(const SynthSpec& spec, const std::string& root, int workers = 0) {
    spec.validate();
    std::filesystem::create_directories(root);
    const int total = spec.n_classes() * spec.clips_per_class;
    SynthResult res;
    res.clips.resize(total);
    parallel_for(
        total,
        [&](int64_t i) {
            const int idx = static_cast<int>(i);
            SynthClipMeta meta = synth_clip_meta(spec, idx);
            const synth_detail::RenderedClip rc = synth_render(spec, meta, idx);
            write_clip(root, meta.info.clip_id, rc.frames, rc.raw_flow, rc.gaze);
            res.clips[i] = std::move(meta);
        },
        workers);
    std::vector<ClipInfo> infos(total);
    for (int i = 0; i < total; ++i) infos[i] = res.clips[i].info;
    write_index(root, infos);
    return res;
}

}  // namespace mcn
