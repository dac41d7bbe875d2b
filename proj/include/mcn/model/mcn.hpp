#pragma once

#include "mcn/model/action_head.hpp"
#include "mcn/model/encoder.hpp"
#include "mcn/model/gaze_heads.hpp"

namespace mcn {

/// Shapes implied by a ModelConfig, checked once at construction.
struct ModelDims {
    int feat_c = 0;
    std::array<int, 3> feat{};         // F (t,h,w)
    std::array<int, 3> compact{};      // F' (t',h',w')
    std::array<int, 3> pool_kernel{};  // gaze-map pooling (N/t', H/h', W/w')
};

inline ModelDims compute_dims(const ModelConfig& cfg) {
    ModelDims d;
    std::array<int, 3> cur{cfg.n_frames, cfg.height, cfg.width};
    for (const auto& spec : cfg.encoder) {
        nn::ConvGeom g{spec.kernel, spec.stride, spec.pad};
        cur = g.out_dims(cur);
    }
    d.feat = cur;
    d.feat_c = cfg.encoder_out_channels();
    {
        nn::ConvGeom g{cfg.compact.kernel, cfg.compact.stride, cfg.compact.pad};
        d.compact = g.out_dims(cur);
    }
    // the decoders must land exactly back on the input geometry
    std::array<int, 3> up = d.feat;
    for (const auto& spec : cfg.decoder) {
        nn::ConvGeom g{spec.kernel, spec.stride, spec.pad};
        up = g.transpose_out_dims(up);
    }
    if (up[0] != cfg.n_frames || up[1] != cfg.height || up[2] != cfg.width)
        throw ConfigError("decoder spec does not reproduce the input geometry");
    const std::array<int, 3> full{cfg.n_frames, cfg.height, cfg.width};
    for (int i = 0; i < 3; ++i) {
        if (full[i] % d.compact[i] != 0)
            throw ConfigError("gaze maps not divisible onto the compact grid");
        d.pool_kernel[i] = full[i] / d.compact[i];
    }
    // a radius-r window must never swallow the whole grid
    if (2 * cfg.pool_radius + 1 >= d.compact[1] && 2 * cfg.pool_radius + 1 >= d.compact[2])
        throw ConfigError("pool radius leaves no non-gaze region on the compact grid");
    return d;
}

/// The assembled network. Construction is deterministic in (config, seed);
/// parameters are reachable by name through the visitors, in a fixed order.
class McnModel {
public:
    McnModel() = default;
    McnModel(const ModelConfig& config, uint64_t seed) : cfg(config), dims(compute_dims(config)) {
        cfg.validate();
        Rng rng(seed);
        encoder = TwoStreamEncoder(cfg, rng);
        saliency_dec = GazeDecoder(cfg.encoder_out_channels(), cfg, rng);
        kgen = KernelGenerator(cfg, rng);
        action_dec = GazeDecoder(cfg.n_kernels, cfg, rng);
        fusion = FusionNet(cfg, rng);
        classifier = ActionClassifier(cfg.encoder_out_channels(), cfg.feat_width, cfg.n_actions, rng);
    }

    ModelConfig cfg;
    ModelDims dims;
    TwoStreamEncoder encoder;
    GazeDecoder saliency_dec;
    KernelGenerator kgen;
    GazeDecoder action_dec;
    FusionNet fusion;
    ActionClassifier classifier;

    // --- inference-path conveniences (const, thread-safe) ---

    Tensor predict_saliency(const Tensor& f) const {
        return nn::sigmoid(saliency_dec.forward_eval(f));
    }

    Tensor predict_action_gaze(const Tensor& l, const Tensor& f) const {
        return nn::sigmoid(action_dec.forward_eval(apply_action_kernels(kgen.forward(l, nullptr), f)));
    }

    Tensor fuse(const Tensor& gs, const Tensor& ga) const {
        return nn::sigmoid(fusion.forward_eval(gs, ga));
    }

    /// Classify from a gaze map: pool it onto the compact grid, take per-slice
    /// argmax cells, two-way pool F', run the classifier. Returns the softmax
    /// likelihood.
    Tensor classify_from_gaze(const Tensor& g, const Tensor& f_compact) const {
        return classify_from_gaze_mode(g, f_compact, PoolMode::standard);
    }

    /// Same path with the pooling strategy swapped out (ablation variants).
    Tensor classify_from_gaze_mode(const Tensor& g, const Tensor& f_compact, PoolMode mode) const {
        Tensor v_g, v_n;
        bool drop_non_gaze = false;
        switch (mode) {
            case PoolMode::global:
                global_pool(f_compact, v_g, v_n);
                break;
            case PoolMode::center: {
                std::vector<GazeCell> cells(dims.compact[0],
                                            GazeCell{dims.compact[2] / 2, dims.compact[1] / 2});
                two_way_pool(f_compact, cells, cfg.pool_radius, v_g, v_n);
                break;
            }
            case PoolMode::soft: {
                const PooledGaze pg = extract_gaze_points(g, dims.compact);
                soft_two_way_pool(f_compact, pg.pooled, v_g, v_n);
                break;
            }
            case PoolMode::gaze_only:
                drop_non_gaze = true;
                [[fallthrough]];
            case PoolMode::standard: {
                const PooledGaze pg = extract_gaze_points(g, dims.compact);
                two_way_pool(f_compact, pg.cells, cfg.pool_radius, v_g, v_n);
                break;
            }
        }
        return nn::softmax(classifier.forward(v_g, v_n, nullptr, drop_non_gaze));
    }

    void visit_params(const nn::ParamVisitor& v) {
        encoder.visit_params("encoder", v);
        saliency_dec.visit_params("saliency", v);
        kgen.visit_params("kgen", v);
        action_dec.visit_params("action_decoder", v);
        fusion.visit_params("fusion", v);
        classifier.visit_params("classifier", v);
    }

    void visit_buffers(const nn::BufferVisitor& v) {
        encoder.visit_buffers("encoder", v);
        saliency_dec.visit_buffers("saliency", v);
        action_dec.visit_buffers("action_decoder", v);
        fusion.visit_buffers("fusion", v);
    }
};

}  // namespace mcn
