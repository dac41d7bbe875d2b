#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "mcn/core/errors.hpp"
#include "mcn/core/kvconfig.hpp"

namespace mcn {

struct ConvSpec {
    int out_c = 0;
    std::array<int, 3> kernel{3, 3, 3};
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> pad{1, 1, 1};
};

/// Full architecture description. Presets fix every width and stride; the
/// only free knob after choosing one is the number of action classes.
struct ModelConfig {
    std::string preset;
    int n_frames = 0;   // clip length fed to the network
    int height = 0;     // input crop height
    int width = 0;      // input crop width
    int resize_dim = 0;  // pre-crop resize edge for the data pipeline
    int n_actions = 0;

    std::vector<ConvSpec> encoder;  // shared geometry for both streams
    ConvSpec compact;               // maps fused features to the compact grid

    // gaze decoders: transposed-conv stages, then an implicit 1x1x1 conv to
    // one channel plus sigmoid
    std::vector<ConvSpec> decoder;

    // action-kernel generator
    int n_kernels = 0;                       // dynamic kernels per action map
    std::array<int, 3> kernel_dims{3, 3, 3};  // each dynamic kernel's extent
    int gen_mid = 0;                         // width of the first generator conv

    std::vector<int> fusion_widths;  // 3x3x3 conv widths; final 1x1x1 conv implied

    int pool_radius = 1;    // gaze window half-size on the compact grid
    int feat_width = 0;     // gaze-branch classifier width (non-gaze uses half)
    double sigma_gt = 0.0;  // std-dev of the ground-truth gaze gaussian, px
    double horizontal_fov_deg = 60.0;  // camera model for angular gaze error

    int encoder_out_channels() const { return encoder.empty() ? 0 : encoder.back().out_c; }

    void validate() const {
        if (n_frames <= 0 || height <= 0 || width <= 0) throw ConfigError("model: bad input geometry");
        if (resize_dim < std::max(height, width)) throw ConfigError("model: resize_dim below crop size");
        if (n_actions <= 0) throw ConfigError("model: n_actions must be positive");
        if (encoder.empty() || decoder.empty()) throw ConfigError("model: empty encoder or decoder");
        if (n_kernels <= 0 || gen_mid <= 0) throw ConfigError("model: bad kernel generator sizes");
        if (kernel_dims[0] % 2 == 0 || kernel_dims[1] % 2 == 0 || kernel_dims[2] % 2 == 0)
            throw ConfigError("model: dynamic kernel dims must be odd");
        if (feat_width % 2 != 0) throw ConfigError("model: feat_width must be even");
        if (pool_radius < 1) throw ConfigError("model: pool_radius must be >= 1");
        if (sigma_gt <= 0.0) throw ConfigError("model: sigma_gt must be positive");
        if (horizontal_fov_deg <= 0.0 || horizontal_fov_deg >= 180.0)
            throw ConfigError("model: horizontal_fov_deg must be in (0, 180)");
    }
};

/// Full-size network: 24-frame 224x224 clips, 1024-channel features on a
/// 6x14x14 grid, compact 3x7x7 grid, 64 dynamic kernels of extent 3x5x5.
inline ModelConfig paper_scale_config() {
    ModelConfig m;
    m.preset = "paper_scale";
    m.n_frames = 24;
    m.height = 224;
    m.width = 224;
    m.resize_dim = 256;
    m.n_actions = 106;
    m.encoder = {
        {32, {3, 3, 3}, {1, 2, 2}, {1, 1, 1}},
        {64, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}},
        {128, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}},
        {1024, {3, 3, 3}, {1, 2, 2}, {1, 1, 1}},
    };
    m.compact = {1024, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}};
    m.decoder = {
        {256, {4, 4, 4}, {2, 2, 2}, {1, 1, 1}},
        {64, {4, 4, 4}, {2, 2, 2}, {1, 1, 1}},
        {32, {3, 4, 4}, {1, 2, 2}, {1, 1, 1}},
        {16, {3, 4, 4}, {1, 2, 2}, {1, 1, 1}},
    };
    m.n_kernels = 64;
    m.kernel_dims = {3, 5, 5};
    m.gen_mid = 256;
    m.fusion_widths = {32, 32, 8};
    m.pool_radius = 1;
    m.feat_width = 256;
    m.sigma_gt = 18.0;
    return m;
}

/// Desk-scale network for the synthetic corpus: 8-frame 32x32 clips,
/// 64-channel features on a 2x8x8 grid, compact 1x4x4 grid.
inline ModelConfig toy_config() {
    ModelConfig m;
    m.preset = "toy";
    m.n_frames = 8;
    m.height = 32;
    m.width = 32;
    m.resize_dim = 36;
    m.n_actions = 20;
    m.encoder = {
        {16, {3, 3, 3}, {1, 2, 2}, {1, 1, 1}},
        {32, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}},
        {48, {3, 3, 3}, {2, 1, 1}, {1, 1, 1}},
        {64, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
    };
    m.compact = {64, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}};
    m.decoder = {
        {32, {4, 4, 4}, {2, 2, 2}, {1, 1, 1}},
        {16, {4, 4, 4}, {2, 2, 2}, {1, 1, 1}},
    };
    m.n_kernels = 16;
    m.kernel_dims = {3, 3, 3};
    m.gen_mid = 16;
    m.fusion_widths = {8, 8, 4};
    m.pool_radius = 1;
    m.feat_width = 32;
    m.sigma_gt = 18.0 * 32.0 / 224.0;
    return m;
}

/// Minimal network for finite-difference gradient checks; exercises every
/// layer type with as few parameters as practical.
inline ModelConfig micro_config() {
    ModelConfig m;
    m.preset = "micro";
    m.n_frames = 4;
    m.height = 32;
    m.width = 32;
    m.resize_dim = 36;
    m.n_actions = 4;
    m.encoder = {
        {8, {3, 3, 3}, {1, 2, 2}, {1, 1, 1}},
        {16, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}},
    };
    m.compact = {16, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}};
    m.decoder = {
        {8, {4, 4, 4}, {2, 2, 2}, {1, 1, 1}},
        {4, {3, 4, 4}, {1, 2, 2}, {1, 1, 1}},
    };
    m.n_kernels = 8;
    m.kernel_dims = {3, 3, 3};
    m.gen_mid = 4;
    m.fusion_widths = {4, 4, 2};
    m.pool_radius = 1;
    m.feat_width = 16;
    m.sigma_gt = 18.0 * 32.0 / 224.0;
    return m;
}

inline ModelConfig model_config_for(const std::string& preset) {
    if (preset == "paper_scale") return paper_scale_config();
    if (preset == "toy") return toy_config();
    if (preset == "micro") return micro_config();
    throw ConfigError("unknown model preset: " + preset);
}

/// Build from a flat config: `preset` picks the base, `n_actions` overrides.
inline ModelConfig model_config_from_kv(const KvConfig& kv) {
    ModelConfig m = model_config_for(kv.get_str("preset", "toy"));
    m.n_actions = kv.get_int("n_actions", m.n_actions);
    m.validate();
    return m;
}

}  // namespace mcn
