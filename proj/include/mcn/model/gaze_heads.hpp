#pragma once

#include "mcn/nn/blocks.hpp"

namespace mcn {

/// Upsampling decoder: transposed-conv blocks back to input resolution, then
/// a 1x1x1 conv to a single channel. Emits pre-sigmoid logits shaped (N,H,W);
/// callers apply the sigmoid (training losses consume logits directly).
class GazeDecoder {
public:
    GazeDecoder() = default;
    GazeDecoder(int in_c, const ModelConfig& cfg, Rng& rng) {
        int c = in_c;
        for (const auto& spec : cfg.decoder) {
            blocks_.emplace_back(c, spec, rng);
            c = spec.out_c;
        }
        head_ = nn::Conv3d(c, 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, rng);
    }

    struct Cache {
        std::vector<nn::TConvBlock::Cache> blocks;
        nn::Conv3d::Cache head;
    };

    Tensor forward(const Tensor& f, Cache* cache, bool train) {
        if (cache) cache->blocks.resize(blocks_.size());
        Tensor x = f;
        for (size_t i = 0; i < blocks_.size(); ++i)
            x = blocks_[i].forward(x, cache ? &cache->blocks[i] : nullptr, train);
        x = head_.forward(x, cache ? &cache->head : nullptr);
        return x.reshaped({x.dim(1), x.dim(2), x.dim(3)});
    }

    Tensor forward_eval(const Tensor& f) const {
        Tensor x = f;
        for (const auto& blk : blocks_) x = blk.forward_eval(x);
        x = head_.forward(x, nullptr);
        return x.reshaped({x.dim(1), x.dim(2), x.dim(3)});
    }

    Tensor backward(const Tensor& g_logits, Cache& cache) {
        Tensor g = g_logits.reshaped({1, g_logits.dim(0), g_logits.dim(1), g_logits.dim(2)});
        g = head_.backward(g, cache.head);
        for (size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(g, cache.blocks[i]);
        return g;
    }

    void visit_params(const std::string& prefix, const nn::ParamVisitor& v) {
        for (size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].visit_params(prefix + ".up" + std::to_string(i), v);
        head_.visit_params(prefix + ".head", v);
    }
    void visit_buffers(const std::string& prefix, const nn::BufferVisitor& v) {
        for (size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].visit_buffers(prefix + ".up" + std::to_string(i), v);
    }

private:
    std::vector<nn::TConvBlock> blocks_;
    nn::Conv3d head_;
};

/// Maps an action likelihood to a bank of dynamic kernels: a fully connected
/// layer to a (k, k_t, k_h, k_w) latent, then two shared 3D convolutions
/// applied to each of the k single-channel latent volumes, widening them to
/// the feature channel count.
class KernelGenerator {
public:
    KernelGenerator() = default;
    KernelGenerator(const ModelConfig& cfg, Rng& rng)
        : n_(cfg.n_actions),
          k_(cfg.n_kernels),
          kd_(cfg.kernel_dims),
          fc_(cfg.n_actions, cfg.n_kernels * cfg.kernel_dims[0] * cfg.kernel_dims[1] * cfg.kernel_dims[2],
              rng),
          conv1_(1, cfg.gen_mid, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, rng),
          conv2_(cfg.gen_mid, cfg.encoder_out_channels(), {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, rng) {}

    struct Cache {
        nn::Linear::Cache fc;
        std::vector<nn::Conv3d::Cache> c1, c2;
        std::vector<Tensor> relu_mask;
    };

    /// K shape (k, c, k_t, k_h, k_w); deterministic in (l, params).
    Tensor forward(const Tensor& l, Cache* cache) const {
        if (l.rank() != 1 || l.dim(0) != n_)
            throw InputError("kernel generator: likelihood must have length " + std::to_string(n_));
        const Tensor latent = fc_.forward(l, cache ? &cache->fc : nullptr);
        const int64_t vol = int64_t(kd_[0]) * kd_[1] * kd_[2];
        const int c = conv2_out_channels();
        Tensor bank({k_, c, kd_[0], kd_[1], kd_[2]});
        if (cache) {
            cache->c1.resize(k_);
            cache->c2.resize(k_);
            cache->relu_mask.resize(k_);
        }
        for (int i = 0; i < k_; ++i) {
            Tensor xi({1, kd_[0], kd_[1], kd_[2]});
            std::copy(latent.data() + i * vol, latent.data() + (i + 1) * vol, xi.data());
            Tensor h = conv1_.forward(xi, cache ? &cache->c1[i] : nullptr);
            h = nn::relu(h, cache ? &cache->relu_mask[i] : nullptr);
            Tensor yi = conv2_.forward(h, cache ? &cache->c2[i] : nullptr);
            std::copy(yi.data(), yi.data() + yi.numel(), bank.data() + int64_t(i) * c * vol);
        }
        return bank;
    }

    /// Returns the gradient with respect to l; conv gradients accumulate over
    /// the k latent volumes since the layers are shared across the bank.
    Tensor backward(const Tensor& g_bank, Cache& cache) {
        const int64_t vol = int64_t(kd_[0]) * kd_[1] * kd_[2];
        const int c = conv2_out_channels();
        Tensor g_latent({k_ * static_cast<int>(vol)});
        for (int i = 0; i < k_; ++i) {
            Tensor gyi({c, kd_[0], kd_[1], kd_[2]});
            std::copy(g_bank.data() + int64_t(i) * c * vol, g_bank.data() + int64_t(i + 1) * c * vol,
                      gyi.data());
            Tensor g = conv2_.backward(gyi, cache.c2[i]);
            g = nn::relu_backward(g, cache.relu_mask[i]);
            g = conv1_.backward(g, cache.c1[i]);
            std::copy(g.data(), g.data() + vol, g_latent.data() + i * vol);
        }
        return fc_.backward(g_latent, cache.fc);
    }

    void visit_params(const std::string& prefix, const nn::ParamVisitor& v) {
        fc_.visit_params(prefix + ".fc", v);
        conv1_.visit_params(prefix + ".conv1", v);
        conv2_.visit_params(prefix + ".conv2", v);
    }

private:
    int conv2_out_channels() const { return conv2_.weight().dim(0); }

    int n_ = 0, k_ = 0;
    std::array<int, 3> kd_{3, 3, 3};
    nn::Linear fc_;
    nn::Conv3d conv1_, conv2_;
};

/// F_tilde = K (*) F: stride-1 convolution with shape-preserving symmetric
/// zero padding and no bias, so the decoder contract is stable across k.
inline nn::ConvGeom action_kernel_geom(const Tensor& bank) {
    const std::array<int, 3> kd{bank.dim(2), bank.dim(3), bank.dim(4)};
    if (kd[0] % 2 == 0 || kd[1] % 2 == 0 || kd[2] % 2 == 0)
        throw ConfigError("dynamic kernels must have odd extents for symmetric padding");
    return nn::ConvGeom{kd, {1, 1, 1}, {(kd[0] - 1) / 2, (kd[1] - 1) / 2, (kd[2] - 1) / 2}};
}

inline Tensor apply_action_kernels(const Tensor& bank, const Tensor& f) {
    if (bank.rank() != 5 || f.rank() != 4 || bank.dim(1) != f.dim(0))
        throw ConfigError("dynamic conv: kernel-bank channels must match feature channels");
    return nn::conv3d_forward(f, bank, nullptr, action_kernel_geom(bank));
}

/// Gradient with respect to the kernel bank (the bank acts as the weights).
inline Tensor apply_action_kernels_backward_bank(const Tensor& f, const Tensor& gy,
                                                 const Tensor& bank) {
    Tensor g_bank(bank.shape());
    nn::conv3d_backward_weights(f, gy, action_kernel_geom(bank), g_bank, nullptr);
    return g_bank;
}

/// Gradient with respect to the feature map.
inline Tensor apply_action_kernels_backward_input(const Tensor& gy, const Tensor& bank,
                                                  const Tensor& f) {
    return nn::conv3d_backward_data(gy, bank, action_kernel_geom(bank),
                                    {f.dim(0), f.dim(1), f.dim(2), f.dim(3)});
}

/// Late fusion: the two gaze maps stack into a 2-channel volume, pass through
/// per-frame 3x3 conv blocks and a final 1x1x1 conv. Emits logits (N,H,W).
class FusionNet {
public:
    FusionNet() = default;
    FusionNet(const ModelConfig& cfg, Rng& rng) {
        int c = 2;
        for (int width : cfg.fusion_widths) {
            ConvSpec spec{width, {1, 3, 3}, {1, 1, 1}, {0, 1, 1}};
            blocks_.emplace_back(c, spec, rng);
            c = width;
        }
        head_ = nn::Conv3d(c, 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, rng);
    }

    struct Cache {
        std::vector<nn::ConvBlock::Cache> blocks;
        nn::Conv3d::Cache head;
    };

    Tensor forward(const Tensor& gs, const Tensor& ga, Cache* cache, bool train) {
        Tensor x = stack(gs, ga);
        if (cache) cache->blocks.resize(blocks_.size());
        for (size_t i = 0; i < blocks_.size(); ++i)
            x = blocks_[i].forward(x, cache ? &cache->blocks[i] : nullptr, train);
        x = head_.forward(x, cache ? &cache->head : nullptr);
        return x.reshaped({x.dim(1), x.dim(2), x.dim(3)});
    }

    Tensor forward_eval(const Tensor& gs, const Tensor& ga) const {
        Tensor x = stack(gs, ga);
        for (const auto& blk : blocks_) x = blk.forward_eval(x);
        x = head_.forward(x, nullptr);
        return x.reshaped({x.dim(1), x.dim(2), x.dim(3)});
    }

    void backward(const Tensor& g_logits, Cache& cache) {
        Tensor g = g_logits.reshaped({1, g_logits.dim(0), g_logits.dim(1), g_logits.dim(2)});
        g = head_.backward(g, cache.head);
        for (size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(g, cache.blocks[i]);
    }

    void visit_params(const std::string& prefix, const nn::ParamVisitor& v) {
        for (size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].visit_params(prefix + ".conv" + std::to_string(i), v);
        head_.visit_params(prefix + ".head", v);
    }
    void visit_buffers(const std::string& prefix, const nn::BufferVisitor& v) {
        for (size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].visit_buffers(prefix + ".conv" + std::to_string(i), v);
    }

private:
    static Tensor stack(const Tensor& gs, const Tensor& ga) {
        if (gs.shape() != ga.shape() || gs.rank() != 3)
            throw InputError("fusion: gaze maps must share shape (N,H,W)");
        Tensor x({2, gs.dim(0), gs.dim(1), gs.dim(2)});
        std::copy(gs.data(), gs.data() + gs.numel(), x.data());
        std::copy(ga.data(), ga.data() + ga.numel(), x.data() + gs.numel());
        return x;
    }

    std::vector<nn::ConvBlock> blocks_;
    nn::Conv3d head_;
};

}  // namespace mcn
