#pragma once

#include "mcn/nn/blocks.hpp"

namespace mcn {

/// Two 3D conv stacks (RGB and flow) fused by element-wise summation into F,
/// plus the deeper stride-2 block producing the compact grid F'. Each stream
/// keeps its own normalization statistics.
class TwoStreamEncoder {
public:
    TwoStreamEncoder() = default;
    TwoStreamEncoder(const ModelConfig& cfg, Rng& rng) {
        int in_c = 3;
        for (const auto& spec : cfg.encoder) {
            rgb_.emplace_back(in_c, spec, rng);
            in_c = spec.out_c;
        }
        in_c = 2;
        for (const auto& spec : cfg.encoder) {
            flow_.emplace_back(in_c, spec, rng);
            in_c = spec.out_c;
        }
        compact_ = nn::ConvBlock(cfg.encoder.back().out_c, cfg.compact, rng);
    }

    struct Cache {
        std::vector<nn::ConvBlock::Cache> rgb, flow;
    };

    /// F = Enc_rgb(rgb) + Enc_flow(flow / 255).
    Tensor encode(const Tensor& rgb, const Tensor& flow, Cache* cache, bool train) {
        check_inputs(rgb, flow);
        if (cache) {
            cache->rgb.resize(rgb_.size());
            cache->flow.resize(flow_.size());
        }
        Tensor a = rgb;
        for (size_t i = 0; i < rgb_.size(); ++i)
            a = rgb_[i].forward(a, cache ? &cache->rgb[i] : nullptr, train);
        Tensor b = flow * (1.0 / 255.0);
        for (size_t i = 0; i < flow_.size(); ++i)
            b = flow_[i].forward(b, cache ? &cache->flow[i] : nullptr, train);
        a += b;
        return a;
    }

    Tensor encode_eval(const Tensor& rgb, const Tensor& flow) const {
        check_inputs(rgb, flow);
        Tensor a = rgb;
        for (const auto& blk : rgb_) a = blk.forward_eval(a);
        Tensor b = flow * (1.0 / 255.0);
        for (const auto& blk : flow_) b = blk.forward_eval(b);
        a += b;
        return a;
    }

    /// Accumulates parameter gradients in both streams; the fused sum routes
    /// the same upstream gradient into each.
    void backward(const Tensor& gF, Cache& cache) {
        Tensor g = gF;
        for (size_t i = rgb_.size(); i-- > 0;) g = rgb_[i].backward(g, cache.rgb[i]);
        g = gF;
        for (size_t i = flow_.size(); i-- > 0;) g = flow_[i].backward(g, cache.flow[i]);
    }

    Tensor encode_compact(const Tensor& f, nn::ConvBlock::Cache* cache, bool train) {
        return compact_.forward(f, cache, train);
    }
    Tensor encode_compact_eval(const Tensor& f) const { return compact_.forward_eval(f); }
    Tensor compact_backward(const Tensor& gy, nn::ConvBlock::Cache& cache) {
        return compact_.backward(gy, cache);
    }

    void visit_params(const std::string& prefix, const nn::ParamVisitor& v) {
        for (size_t i = 0; i < rgb_.size(); ++i) rgb_[i].visit_params(prefix + ".rgb" + std::to_string(i), v);
        for (size_t i = 0; i < flow_.size(); ++i)
            flow_[i].visit_params(prefix + ".flow" + std::to_string(i), v);
        compact_.visit_params(prefix + ".compact", v);
    }
    void visit_buffers(const std::string& prefix, const nn::BufferVisitor& v) {
        for (size_t i = 0; i < rgb_.size(); ++i)
            rgb_[i].visit_buffers(prefix + ".rgb" + std::to_string(i), v);
        for (size_t i = 0; i < flow_.size(); ++i)
            flow_[i].visit_buffers(prefix + ".flow" + std::to_string(i), v);
        compact_.visit_buffers(prefix + ".compact", v);
    }

private:
    static void check_inputs(const Tensor& rgb, const Tensor& flow) {
        if (rgb.rank() != 4 || flow.rank() != 4 || rgb.dim(0) != 3 || flow.dim(0) != 2)
            throw ConfigError("encoder: expected rgb (3,N,H,W) and flow (2,N,H,W)");
        for (int d = 1; d < 4; ++d)
            if (rgb.dim(d) != flow.dim(d)) throw ConfigError("encoder: rgb/flow extents differ");
    }

    std::vector<nn::ConvBlock> rgb_, flow_;
    nn::ConvBlock compact_;
};

}  // namespace mcn
