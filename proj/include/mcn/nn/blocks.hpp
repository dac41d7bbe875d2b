#pragma once

#include "mcn/core/config.hpp"
#include "mcn/nn/layers.hpp"

namespace mcn::nn {

/// 3D convolution + per-channel normalization + rectification.
struct ConvBlock {
    Conv3d conv;
    BatchNorm3d bn;

    ConvBlock() = default;
    ConvBlock(int in_c, const ConvSpec& spec, Rng& rng)
        : conv(in_c, spec.out_c, spec.kernel, spec.stride, spec.pad, rng), bn(spec.out_c) {}

    struct Cache {
        Conv3d::Cache conv;
        BatchNorm3d::Cache bn;
        Tensor relu_mask;
    };

    Tensor forward(const Tensor& x, Cache* c, bool train) {
        Tensor y = conv.forward(x, c ? &c->conv : nullptr);
        y = bn.forward(y, c ? &c->bn : nullptr, train);
        return relu(y, c ? &c->relu_mask : nullptr);
    }

    Tensor forward_eval(const Tensor& x) const {
        return relu(bn.forward_eval(conv.forward(x, nullptr)), nullptr);
    }

    Tensor backward(const Tensor& gy, Cache& c) {
        Tensor g = relu_backward(gy, c.relu_mask);
        g = bn.backward(g, c.bn);
        return conv.backward(g, c.conv);
    }

    void visit_params(const std::string& prefix, const ParamVisitor& v) {
        conv.visit_params(prefix + ".conv", v);
        bn.visit_params(prefix + ".bn", v);
    }
    void visit_buffers(const std::string& prefix, const BufferVisitor& v) {
        bn.visit_buffers(prefix + ".bn", v);
    }
};

/// Transposed 3D convolution + normalization + rectification (upsampling).
struct TConvBlock {
    ConvTranspose3d tconv;
    BatchNorm3d bn;

    TConvBlock() = default;
    TConvBlock(int in_c, const ConvSpec& spec, Rng& rng)
        : tconv(in_c, spec.out_c, spec.kernel, spec.stride, spec.pad, rng), bn(spec.out_c) {}

    struct Cache {
        ConvTranspose3d::Cache tconv;
        BatchNorm3d::Cache bn;
        Tensor relu_mask;
    };

    Tensor forward(const Tensor& x, Cache* c, bool train) {
        Tensor y = tconv.forward(x, c ? &c->tconv : nullptr);
        y = bn.forward(y, c ? &c->bn : nullptr, train);
        return relu(y, c ? &c->relu_mask : nullptr);
    }

    Tensor forward_eval(const Tensor& x) const {
        return relu(bn.forward_eval(tconv.forward(x, nullptr)), nullptr);
    }

    Tensor backward(const Tensor& gy, Cache& c) {
        Tensor g = relu_backward(gy, c.relu_mask);
        g = bn.backward(g, c.bn);
        return tconv.backward(g, c.tconv);
    }

    void visit_params(const std::string& prefix, const ParamVisitor& v) {
        tconv.visit_params(prefix + ".tconv", v);
        bn.visit_params(prefix + ".bn", v);
    }
    void visit_buffers(const std::string& prefix, const BufferVisitor& v) {
        bn.visit_buffers(prefix + ".bn", v);
    }
};

}  // namespace mcn::nn
