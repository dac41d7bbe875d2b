#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcn/core/tensor.hpp"

namespace mcn {

/// Adaptive-moment optimizer over externally owned parameter/gradient pairs.
/// Parameters register once per training stage; anything not registered is
/// frozen by construction.
class Adam {
public:
    struct Hyper {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    explicit Adam(const Hyper& hyper) : hyper_(hyper) {}

    void add_param(const std::string& name, Tensor& value, Tensor& grad, double lr) {
        if (lr <= 0.0) throw ConfigError("adam: learning rate must be positive");
        entries_.push_back({name, &value, &grad, Tensor(value.shape()), Tensor(value.shape()), lr});
    }

    size_t n_params() const { return entries_.size(); }

    void zero_grads() {
        for (auto& e : entries_) e.grad->fill(0.0);
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(hyper_.beta1, t_);
        const double bc2 = 1.0 - std::pow(hyper_.beta2, t_);
        for (auto& e : entries_) {
            for (int64_t i = 0; i < e.value->numel(); ++i) {
                const double g = (*e.grad)[i];
                e.m[i] = hyper_.beta1 * e.m[i] + (1.0 - hyper_.beta1) * g;
                e.v[i] = hyper_.beta2 * e.v[i] + (1.0 - hyper_.beta2) * g * g;
                const double mh = e.m[i] / bc1;
                const double vh = e.v[i] / bc2;
                (*e.value)[i] -= e.lr * mh / (std::sqrt(vh) + hyper_.eps);
            }
        }
    }

private:
    struct Entry {
        std::string name;
        Tensor* value;
        Tensor* grad;
        Tensor m, v;
        double lr;
    };

    Hyper hyper_;
    std::vector<Entry> entries_;
    int64_t t_ = 0;
};

}  // namespace mcn
