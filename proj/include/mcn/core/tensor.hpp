#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mcn/core/errors.hpp"

namespace mcn {

/// Dense row-major tensor of doubles. Rank is dynamic (1..5 in practice).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0);
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    double& at(std::initializer_list<int> idx) { return data_[static_cast<size_t>(offset(idx))]; }
    double at(std::initializer_list<int> idx) const { return data_[static_cast<size_t>(offset(idx))]; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    /// Reinterpret the buffer under a new shape with the same element count.
    Tensor reshaped(std::vector<int> shape) const {
        if (numel_of(shape) != numel())
            throw ConfigError("reshape: element count mismatch (" + shape_str(shape_) + " -> " + shape_str(shape) + ")");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor& operator+=(const Tensor& o) {
        check_same(o, "+=");
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Tensor& operator-=(const Tensor& o) {
        check_same(o, "-=");
        for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Tensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { a += b; return a; }
    friend Tensor operator-(Tensor a, const Tensor& b) { a -= b; return a; }
    friend Tensor operator*(Tensor a, double s) { a *= s; return a; }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    bool all_finite() const {
        for (double v : data_) if (!std::isfinite(v)) return false;
        return true;
    }

    static int64_t numel_of(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ConfigError("tensor dimension must be positive, got " + shape_str(shape));
            n *= d;
        }
        return n;
    }

    static std::string shape_str(const std::vector<int>& shape) {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }

private:
    int64_t offset(std::initializer_list<int> idx) const {
        int64_t off = 0;
        size_t i = 0;
        for (int v : idx) {
            off = off * shape_[i] + v;
            ++i;
        }
        return off;
    }

    void check_same(const Tensor& o, const char* op) const {
        if (!same_shape(o))
            throw ConfigError(std::string("tensor shape mismatch in ") + op + ": " + shape_str(shape_) +
                              " vs " + shape_str(o.shape_));
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace mcn
