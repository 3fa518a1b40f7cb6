#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace swapgt {

/// Dense row-major tensor of doubles, rank 1..3.
///
/// Everything in the differentiable path is 64-bit. Bulk graph features are
/// stored as float32 in Graph and widened on entry to the engine.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        if (shape_.empty() || shape_.size() > 3)
            throw std::invalid_argument("Tensor: rank must be 1..3");
        std::size_t n = 1;
        for (std::size_t d : shape_) n *= d;
        data_.assign(n, fill);
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor vec(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
    static Tensor scalar(double v) {
        Tensor t({std::size_t{1}, std::size_t{1}});
        t.data_[0] = v;
        return t;
    }

    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const {
        if (rank() != 2) throw std::logic_error("Tensor::rows: not a matrix");
        return shape_[0];
    }
    std::size_t cols() const {
        if (rank() != 2) throw std::logic_error("Tensor::cols: not a matrix");
        return shape_[1];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape_[i]);
        return s + ")";
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

} // namespace swapgt
