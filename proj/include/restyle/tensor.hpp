#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace restyle {

// Dense row-major double tensor. Images are stored channels-first (C, H, W);
// latent codes are (k, d) matrices.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0);
    }
    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static std::size_t numel_of(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int s : shape) {
            if (s < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= static_cast<std::size_t>(s);
        }
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-d access (k, d) style.
    double& at2(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at2(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    // 3-d access (C, H, W) style.
    double& at3(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at3(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        require_same_shape(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { a += b; return a; }
    friend Tensor operator-(Tensor a, const Tensor& b) { a -= b; return a; }

    bool all_finite() const;
    double norm2() const;       // Euclidean norm over all entries
    double mean() const;
    double max_abs() const;

    void require_same_shape(const Tensor& o, const char* where) const {
        if (!same_shape(o))
            throw std::invalid_argument(std::string("Tensor shape mismatch in ") + where);
    }

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

using LatentCode = Tensor;    // (k, d)
using ResidualCode = Tensor;  // (k, d)
using ImageArray = Tensor;    // (C, H, W), values in [-1, 1] for generator outputs

}  // namespace restyle
