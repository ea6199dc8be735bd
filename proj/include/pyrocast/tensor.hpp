#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "pyrocast/common.hpp"

namespace pyrocast {

// Dense row-major tensor. The scalar type selects the precision mode: float is
// the production path, double exists for finite-difference gradient checks.
template <typename T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(check_shape(shape_), T(0));
    }
    Tensor(std::vector<std::int64_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (check_shape(shape_) != static_cast<std::int64_t>(data_.size()))
            throw dimension_error("tensor data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_string());
    }
    static Tensor scalar(T v) { return Tensor({1}, {v}); }
    static Tensor full(std::vector<std::int64_t> shape, T v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](std::int64_t i) { return data_[i]; }
    const T& operator[](std::int64_t i) const { return data_[i]; }

    T& at(std::initializer_list<std::int64_t> idx) { return data_[offset(idx)]; }
    const T& at(std::initializer_list<std::int64_t> idx) const { return data_[offset(idx)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

  private:
    static std::int64_t check_shape(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (std::int64_t d : shape) {
            if (d <= 0) throw dimension_error("tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }
    std::int64_t offset(std::initializer_list<std::int64_t> idx) const {
        std::int64_t off = 0;
        std::size_t k = 0;
        for (std::int64_t i : idx) off = off * shape_[k++] + i;
        return off;
    }

    std::vector<std::int64_t> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace pyrocast
