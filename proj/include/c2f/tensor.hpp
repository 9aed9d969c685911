#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c2f/error.hpp"

namespace c2f {

/// Dense row-major tensor of doubles.
///
/// Every dimension is positive and every value finite; both are checked on
/// construction. A default-constructed tensor is empty (rank 0, no data).
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
        check_dims();
        data_.assign(element_count(dims_), 0.0);
    }

    Tensor(std::vector<std::size_t> dims, std::vector<double> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        check_dims();
        detail::require(data_.size() == element_count(dims_), Errc::dimension_mismatch,
                        "tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string());
        for (double v : data_)
            detail::require(std::isfinite(v), Errc::non_finite, "tensor value is not finite");
    }

    static Tensor filled(std::vector<std::size_t> dims, double value) {
        Tensor t(std::move(dims));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }

    double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }

    /// Same data under a new shape with equal element count.
    Tensor reshaped(std::vector<std::size_t> dims) const {
        return Tensor(std::move(dims), data_);
    }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

    static std::size_t element_count(const std::vector<std::size_t>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }

private:
    void check_dims() const {
        detail::require(!dims_.empty(), Errc::invalid_argument, "tensor needs at least one dimension");
        for (std::size_t d : dims_)
            detail::require(d > 0, Errc::invalid_argument, "tensor dimensions must be positive");
    }

    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

}  // namespace c2f
