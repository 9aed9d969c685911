#pragma once

// Small dense kernels shared by the samplers and the trainer. All functions
// are pure; accumulation order is fixed so results are bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

/// Matrix product of a (m x k) and b (k x n).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require(a.rank() == 2 && b.rank() == 2, Errc::dimension_mismatch, "matmul expects rank-2 tensors");
    detail::require(a.dim(1) == b.dim(0), Errc::dimension_mismatch,
                    "matmul inner dims differ: " + a.shape_string() + " x " + b.shape_string());
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
            out(i, j) = acc;
        }
    return out;
}

/// y = M x for an (r x c) matrix and a length-c vector.
inline std::vector<double> matvec(const Tensor& m, std::span<const double> x) {
    detail::require(m.rank() == 2 && m.dim(1) == x.size(), Errc::dimension_mismatch,
                    "matvec: matrix " + m.shape_string() + " vs vector of " + std::to_string(x.size()));
    std::vector<double> y(m.dim(0), 0.0);
    for (std::size_t i = 0; i < m.dim(0); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) acc += m(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), Errc::dimension_mismatch, "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

/// Max-subtracted softmax.
inline std::vector<double> softmax(std::span<const double> v) {
    detail::require(!v.empty(), Errc::invalid_argument, "softmax of empty vector");
    for (double x : v) detail::require(std::isfinite(x), Errc::non_finite, "softmax input is not finite");
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

/// Smallest index attaining the maximum.
inline std::size_t argmax(std::span<const double> v) {
    detail::require(!v.empty(), Errc::invalid_argument, "argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

/// Windowed max-pooling of an (h x w x C) block with non-overlapping
/// (kh x kw) windows. Channels are pooled independently.
inline Tensor max_pool(const Tensor& block, std::size_t kh, std::size_t kw) {
    detail::require(block.rank() == 3, Errc::dimension_mismatch, "max_pool expects an h x w x C block");
    const std::size_t h = block.dim(0), w = block.dim(1), c = block.dim(2);
    detail::require(kh > 0 && kw > 0 && h % kh == 0 && w % kw == 0, Errc::invalid_argument,
                    "max_pool kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                        " does not divide block " + block.shape_string());
    const std::size_t oh = h / kh, ow = w / kw;
    Tensor out({oh, ow, c});
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t ch = 0; ch < c; ++ch) {
                double m = block(oy * kh, ox * kw, ch);
                for (std::size_t y = 0; y < kh; ++y)
                    for (std::size_t x = 0; x < kw; ++x) m = std::max(m, block(oy * kh + y, ox * kw + x, ch));
                out(oy, ox, ch) = m;
            }
    return out;
}

/// Mean over the spatial axes of an (h x w x C) block, giving a C-vector.
inline std::vector<double> mean_pool(const Tensor& block) {
    detail::require(block.rank() == 3, Errc::dimension_mismatch, "mean_pool expects an h x w x C block");
    const std::size_t c = block.dim(2), n = block.dim(0) * block.dim(1);
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) out[ch] += block[i * c + ch];
    for (double& x : out) x /= static_cast<double>(n);
    return out;
}

/// Indices ordering v in non-increasing value; ties keep index order.
inline std::vector<std::size_t> stable_sort_desc(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return idx;
}

/// Central finite-difference gradient of a scalar function.
///
/// Coordinate i uses step h_i = step * max(1, |x_i|).
template <typename F>
std::vector<double> finite_diff_grad(F&& f, std::span<const double> x, double step = 1e-5) {
    detail::require(step > 0.0, Errc::invalid_argument, "finite difference step must be positive");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x[i]));
        probe[i] = x[i] + h;
        const double fp = f(std::span<const double>(probe));
        probe[i] = x[i] - h;
        const double fm = f(std::span<const double>(probe));
        probe[i] = x[i];
        detail::require(std::isfinite(fp) && std::isfinite(fm), Errc::non_finite,
                        "finite difference: non-finite function value at coordinate " + std::to_string(i));
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace c2f
