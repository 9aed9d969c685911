#pragma once

// Similarity-based top-k baseline: no learned selector, every token is
// scored by its mean inner product with the global tokens.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/numeric.hpp"
#include "c2f/tensor.hpp"
#include "c2f/vision_sampler.hpp"

namespace c2f {

/// Per-token scores over the whole map, tokens in partition order (regions
/// row-major, row-major within a region). For a block flattened to
/// (w*w x C), A = X_block Xg^T is (w*w x Ng) and a token's score is the
/// mean of its row.
inline std::vector<double> heuristic_importance(const Tensor& map, const Tensor& global, std::size_t window) {
    const Tensor g = global_tokens(global);
    detail::require(map.rank() == 3 && map.dim(2) == g.dim(1), Errc::dimension_mismatch,
                    "heuristic: map channels differ from global channels");
    const Tensor gt = [&] {
        Tensor t({g.dim(1), g.dim(0)});
        for (std::size_t i = 0; i < g.dim(0); ++i)
            for (std::size_t j = 0; j < g.dim(1); ++j) t(j, i) = g(i, j);
        return t;
    }();
    const double ng = static_cast<double>(g.dim(0));
    std::vector<double> scores;
    scores.reserve(map.dim(0) * map.dim(1));
    for (const auto& block : partition(map, window)) {
        const Tensor flat = block.values.reshaped({window * window, map.dim(2)});
        const Tensor sim = matmul(flat, gt);
        for (std::size_t t = 0; t < sim.dim(0); ++t) {
            double acc = 0.0;
            for (std::size_t k = 0; k < sim.dim(1); ++k) acc += sim(t, k);
            scores.push_back(acc / ng);
        }
    }
    return scores;
}

/// ceil(fraction * n), clamped to [1, n]; a 1e-9 slack absorbs products
/// like 0.6 * 5 = 3.0000000000000004.
inline std::size_t keep_count(double fraction, std::size_t n) {
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

/// Indices of the ceil(fraction * N) highest scores (stable ties), returned
/// in ascending original order.
inline std::vector<std::size_t> heuristic_topk(std::span<const double> scores, double fraction) {
    detail::require(!scores.empty(), Errc::invalid_argument, "heuristic scores are empty");
    detail::require(fraction > 0.0 && fraction <= 1.0, Errc::invalid_argument, "keep fraction must lie in (0, 1]");
    auto order = stable_sort_desc(scores);
    order.resize(keep_count(fraction, scores.size()));
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace c2f
