#pragma once

// Text-guided importance sampler: text-to-vision attention, reduced to a
// per-visual-token importance, then a cumulative-mass top-k cut.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/numeric.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

/// A = softmax(Q K^T / sqrt(d)) per head, softmax over visual positions.
///
/// q is h x T x d, k is h x N x d; the result is h x T x N.
inline Tensor attention_scores(const Tensor& q, const Tensor& k) {
    detail::require(q.rank() == 3 && k.rank() == 3, Errc::dimension_mismatch, "Q and K must be rank 3");
    detail::require(q.dim(0) == k.dim(0), Errc::dimension_mismatch, "Q and K head counts differ");
    detail::require(q.dim(2) == k.dim(2), Errc::dimension_mismatch, "Q and K head dims differ");
    const std::size_t heads = q.dim(0), text = q.dim(1), vis = k.dim(1), d = q.dim(2);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor a({heads, text, vis});
    std::vector<double> logits(vis);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < text; ++t) {
            for (std::size_t n = 0; n < vis; ++n) {
                double acc = 0.0;
                for (std::size_t e = 0; e < d; ++e) acc += q(h, t, e) * k(h, n, e);
                logits[n] = acc * inv_sqrt_d;
            }
            const auto row = softmax(logits);
            for (std::size_t n = 0; n < vis; ++n) a(h, t, n) = row[n];
        }
    return a;
}

/// S_n = mean over text tokens of the max over heads of A[h, t, n].
inline std::vector<double> importance(const Tensor& attn) {
    detail::require(attn.rank() == 3, Errc::dimension_mismatch, "attention must be h x T x N");
    const std::size_t heads = attn.dim(0), text = attn.dim(1), vis = attn.dim(2);
    std::vector<double> s(vis, 0.0);
    for (std::size_t t = 0; t < text; ++t)
        for (std::size_t n = 0; n < vis; ++n) {
            double m = attn(0, t, n);
            for (std::size_t h = 1; h < heads; ++h) m = std::max(m, attn(h, t, n));
            s[n] += m;
        }
    for (double& x : s) x /= static_cast<double>(text);
    return s;
}

/// Importance for every layer of an L x h x T x N stack.
inline std::vector<std::vector<double>> per_layer_importance(const Tensor& stack) {
    detail::require(stack.rank() == 4, Errc::dimension_mismatch, "layer stack must be L x h x T x N");
    const std::size_t layers = stack.dim(0);
    const std::size_t slice = stack.size() / layers;
    std::vector<std::vector<double>> out;
    out.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        std::vector<double> data(stack.values().begin() + static_cast<std::ptrdiff_t>(l * slice),
                                 stack.values().begin() + static_cast<std::ptrdiff_t>((l + 1) * slice));
        out.push_back(importance(Tensor({stack.dim(1), stack.dim(2), stack.dim(3)}, std::move(data))));
    }
    return out;
}

struct SelectionResult {
    std::vector<std::size_t> kept;  // original positions, descending importance
    std::size_t k = 0;
    double gamma = 0.0;
    bool degenerate = false;  // all-zero importance, everything kept
};

/// Keeps the shortest descending-importance prefix whose mass fraction
/// strictly exceeds gamma. gamma == 1 keeps all tokens.
inline SelectionResult cumulative_topk(std::span<const double> s, double gamma) {
    detail::require(gamma > 0.0 && gamma <= 1.0, Errc::invalid_argument, "gamma must lie in (0, 1]");
    detail::require(!s.empty(), Errc::invalid_argument, "importance vector is empty");
    double total = 0.0;
    for (double x : s) {
        detail::require(std::isfinite(x) && x >= 0.0, Errc::invalid_argument, "importance must be finite and non-negative");
        total += x;
    }
    auto order = stable_sort_desc(s);
    if (total == 0.0) return {std::move(order), s.size(), gamma, true};

    std::size_t k = s.size();
    double prefix = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
        prefix += s[order[j]];
        if (prefix / total > gamma) {
            k = j + 1;
            break;
        }
    }
    order.resize(k);
    return {std::move(order), k, gamma, false};
}

struct StochasticConfig {
    std::size_t layer_lo = 8;
    std::size_t layer_hi = 24;
    double gamma_lo = 0.7;
    double gamma_hi = 1.0;
    std::uint64_t seed = 0;
};

struct StochasticDraw {
    std::size_t layer;
    double gamma;
};

/// Seeded source of (insertion layer, gamma) pairs for training-time
/// augmentation. Single owner; draws are sequential.
class StochasticSampler {
public:
    explicit StochasticSampler(const StochasticConfig& cfg, std::size_t total_layers = 32)
        : cfg_(cfg), rng_(cfg.seed) {
        detail::require(cfg.layer_lo <= cfg.layer_hi && cfg.layer_hi < total_layers, Errc::invalid_argument,
                        "layer range must satisfy lo <= hi < total layers");
        detail::require(cfg.gamma_lo > 0.0 && cfg.gamma_lo <= cfg.gamma_hi && cfg.gamma_hi <= 1.0,
                        Errc::invalid_argument, "gamma range must satisfy 0 < lo <= hi <= 1");
    }

    StochasticDraw draw() {
        std::uniform_int_distribution<std::size_t> layer(cfg_.layer_lo, cfg_.layer_hi);
        const std::size_t l = layer(rng_);
        double g = cfg_.gamma_lo;
        if (cfg_.gamma_hi > cfg_.gamma_lo) {
            std::uniform_real_distribution<double> gamma(cfg_.gamma_lo, cfg_.gamma_hi);
            g = gamma(rng_);
        }
        ++draws_;
        return {l, g};
    }

    std::uint64_t draws() const noexcept { return draws_; }

private:
    StochasticConfig cfg_;
    std::mt19937_64 rng_;
    std::uint64_t draws_ = 0;
};

/// Keys for pooled tokens: each head-dim channel max-pooled over the
/// token's footprint on the full-resolution key grid.
///
/// grid_keys is h x (H*W) x d with positions in row-major grid order.
template <typename Footprints>
Tensor pool_keys(const Tensor& grid_keys, std::size_t grid_width, const Footprints& footprints) {
    detail::require(grid_keys.rank() == 3, Errc::dimension_mismatch, "keys must be h x N x d");
    detail::require(!footprints.empty(), Errc::invalid_argument, "no tokens to pool keys for");
    const std::size_t heads = grid_keys.dim(0), d = grid_keys.dim(2);
    Tensor out({heads, footprints.size(), d});
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < footprints.size(); ++t) {
            const auto& fp = footprints[t];
            for (std::size_t e = 0; e < d; ++e) {
                double m = -INFINITY;
                for (std::size_t y = fp.y; y < fp.y + fp.h; ++y)
                    for (std::size_t x = fp.x; x < fp.x + fp.w; ++x) {
                        const std::size_t pos = y * grid_width + x;
                        detail::require(pos < grid_keys.dim(1), Errc::dimension_mismatch,
                                        "token footprint falls outside the key grid");
                        m = std::max(m, grid_keys(h, pos, e));
                    }
                out(h, t, e) = m;
            }
        }
    return out;
}

}  // namespace c2f
