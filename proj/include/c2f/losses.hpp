#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/vision_sampler.hpp"

namespace c2f {

/// Routing statistics over all regions of a batch.
///
/// f[i] is the fraction of regions whose argmax is scale i; P[i] is the
/// mean softmax probability of scale i.
struct BatchDiagnostics {
    std::vector<double> f;
    std::vector<double> P;
    std::size_t blocks = 0;
};

inline BatchDiagnostics diagnostics(std::span<const RegionSelection> selections, std::size_t scales) {
    detail::require(!selections.empty(), Errc::invalid_argument, "no selections to summarize");
    BatchDiagnostics d{std::vector<double>(scales, 0.0), std::vector<double>(scales, 0.0), selections.size()};
    for (const auto& s : selections) {
        detail::require(s.scale < scales && s.probs.size() == scales, Errc::dimension_mismatch,
                        "selection does not match the scale count");
        d.f[s.scale] += 1.0;
        for (std::size_t i = 0; i < scales; ++i) d.P[i] += s.probs[i];
    }
    const double n = static_cast<double>(selections.size());
    for (std::size_t i = 0; i < scales; ++i) {
        d.f[i] /= n;
        d.P[i] /= n;
    }
    return d;
}

struct LossConfig {
    double alpha = 0.1;
    std::optional<std::vector<double>> imbalance_weights;
};

/// Penalty weights must be positive and sum to S (3 for the default menu).
inline void validate_imbalance_weights(std::span<const double> w, std::size_t scales) {
    detail::require(w.size() == scales, Errc::dimension_mismatch, "imbalance weight count differs from S");
    double sum = 0.0;
    for (double x : w) {
        detail::require(std::isfinite(x) && x > 0.0, Errc::invalid_argument, "imbalance weights must be positive");
        sum += x;
    }
    detail::require(std::abs(sum - static_cast<double>(scales)) <= 1e-9, Errc::invalid_argument,
                    "imbalance weights must sum to " + std::to_string(scales));
}

/// alpha * sum_i f_i P_i
inline double balance_loss(const BatchDiagnostics& d, double alpha) {
    detail::require(alpha >= 0.0, Errc::invalid_argument, "alpha must be non-negative");
    detail::require(d.f.size() == d.P.size(), Errc::dimension_mismatch, "f and P lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < d.f.size(); ++i) acc += d.f[i] * d.P[i];
    return alpha * acc;
}

/// alpha * sum_i w_i f_i P_i
inline double imbalance_loss(const BatchDiagnostics& d, double alpha, std::span<const double> w) {
    detail::require(alpha >= 0.0, Errc::invalid_argument, "alpha must be non-negative");
    detail::require(d.f.size() == d.P.size(), Errc::dimension_mismatch, "f and P lengths differ");
    validate_imbalance_weights(w, d.f.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.f.size(); ++i) acc += w[i] * d.f[i] * d.P[i];
    return alpha * acc;
}

inline double auxiliary_loss(const BatchDiagnostics& d, const LossConfig& cfg) {
    return cfg.imbalance_weights ? imbalance_loss(d, cfg.alpha, *cfg.imbalance_weights) : balance_loss(d, cfg.alpha);
}

}  // namespace c2f
