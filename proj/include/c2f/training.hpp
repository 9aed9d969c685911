#pragma once

// Selector training through the probability-weighted token path.
//
// Gradient conventions: the chosen index j* = argmax Z is a constant, so
// gradient reaches the logits only through top1 = softmax(Z)[j*] (which
// scales the region's tokens) and through P in the auxiliary loss. The
// selection fractions f are stop-gradient.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/losses.hpp"
#include "c2f/numeric.hpp"
#include "c2f/tensor.hpp"
#include "c2f/vision_sampler.hpp"

namespace c2f {

struct TrainingSample {
    Tensor map;
    Tensor global;
};

/// Toy stand-in for the language loss: for every region, the squared
/// distance (averaged over channels) between the region's mean weighted
/// token and a target, averaged over regions and samples. Without an
/// explicit target each region's own unweighted mean token is the target,
/// which rewards confident selection without preferring any scale.
struct DownstreamLoss {
    bool enabled = true;
    std::optional<std::vector<double>> target;
};

struct Objective {
    LossConfig loss;
    DownstreamLoss downstream;
};

struct ForwardPass {
    std::vector<Compression> compressions;
    BatchDiagnostics diagnostics;
    double downstream = 0.0;
    double auxiliary = 0.0;
    double total = 0.0;
};

struct SelectorGradient {
    Tensor weight;             // S x Ng
    std::vector<double> bias;  // S
    ForwardPass forward;
};

namespace detail {

struct RegionResidual {
    std::vector<double> residual;  // mean weighted token minus target
    std::vector<double> mean;      // mean unweighted token
};

/// Regions that emit nothing get empty entries.
inline std::vector<RegionResidual> downstream_residuals(const Compression& c, const DownstreamLoss& loss) {
    const std::size_t ch = c.tokens.channels;
    std::vector<RegionResidual> out(c.selections.size(), {std::vector<double>(ch, 0.0), {}});
    std::vector<std::size_t> count(c.selections.size(), 0);
    for (std::size_t t = 0; t < c.tokens.count(); ++t) {
        const std::size_t r = c.tokens.footprints[t].region;
        const auto tok = c.tokens.token(t);
        for (std::size_t k = 0; k < ch; ++k) out[r].residual[k] += tok[k];
        ++count[r];
    }
    if (loss.target)
        require(loss.target->size() == ch, Errc::dimension_mismatch, "downstream target length differs from C");
    for (std::size_t r = 0; r < out.size(); ++r) {
        auto& res = out[r].residual;
        if (count[r] == 0) {
            res.clear();
            continue;
        }
        const double top1 = c.selections[r].top1_prob;
        out[r].mean.resize(ch);
        for (std::size_t k = 0; k < ch; ++k) {
            res[k] /= static_cast<double>(count[r]);
            out[r].mean[k] = res[k] / top1;
            res[k] -= loss.target ? (*loss.target)[k] : out[r].mean[k];
        }
    }
    return out;
}

}  // namespace detail

/// Forward pass of the training objective; compressions come from
/// compress_training unchanged.
inline ForwardPass evaluate_objective(std::span<const TrainingSample> batch, const SelectorParams& params,
                                      const SamplerConfig& cfg, const Objective& obj) {
    detail::require(!batch.empty(), Errc::invalid_argument, "empty training batch");
    ForwardPass fp;
    std::vector<RegionSelection> all;
    for (const auto& s : batch) {
        fp.compressions.push_back(compress_training(s.map, s.global, params, cfg));
        const auto& c = fp.compressions.back();
        all.insert(all.end(), c.selections.begin(), c.selections.end());
        if (obj.downstream.enabled) {
            double acc = 0.0;
            for (const auto& rr : detail::downstream_residuals(c, obj.downstream)) {
                double sq = 0.0;
                for (double x : rr.residual) sq += x * x;
                if (!rr.residual.empty()) acc += sq / static_cast<double>(rr.residual.size());
            }
            fp.downstream += acc / static_cast<double>(c.selections.size());
        }
    }
    fp.downstream /= static_cast<double>(batch.size());
    fp.diagnostics = diagnostics(all, cfg.menu.size());
    fp.auxiliary = auxiliary_loss(fp.diagnostics, obj.loss);
    fp.total = fp.downstream + fp.auxiliary;
    return fp;
}

/// Analytic gradient of the objective with respect to the selector weight and bias.
inline SelectorGradient selector_grad(std::span<const TrainingSample> batch, const SelectorParams& params,
                                      const SamplerConfig& cfg, const Objective& obj) {
    SelectorGradient g{Tensor({params.scales(), params.global_tokens()}), std::vector<double>(params.scales(), 0.0),
                       evaluate_objective(batch, params, cfg, obj)};
    detail::require(std::isfinite(g.forward.total), Errc::non_finite, "objective is not finite");
    const std::size_t S = params.scales();
    const double n_blocks = static_cast<double>(g.forward.diagnostics.blocks);
    const auto& f = g.forward.diagnostics.f;
    std::vector<double> wf(S);
    for (std::size_t i = 0; i < S; ++i)
        wf[i] = (obj.loss.imbalance_weights ? (*obj.loss.imbalance_weights)[i] : 1.0) * f[i];

    std::vector<double> dz(S);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& c = g.forward.compressions[b];
        std::vector<detail::RegionResidual> res;
        if (obj.downstream.enabled) res = detail::downstream_residuals(c, obj.downstream);
        const double dscale =
            2.0 / (static_cast<double>(batch.size()) * static_cast<double>(c.selections.size()) *
                   static_cast<double>(c.tokens.channels));
        for (std::size_t r = 0; r < c.selections.size(); ++r) {
            const auto& sel = c.selections[r];
            const auto& p = sel.probs;
            std::fill(dz.begin(), dz.end(), 0.0);

            if (!res.empty() && !res[r].residual.empty()) {
                // region mean = top1 * m_r, so d/dtop1 = <residual, m_r>
                const double dtop1 = dscale * dot(res[r].residual, res[r].mean);
                for (std::size_t k = 0; k < S; ++k)
                    dz[k] += dtop1 * sel.top1_prob * ((k == sel.scale ? 1.0 : 0.0) - p[k]);
            }

            if (obj.loss.alpha != 0.0) {
                double mix = 0.0;
                for (std::size_t i = 0; i < S; ++i) mix += wf[i] * p[i];
                for (std::size_t k = 0; k < S; ++k) dz[k] += obj.loss.alpha / n_blocks * p[k] * (wf[k] - mix);
            }

            const auto& score = c.scores[r];
            for (std::size_t k = 0; k < S; ++k) {
                g.bias[k] += dz[k];
                for (std::size_t j = 0; j < score.size(); ++j) g.weight(k, j) += dz[k] * score[j];
            }
        }
    }
    return g;
}

/// Flattens weight (row-major) then bias.
inline std::vector<double> flatten_params(const SelectorParams& p) {
    std::vector<double> out(p.weight.values().begin(), p.weight.values().end());
    out.insert(out.end(), p.bias.begin(), p.bias.end());
    return out;
}

inline SelectorParams unflatten_params(std::span<const double> flat, std::size_t scales, std::size_t global_tokens) {
    detail::require(flat.size() == scales * global_tokens + scales, Errc::dimension_mismatch,
                    "flat parameter vector has the wrong length");
    const auto split = static_cast<std::ptrdiff_t>(scales * global_tokens);
    return {Tensor({scales, global_tokens}, std::vector<double>(flat.begin(), flat.begin() + split)),
            std::vector<double>(flat.begin() + split, flat.end())};
}

/// Smallest gap between the top logit and the runner-up over all regions.
inline double min_argmax_margin(const ForwardPass& fp) {
    double margin = INFINITY;
    for (const auto& c : fp.compressions)
        for (const auto& sel : c.selections) {
            for (std::size_t k = 0; k < sel.logits.size(); ++k)
                if (k != sel.scale) margin = std::min(margin, sel.logits[sel.scale] - sel.logits[k]);
        }
    return margin;
}

struct GradCheckResult {
    double relative_error = 0.0;
    double margin = 0.0;
    bool skipped = false;  // argmax too close to a tie for finite differences
    std::vector<double> analytic;
    std::vector<double> numeric;
};

/// ||a - n|| / max(||a||, ||n||); zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> n) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - n[i]) * (a[i] - n[i]);
        na += a[i] * a[i];
        nn += n[i] * n[i];
    }
    const double denom = std::sqrt(std::max(na, nn));
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

/// Compares selector_grad with central finite differences of the objective.
inline GradCheckResult check_selector_gradient(std::span<const TrainingSample> batch, const SelectorParams& params,
                                               const SamplerConfig& cfg, const Objective& obj,
                                               double min_margin = 1e-3, double step = 1e-5) {
    GradCheckResult out;
    const auto g = selector_grad(batch, params, cfg, obj);
    out.margin = min_argmax_margin(g.forward);
    out.analytic = flatten_params({g.weight, g.bias});
    if (out.margin <= min_margin) {
        out.skipped = true;
        return out;
    }
    const auto theta = flatten_params(params);
    const std::size_t S = params.scales(), ng = params.global_tokens();
    out.numeric = finite_diff_grad(
        [&](std::span<const double> x) {
            return evaluate_objective(batch, unflatten_params(x, S, ng), cfg, obj).total;
        },
        theta, step);
    out.relative_error = relative_error(out.analytic, out.numeric);
    return out;
}

struct TrainConfig {
    std::size_t steps = 500;
    double learning_rate = 2.0;
    std::uint64_t seed = 0;
    Objective objective;
    std::optional<SelectorParams> init;
    std::size_t start_step = 0;  // offset for resumed runs
};

struct StepRecord {
    std::size_t step;
    double total;
    double downstream;
    double auxiliary;
    std::vector<double> f;
    std::vector<double> P;
};

struct TrainRun {
    std::vector<StepRecord> history;
    SelectorParams params;
    BatchDiagnostics final_diagnostics;
    double final_loss = 0.0;
};

/// Full-batch gradient descent on the selector.
inline TrainRun train_selector(std::span<const TrainingSample> dataset, const SamplerConfig& cfg,
                               const TrainConfig& tc) {
    detail::require(!dataset.empty(), Errc::invalid_argument, "empty training set");
    detail::require(tc.steps >= 1, Errc::invalid_argument, "training needs at least one step");
    detail::require(tc.learning_rate >= 0.0 && std::isfinite(tc.learning_rate), Errc::invalid_argument,
                    "learning rate must be finite and non-negative");
    if (tc.objective.loss.imbalance_weights)
        validate_imbalance_weights(*tc.objective.loss.imbalance_weights, cfg.menu.size());
    const std::size_t ng = global_tokens(dataset.front().global).dim(0);
    TrainRun run{{}, tc.init ? *tc.init : SelectorParams::init(cfg.menu.size(), ng, tc.seed), {}, 0.0};
    run.history.reserve(tc.steps);

    auto guarded = [&](std::size_t step, auto&& fn) {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.code() == Errc::non_finite)
                throw Error(Errc::divergence, "training diverged at step " + std::to_string(step) + ": " + e.what());
            throw;
        }
    };

    for (std::size_t i = 0; i < tc.steps; ++i) {
        const std::size_t step = tc.start_step + i;
        const auto g = guarded(step, [&] { return selector_grad(dataset, run.params, cfg, tc.objective); });
        const auto& fp = g.forward;
        run.history.push_back({step, fp.total, fp.downstream, fp.auxiliary, fp.diagnostics.f, fp.diagnostics.P});
        if (tc.learning_rate == 0.0) continue;
        auto w = run.params.weight.values();
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= tc.learning_rate * g.weight[k];
        for (std::size_t k = 0; k < run.params.bias.size(); ++k) run.params.bias[k] -= tc.learning_rate * g.bias[k];
    }
    const auto last = guarded(tc.start_step + tc.steps,
                              [&] { return evaluate_objective(dataset, run.params, cfg, tc.objective); });
    run.final_diagnostics = last.diagnostics;
    run.final_loss = last.total;
    return run;
}

}  // namespace c2f
