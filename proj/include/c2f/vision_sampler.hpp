#pragma once

// Vision-guided multi-scale region sampler.
//
// The feature map is cut into w x w regions. Each region can be emitted at
// one of several max-pooled scales; a linear selector scores the region's
// pooled descriptor against the global (thumbnail) tokens and picks the
// scale with the highest logit. Scale 0 is always the coarsest.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/numeric.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

/// One down-sampling path: a non-overlapping max-pool kernel, or the
/// discard pseudo-scale that emits nothing.
struct ScaleSpec {
    std::size_t kh = 1;
    std::size_t kw = 1;
    bool discard = false;
    std::size_t token_count = 0;

    std::string label() const {
        return discard ? std::string("discard") : std::to_string(kh) + "x" + std::to_string(kw);
    }
};

struct Kernel {
    std::size_t kh;
    std::size_t kw;
};

class ScaleMenu {
public:
    /// Kernels are taken in the given order, which must run coarsest first.
    /// With discard enabled a zero-token scale is prepended at index 0.
    ScaleMenu(std::size_t window, std::span<const Kernel> kernels, bool discard = false) : window_(window) {
        detail::require(window >= 1, Errc::invalid_argument, "window size must be positive");
        detail::require(!kernels.empty(), Errc::invalid_argument, "scale menu needs at least one kernel");
        if (discard) scales_.push_back(ScaleSpec{window, window, true, 0});
        for (const auto& k : kernels) {
            detail::require(k.kh >= 1 && k.kw >= 1 && window % k.kh == 0 && window % k.kw == 0,
                            Errc::invalid_argument,
                            "kernel " + std::to_string(k.kh) + "x" + std::to_string(k.kw) +
                                " does not divide window " + std::to_string(window));
            scales_.push_back(ScaleSpec{k.kh, k.kw, false, (window / k.kh) * (window / k.kw)});
        }
        detail::require(scales_.size() >= 2 || discard, Errc::invalid_argument,
                        "scale menu needs at least two scales");
    }

    /// 4x4, 2x2, 1x1 (those dividing the window).
    static ScaleMenu three_branch(std::size_t window = 4, bool discard = false) {
        return preset(window, {{4, 4}, {2, 2}, {1, 1}}, discard);
    }

    /// The three symmetric scales plus 4x2, 2x4, 2x1, 1x2, sorted by
    /// ascending token count (stable).
    static ScaleMenu seven_branch(std::size_t window = 4, bool discard = false) {
        return preset(window, {{4, 4}, {4, 2}, {2, 4}, {2, 2}, {2, 1}, {1, 2}, {1, 1}}, discard);
    }

    std::size_t window() const noexcept { return window_; }
    std::size_t size() const noexcept { return scales_.size(); }
    const ScaleSpec& operator[](std::size_t i) const { return scales_.at(i); }
    const std::vector<ScaleSpec>& scales() const noexcept { return scales_; }

    std::vector<std::size_t> token_counts() const {
        std::vector<std::size_t> out;
        for (const auto& s : scales_) out.push_back(s.token_count);
        return out;
    }
    std::size_t min_tokens() const {
        const auto tc = token_counts();
        return *std::min_element(tc.begin(), tc.end());
    }
    std::size_t max_tokens() const {
        const auto tc = token_counts();
        return *std::max_element(tc.begin(), tc.end());
    }

private:
    static ScaleMenu preset(std::size_t window, std::vector<Kernel> kernels, bool discard) {
        std::erase_if(kernels, [&](const Kernel& k) { return window % k.kh != 0 || window % k.kw != 0; });
        return ScaleMenu(window, kernels, discard);
    }

    std::size_t window_;
    std::vector<ScaleSpec> scales_;
};

enum class ScorePooling { mean, max };

struct SamplerConfig {
    ScaleMenu menu = ScaleMenu::three_branch();
    ScorePooling pooling = ScorePooling::mean;
};

/// FC layer from the Ng-long score vector to S scale logits.
struct SelectorParams {
    Tensor weight;             // S x Ng
    std::vector<double> bias;  // S

    std::size_t scales() const { return weight.dim(0); }
    std::size_t global_tokens() const { return weight.dim(1); }

    /// Weights uniform in [-1/sqrt(Ng), 1/sqrt(Ng)], zero bias.
    static SelectorParams init(std::size_t scales, std::size_t global_tokens, std::uint64_t seed) {
        detail::require(scales >= 1 && global_tokens >= 1, Errc::invalid_argument, "selector dims must be positive");
        std::mt19937_64 rng(seed);
        const double bound = 1.0 / std::sqrt(static_cast<double>(global_tokens));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor w({scales, global_tokens});
        for (double& x : w.values()) x = dist(rng);
        return {std::move(w), std::vector<double>(scales, 0.0)};
    }

    /// Packs into the S x (Ng + 1) layout of a SELW file.
    Tensor packed() const {
        const std::size_t s = scales(), ng = global_tokens();
        Tensor out({s, ng + 1});
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < ng; ++j) out(i, j) = weight(i, j);
            out(i, ng) = bias[i];
        }
        return out;
    }

    static SelectorParams unpack(const Tensor& packed) {
        detail::require(packed.rank() == 2 && packed.dim(1) >= 2, Errc::dimension_mismatch,
                        "selector params must be S x (Ng + 1) with Ng >= 1");
        const std::size_t s = packed.dim(0), ng = packed.dim(1) - 1;
        Tensor w({s, ng});
        std::vector<double> b(s);
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < ng; ++j) w(i, j) = packed(i, j);
            b[i] = packed(i, ng);
        }
        return {std::move(w), std::move(b)};
    }
};

struct FeatureBlock {
    std::size_t region;
    Tensor values;  // w x w x C
};

struct RegionSelection {
    std::size_t region = 0;
    std::size_t scale = 0;
    std::vector<double> logits;
    std::vector<double> probs;
    double top1_prob = 1.0;
    std::size_t token_count = 0;
};

struct ScaleChoice {
    std::size_t index;
    std::vector<double> probs;
};

/// Grid-space window covered by one emitted token.
struct TokenFootprint {
    std::size_t region;
    std::size_t y, x;
    std::size_t h, w;
};

/// Emitted tokens, row-major (count x channels), with their source windows.
struct TokenSet {
    std::size_t channels = 0;
    std::vector<double> values;
    std::vector<TokenFootprint> footprints;

    std::size_t count() const noexcept { return footprints.size(); }
    std::span<const double> token(std::size_t i) const {
        return std::span<const double>(values).subspan(i * channels, channels);
    }
};

struct Compression {
    TokenSet tokens;
    std::vector<RegionSelection> selections;
    std::vector<std::vector<double>> scores;  // per region, empty for fixed selections
    std::size_t regions_y = 0;
    std::size_t regions_x = 0;
};

/// Accepts Hg x Wg x C or Ng x C and returns Ng x C.
inline Tensor global_tokens(const Tensor& global) {
    if (global.rank() == 2) return global;
    detail::require(global.rank() == 3, Errc::dimension_mismatch, "global features must be Hg x Wg x C or Ng x C");
    return global.reshaped({global.dim(0) * global.dim(1), global.dim(2)});
}

inline std::vector<FeatureBlock> partition(const Tensor& map, std::size_t window) {
    detail::require(map.rank() == 3, Errc::dimension_mismatch, "feature map must be H x W x C");
    detail::require(window >= 1, Errc::invalid_argument, "window size must be positive");
    const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
    detail::require(h % window == 0 && w % window == 0, Errc::dimension_mismatch,
                    "window " + std::to_string(window) + " does not divide map " + map.shape_string());
    const std::size_t ry = h / window, rx = w / window;
    std::vector<FeatureBlock> blocks;
    blocks.reserve(ry * rx);
    for (std::size_t by = 0; by < ry; ++by)
        for (std::size_t bx = 0; bx < rx; ++bx) {
            Tensor block({window, window, c});
            for (std::size_t y = 0; y < window; ++y)
                for (std::size_t x = 0; x < window; ++x)
                    for (std::size_t ch = 0; ch < c; ++ch)
                        block(y, x, ch) = map(by * window + y, bx * window + x, ch);
            blocks.push_back({by * rx + bx, std::move(block)});
        }
    return blocks;
}

/// Score_k = <pool(block), g_k> for every global token g_k.
inline std::vector<double> selector_score(const FeatureBlock& block, const Tensor& global,
                                          ScorePooling pooling = ScorePooling::mean) {
    const Tensor g = global_tokens(global);
    detail::require(block.values.rank() == 3 && g.dim(1) == block.values.dim(2), Errc::dimension_mismatch,
                    "selector_score: block channels differ from global channels");
    std::vector<double> pooled;
    if (pooling == ScorePooling::mean) {
        pooled = mean_pool(block.values);
    } else {
        const Tensor m = max_pool(block.values, block.values.dim(0), block.values.dim(1));
        pooled.assign(m.values().begin(), m.values().end());
    }
    return matvec(g, pooled);
}

/// Z = W score + b.
inline std::vector<double> selector_logits(std::span<const double> score, const SelectorParams& params) {
    detail::require(params.bias.size() == params.scales(), Errc::dimension_mismatch, "selector bias length differs from S");
    auto z = matvec(params.weight, score);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += params.bias[i];
    return z;
}

/// Softmax probabilities plus the lowest index attaining max(Z).
inline ScaleChoice choose_scale(std::span<const double> logits) {
    return {argmax(logits), softmax(logits)};
}

/// Applies one down-sampling path to a block; rows of the result are the
/// emitted tokens in row-major order.
inline Tensor downsample(const Tensor& block, const ScaleSpec& spec) {
    if (spec.discard) return {};
    const Tensor pooled = max_pool(block, spec.kh, spec.kw);
    return pooled.reshaped({pooled.dim(0) * pooled.dim(1), pooled.dim(2)});
}

namespace detail {

inline void append_region(Compression& out, const FeatureBlock& block, const ScaleSpec& spec, double scale_factor,
                          std::size_t window) {
    if (spec.discard) return;
    const Tensor tokens = downsample(block.values, spec);
    const std::size_t oy0 = (block.region / out.regions_x) * window;
    const std::size_t ox0 = (block.region % out.regions_x) * window;
    const std::size_t per_row = window / spec.kw;
    for (std::size_t t = 0; t < tokens.dim(0); ++t) {
        for (std::size_t ch = 0; ch < tokens.dim(1); ++ch) out.tokens.values.push_back(scale_factor * tokens(t, ch));
        out.tokens.footprints.push_back(
            {block.region, oy0 + (t / per_row) * spec.kh, ox0 + (t % per_row) * spec.kw, spec.kh, spec.kw});
    }
}

inline Compression compress_impl(const Tensor& map, const Tensor& global, const SelectorParams& params,
                                 const SamplerConfig& cfg, bool weighted) {
    const Tensor g = global_tokens(global);
    detail::require(params.scales() == cfg.menu.size(), Errc::dimension_mismatch,
                    "selector has " + std::to_string(params.scales()) + " scales, menu has " +
                        std::to_string(cfg.menu.size()));
    detail::require(params.global_tokens() == g.dim(0), Errc::dimension_mismatch,
                    "selector expects Ng=" + std::to_string(params.global_tokens()) + ", global map has " +
                        std::to_string(g.dim(0)));
    const std::size_t window = cfg.menu.window();
    const auto blocks = partition(map, window);
    Compression out;
    out.tokens.channels = map.dim(2);
    out.regions_y = map.dim(0) / window;
    out.regions_x = map.dim(1) / window;
    for (const auto& block : blocks) {
        auto score = selector_score(block, g, cfg.pooling);
        auto z = selector_logits(score, params);
        auto choice = choose_scale(z);
        const ScaleSpec& spec = cfg.menu[choice.index];
        const double top1 = choice.probs[choice.index];
        append_region(out, block, spec, weighted ? top1 : 1.0, window);
        out.selections.push_back({block.region, choice.index, std::move(z), std::move(choice.probs), top1,
                                  spec.token_count});
        out.scores.push_back(std::move(score));
    }
    return out;
}

}  // namespace detail

/// Hard selection: each region emits DS[argmax Z](X_r), regions in
/// row-major order, tokens row-major within a region.
inline Compression compress_inference(const Tensor& map, const Tensor& global, const SelectorParams& params,
                                      const SamplerConfig& cfg) {
    return detail::compress_impl(map, global, params, cfg, false);
}

/// Same selection path, with every token of region r scaled by the
/// softmax probability of its chosen scale.
inline Compression compress_training(const Tensor& map, const Tensor& global, const SelectorParams& params,
                                     const SamplerConfig& cfg) {
    return detail::compress_impl(map, global, params, cfg, true);
}

/// Emits the given per-region scale choices without running the selector.
/// Selections carry one-hot probabilities.
inline Compression compress_with_choices(const Tensor& map, const ScaleMenu& menu,
                                         std::span<const std::size_t> choices) {
    const std::size_t window = menu.window();
    const auto blocks = partition(map, window);
    detail::require(choices.size() == blocks.size(), Errc::dimension_mismatch,
                    "expected " + std::to_string(blocks.size()) + " scale choices, got " +
                        std::to_string(choices.size()));
    Compression out;
    out.tokens.channels = map.dim(2);
    out.regions_y = map.dim(0) / window;
    out.regions_x = map.dim(1) / window;
    for (const auto& block : blocks) {
        const std::size_t j = choices[block.region];
        detail::require(j < menu.size(), Errc::invalid_argument, "scale choice out of range");
        detail::append_region(out, block, menu[j], 1.0, window);
        std::vector<double> onehot(menu.size(), 0.0);
        onehot[j] = 1.0;
        out.selections.push_back({block.region, j, {}, std::move(onehot), 1.0, menu[j].token_count});
    }
    return out;
}

/// Tokens of the (1 x 1) path: every grid position, in partition order.
inline TokenSet partition_order_tokens(const Tensor& map, std::size_t window) {
    const ScaleMenu menu(window, std::vector<Kernel>{{window, window}, {1, 1}});
    const std::vector<std::size_t> choices((map.dim(0) / window) * (map.dim(1) / window), 1);
    return compress_with_choices(map, menu, choices).tokens;
}

}  // namespace c2f
