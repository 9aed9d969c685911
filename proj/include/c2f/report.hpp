#pragma once

// Token accounting and the JSON run report.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2f/error.hpp"
#include "c2f/losses.hpp"
#include "c2f/text_sampler.hpp"
#include "c2f/vision_sampler.hpp"

namespace c2f {

inline constexpr int kReportVersion = 1;

/// Tokens a model effectively processes when n of m tokens are removed at
/// layer i of L: m - n + i * n / L.
inline double effective_token_count(std::size_t m, std::size_t n, std::size_t layer, std::size_t total_layers) {
    detail::require(total_layers >= 1, Errc::invalid_argument, "total layers must be >= 1");
    detail::require(n <= m, Errc::invalid_argument, "removed tokens exceed input tokens");
    detail::require(layer < total_layers, Errc::invalid_argument, "insertion layer must be < total layers");
    return static_cast<double>(m) - static_cast<double>(n) +
           static_cast<double>(layer) * static_cast<double>(n) / static_cast<double>(total_layers);
}

/// f_i = (regions choosing scale i) / M
inline std::vector<double> scale_histogram(std::span<const RegionSelection> selections, std::size_t scales) {
    detail::require(!selections.empty(), Errc::invalid_argument, "no selections");
    std::vector<double> f(scales, 0.0);
    for (const auto& s : selections) {
        detail::require(s.scale < scales, Errc::dimension_mismatch, "selection scale out of range");
        f[s.scale] += 1.0;
    }
    for (double& x : f) x /= static_cast<double>(selections.size());
    return f;
}

/// H x W grid where every cell takes the value of the token covering it
/// (zero where no token does).
inline Tensor paint_footprints(std::size_t height, std::size_t width, std::span<const TokenFootprint> footprints,
                               std::span<const double> values) {
    detail::require(footprints.size() == values.size(), Errc::dimension_mismatch, "one value per footprint expected");
    Tensor grid({height, width});
    for (std::size_t t = 0; t < footprints.size(); ++t) {
        const auto& fp = footprints[t];
        detail::require(fp.y + fp.h <= height && fp.x + fp.w <= width, Errc::dimension_mismatch,
                        "footprint outside the grid");
        for (std::size_t y = fp.y; y < fp.y + fp.h; ++y)
            for (std::size_t x = fp.x; x < fp.x + fp.w; ++x) grid(y, x) = values[t];
    }
    return grid;
}

enum class Strategy { vision, text, both, heuristic };

inline std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::vision: return "vision";
        case Strategy::text: return "text";
        case Strategy::both: return "both";
        case Strategy::heuristic: return "heuristic";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "vision") return Strategy::vision;
    if (s == "text") return Strategy::text;
    if (s == "both") return Strategy::both;
    if (s == "heuristic") return Strategy::heuristic;
    throw Error(Errc::invalid_argument, "unknown strategy '" + s + "'");
}

struct VisionSummary {
    std::size_t window = 0;
    std::size_t regions_y = 0;
    std::size_t regions_x = 0;
    std::vector<std::string> scale_labels;
    std::vector<std::size_t> token_counts;
    std::size_t after_vision = 0;
    std::vector<double> f;
    std::vector<double> P;
    std::vector<RegionSelection> selections;
};

struct TextSummary {
    std::size_t candidates = 0;  // tokens entering the text sampler
    std::size_t k = 0;
    double gamma = 0.0;
    std::size_t layer = 0;
    std::size_t total_layers = 32;
    bool degenerate = false;
    std::vector<std::size_t> kept;
};

struct HeuristicSummary {
    double keep_fraction = 1.0;
    std::vector<std::size_t> kept;
};

struct CompressionReport {
    Strategy strategy = Strategy::vision;
    std::size_t input_tokens = 0;
    std::optional<VisionSummary> vision;
    std::optional<TextSummary> text;
    std::optional<HeuristicSummary> heuristic;
    double effective_tokens = 0.0;
};

/// Regions-y x regions-x grid of emitted token counts per region.
inline Tensor selection_grid(const VisionSummary& v) {
    detail::require(v.selections.size() == v.regions_y * v.regions_x, Errc::dimension_mismatch,
                    "selection count differs from the region grid");
    Tensor grid({v.regions_y, v.regions_x});
    for (const auto& s : v.selections) grid[s.region] = static_cast<double>(s.token_count);
    return grid;
}

inline VisionSummary summarize_vision(const Compression& c, const ScaleMenu& menu) {
    VisionSummary v;
    v.window = menu.window();
    v.regions_y = c.regions_y;
    v.regions_x = c.regions_x;
    for (const auto& s : menu.scales()) v.scale_labels.push_back(s.label());
    v.token_counts = menu.token_counts();
    v.after_vision = c.tokens.count();
    const auto d = diagnostics(c.selections, menu.size());
    v.f = d.f;
    v.P = d.P;
    v.selections = c.selections;
    return v;
}

inline TextSummary summarize_text(const SelectionResult& sel, std::size_t candidates, std::size_t layer,
                                  std::size_t total_layers) {
    return {candidates, sel.k, sel.gamma, layer, total_layers, sel.degenerate, sel.kept};
}

/// Checks the cross-field invariants and fills effective_tokens.
inline void finalize(CompressionReport& r) {
    using detail::require;
    const bool want_vision = r.strategy == Strategy::vision || r.strategy == Strategy::both;
    const bool want_text = r.strategy == Strategy::text || r.strategy == Strategy::both;
    require(r.vision.has_value() == want_vision, Errc::invalid_argument, "vision section does not match strategy");
    require(r.text.has_value() == want_text, Errc::invalid_argument, "text section does not match strategy");
    require(r.heuristic.has_value() == (r.strategy == Strategy::heuristic), Errc::invalid_argument,
            "heuristic section does not match strategy");

    std::size_t pool = r.input_tokens;
    if (r.vision) {
        require(r.vision->selections.size() == r.vision->regions_y * r.vision->regions_x, Errc::invalid_argument,
                "selection count differs from the region grid");
        std::size_t sum = 0;
        for (const auto& s : r.vision->selections) sum += s.token_count;
        require(sum == r.vision->after_vision, Errc::invalid_argument, "afterVision differs from the selected token counts");
        require(r.vision->after_vision <= r.input_tokens, Errc::invalid_argument, "afterVision exceeds input tokens");
        double fs = 0.0;
        for (double x : r.vision->f) fs += x;
        require(std::abs(fs - 1.0) <= 1e-9, Errc::invalid_argument, "scale frequencies do not sum to 1");
        pool = r.vision->after_vision;
    }
    double effective = static_cast<double>(pool);
    if (r.text) {
        require(r.text->candidates == pool, Errc::invalid_argument, "text sampler candidates differ from its input");
        require(r.text->k == r.text->kept.size() && r.text->k <= pool, Errc::invalid_argument, "inconsistent kept count");
        effective = effective_token_count(pool, pool - r.text->k, r.text->layer, r.text->total_layers);
    }
    if (r.heuristic) {
        require(r.heuristic->kept.size() <= r.input_tokens, Errc::invalid_argument, "heuristic kept exceeds input");
        effective = static_cast<double>(r.heuristic->kept.size());
    }
    r.effective_tokens = effective;
}

inline nlohmann::ordered_json to_json(const CompressionReport& r) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["reportVersion"] = kReportVersion;
    j["strategy"] = strategy_name(r.strategy);
    j["inputTokens"] = r.input_tokens;
    j["afterVision"] = r.vision ? ordered_json(r.vision->after_vision) : ordered_json(nullptr);
    if (r.vision) {
        const auto& v = *r.vision;
        ordered_json vj;
        vj["window"] = v.window;
        vj["regionsY"] = v.regions_y;
        vj["regionsX"] = v.regions_x;
        vj["scales"] = v.scale_labels;
        vj["tokenCounts"] = v.token_counts;
        vj["regions"] = v.selections.size();
        vj["f"] = v.f;
        vj["P"] = v.P;
        ordered_json sels = ordered_json::array();
        for (const auto& s : v.selections) {
            ordered_json sj;
            sj["region"] = s.region;
            sj["scale"] = s.scale;
            sj["tokens"] = s.token_count;
            sj["top1Prob"] = s.top1_prob;
            sj["probs"] = s.probs;
            sels.push_back(std::move(sj));
        }
        vj["selections"] = std::move(sels);
        j["vision"] = std::move(vj);
    } else {
        j["vision"] = nullptr;
    }
    if (r.text) {
        const auto& t = *r.text;
        ordered_json tj;
        tj["candidates"] = t.candidates;
        tj["k"] = t.k;
        tj["gamma"] = t.gamma;
        tj["layer"] = t.layer;
        tj["totalLayers"] = t.total_layers;
        tj["degenerate"] = t.degenerate;
        tj["kept"] = t.kept;
        j["textSelection"] = std::move(tj);
    } else {
        j["textSelection"] = nullptr;
    }
    if (r.heuristic) {
        ordered_json hj;
        hj["keepFraction"] = r.heuristic->keep_fraction;
        hj["kept"] = r.heuristic->kept.size();
        hj["indices"] = r.heuristic->kept;
        j["heuristic"] = std::move(hj);
    } else {
        j["heuristic"] = nullptr;
    }
    j["effectiveTokens"] = r.effective_tokens;
    j["retainedFraction"] = r.input_tokens ? r.effective_tokens / static_cast<double>(r.input_tokens) : 0.0;
    return j;
}

inline CompressionReport report_from_json(const nlohmann::ordered_json& j) {
    try {
        detail::require(j.at("reportVersion").get<int>() == kReportVersion, Errc::bad_version, "unsupported report version");
        CompressionReport r;
        r.strategy = parse_strategy(j.at("strategy").get<std::string>());
        r.input_tokens = j.at("inputTokens").get<std::size_t>();
        if (!j.at("vision").is_null()) {
            const auto& vj = j.at("vision");
            VisionSummary v;
            v.window = vj.at("window").get<std::size_t>();
            v.regions_y = vj.at("regionsY").get<std::size_t>();
            v.regions_x = vj.at("regionsX").get<std::size_t>();
            v.scale_labels = vj.at("scales").get<std::vector<std::string>>();
            v.token_counts = vj.at("tokenCounts").get<std::vector<std::size_t>>();
            v.after_vision = j.at("afterVision").get<std::size_t>();
            v.f = vj.at("f").get<std::vector<double>>();
            v.P = vj.at("P").get<std::vector<double>>();
            for (const auto& sj : vj.at("selections")) {
                RegionSelection s;
                s.region = sj.at("region").get<std::size_t>();
                s.scale = sj.at("scale").get<std::size_t>();
                s.token_count = sj.at("tokens").get<std::size_t>();
                s.top1_prob = sj.at("top1Prob").get<double>();
                s.probs = sj.at("probs").get<std::vector<double>>();
                v.selections.push_back(std::move(s));
            }
            r.vision = std::move(v);
        }
        if (!j.at("textSelection").is_null()) {
            const auto& tj = j.at("textSelection");
            TextSummary t;
            t.candidates = tj.at("candidates").get<std::size_t>();
            t.k = tj.at("k").get<std::size_t>();
            t.gamma = tj.at("gamma").get<double>();
            t.layer = tj.at("layer").get<std::size_t>();
            t.total_layers = tj.at("totalLayers").get<std::size_t>();
            t.degenerate = tj.at("degenerate").get<bool>();
            t.kept = tj.at("kept").get<std::vector<std::size_t>>();
            r.text = std::move(t);
        }
        if (!j.at("heuristic").is_null()) {
            const auto& hj = j.at("heuristic");
            r.heuristic = HeuristicSummary{hj.at("keepFraction").get<double>(),
                                           hj.at("indices").get<std::vector<std::size_t>>()};
        }
        const double stored = j.at("effectiveTokens").get<double>();
        finalize(r);
        detail::require(stored == r.effective_tokens, Errc::invalid_argument,
                        "effectiveTokens does not match the recorded selections");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::invalid_argument, std::string("malformed report: ") + e.what());
    }
}

}  // namespace c2f
