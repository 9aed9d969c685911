#pragma once

// Seeded synthetic fixtures standing in for encoder output.
//
// Generator recipe (all draws from one mt19937_64 seeded with `seed`, in
// this order):
//   1. map X (H x W x C)
//        uniform_noise:     every value ~ N(0, 1)
//        block_structured:  background ~ N(0, 0.05^2); then `rectangles`
//                           rectangles, each aligned to the window grid with
//                           random origin and a side of 1..max(1, R/2)
//                           regions, refilled with ~ N(0, 1)
//   2. global Xg (Hg x Wg x C): mean of X over each (H/Hg x W/Wg) cell when
//      the grid divides evenly, otherwise ~ N(0, 1)
//   3. Q (h x T x d) ~ N(0, 1)
//   4. K (h x H*W x d): K[h, n] = X[n] P_h with P_h (C x d) ~ N(0, 1/C);
//      grid positions n in row-major order

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/tensor.hpp"
#include "c2f/tensor_io.hpp"
#include "c2f/training.hpp"

namespace c2f {

enum class Structure { uniform_noise, block_structured };

struct SyntheticConfig {
    std::size_t H = 24, W = 24, C = 8;
    std::size_t Hg = 6, Wg = 6;
    std::size_t heads = 4, text_tokens = 8, head_dim = 16;
    std::size_t window = 4;
    std::size_t rectangles = 3;
    std::uint64_t seed = 0;
    Structure structure = Structure::block_structured;
};

struct SyntheticFixture {
    Tensor map;
    Tensor global;
    Tensor queries;
    Tensor keys;
};

inline void validate(const SyntheticConfig& c) {
    for (std::size_t v : {c.H, c.W, c.C, c.Hg, c.Wg, c.heads, c.text_tokens, c.head_dim, c.window})
        detail::require(v >= 1, Errc::invalid_argument, "synthetic dimensions must be >= 1");
    detail::require(c.H % c.window == 0 && c.W % c.window == 0, Errc::invalid_argument,
                    "map dims must be divisible by the window size");
}

/// Mean of each (H/Hg x W/Wg) cell; requires even division.
inline Tensor mean_thumbnail(const Tensor& map, std::size_t hg, std::size_t wg) {
    const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
    detail::require(h % hg == 0 && w % wg == 0, Errc::dimension_mismatch, "thumbnail grid does not divide the map");
    const std::size_t ch = h / hg, cw = w / wg;
    Tensor g({hg, wg, c});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t k = 0; k < c; ++k) g(y / ch, x / cw, k) += map(y, x, k);
    for (double& v : g.values()) v /= static_cast<double>(ch * cw);
    return g;
}

inline SyntheticFixture gen_synthetic(const SyntheticConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    Tensor map({cfg.H, cfg.W, cfg.C});
    if (cfg.structure == Structure::uniform_noise) {
        for (double& v : map.values()) v = unit(rng);
    } else {
        for (double& v : map.values()) v = 0.05 * unit(rng);
        const std::size_t ry = cfg.H / cfg.window, rx = cfg.W / cfg.window;
        for (std::size_t r = 0; r < cfg.rectangles; ++r) {
            const std::size_t hmax = std::max<std::size_t>(1, ry / 2), wmax = std::max<std::size_t>(1, rx / 2);
            const std::size_t rh = 1 + rng() % hmax, rw = 1 + rng() % wmax;
            const std::size_t oy = rng() % (ry - rh + 1), ox = rng() % (rx - rw + 1);
            for (std::size_t y = oy * cfg.window; y < (oy + rh) * cfg.window; ++y)
                for (std::size_t x = ox * cfg.window; x < (ox + rw) * cfg.window; ++x)
                    for (std::size_t k = 0; k < cfg.C; ++k) map(y, x, k) = unit(rng);
        }
    }

    Tensor global({cfg.Hg, cfg.Wg, cfg.C});
    if (cfg.H % cfg.Hg == 0 && cfg.W % cfg.Wg == 0)
        global = mean_thumbnail(map, cfg.Hg, cfg.Wg);
    else
        for (double& v : global.values()) v = unit(rng);

    Tensor q({cfg.heads, cfg.text_tokens, cfg.head_dim});
    for (double& v : q.values()) v = unit(rng);

    const std::size_t n = cfg.H * cfg.W;
    Tensor proj({cfg.heads, cfg.C, cfg.head_dim});
    const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.C));
    for (double& v : proj.values()) v = sd * unit(rng);
    Tensor k({cfg.heads, n, cfg.head_dim});
    const auto& x = map.data();
    for (std::size_t h = 0; h < cfg.heads; ++h)
        for (std::size_t pos = 0; pos < n; ++pos)
            for (std::size_t e = 0; e < cfg.head_dim; ++e) {
                double acc = 0.0;
                for (std::size_t c = 0; c < cfg.C; ++c) acc += x[pos * cfg.C + c] * proj(h, c, e);
                k(h, pos, e) = acc;
            }
    return {std::move(map), std::move(global), std::move(q), std::move(k)};
}

struct FixturePaths {
    std::filesystem::path map, global, queries, keys;
};

inline FixturePaths fixture_paths(const std::filesystem::path& dir) {
    return {dir / "map.fmap", dir / "global.fmap", dir / "queries.attn", dir / "keys.attn"};
}

inline FixturePaths write_fixture(const SyntheticFixture& fx, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    detail::require(!ec, Errc::io_failure, "cannot create " + dir.string());
    const auto paths = fixture_paths(dir);
    write_tensor(paths.map, fx.map, Magic::fmap);
    write_tensor(paths.global, fx.global, Magic::fmap);
    write_tensor(paths.queries, fx.queries, Magic::attn);
    write_tensor(paths.keys, fx.keys, Magic::attn);
    return paths;
}

struct IndifferentTaskConfig {
    std::size_t maps = 8;
    std::size_t H = 16, W = 16, C = 8;
    std::size_t window = 4;
    double offset = 0.15;  // shared component of every region descriptor
    double spread = 0.075;  // per-region variation
    std::uint64_t seed = 0;
};

/// Scale-indifferent training task: every region is constant, so every
/// down-sampling path emits identical token values and the downstream loss
/// cannot prefer one scale over another. Region values are offset + spread
/// * N(0, 1) per channel; the global map is the per-region thumbnail.
inline std::vector<TrainingSample> scale_indifferent_task(const IndifferentTaskConfig& cfg) {
    detail::require(cfg.maps >= 1 && cfg.C >= 1 && cfg.window >= 1 && cfg.H % cfg.window == 0 &&
                        cfg.W % cfg.window == 0,
                    Errc::invalid_argument, "invalid scale-indifferent task dims");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const std::size_t ry = cfg.H / cfg.window, rx = cfg.W / cfg.window;
    std::vector<TrainingSample> out;
    for (std::size_t m = 0; m < cfg.maps; ++m) {
        Tensor map({cfg.H, cfg.W, cfg.C});
        std::vector<double> value(cfg.C);
        for (std::size_t r = 0; r < ry * rx; ++r) {
            for (double& v : value) v = cfg.offset + cfg.spread * unit(rng);
            const std::size_t y0 = (r / rx) * cfg.window, x0 = (r % rx) * cfg.window;
            for (std::size_t y = y0; y < y0 + cfg.window; ++y)
                for (std::size_t x = x0; x < x0 + cfg.window; ++x)
                    for (std::size_t c = 0; c < cfg.C; ++c) map(y, x, c) = value[c];
        }
        Tensor global = mean_thumbnail(map, ry, rx);
        out.push_back({std::move(map), std::move(global)});
    }
    return out;
}

}  // namespace c2f
