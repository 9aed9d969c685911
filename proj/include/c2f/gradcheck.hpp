#pragma once

// Random small selector-training instances for gradient verification.

#include <cstddef>
#include <random>
#include <vector>

#include "c2f/training.hpp"
#include "c2f/vision_sampler.hpp"

namespace c2f {

struct GradCheckInstance {
    std::vector<TrainingSample> batch;
    SelectorParams params;
    SamplerConfig cfg;
    Objective objective;
};

/// Default 3-scale menu, w = 4, C in [1, 8], Ng = Hg * Wg <= 64, one or two
/// 8x8 maps, random alpha in [0, 0.5], and either a random explicit
/// downstream target or the per-region default.
inline GradCheckInstance random_gradcheck_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> channels(1, 8), grid(1, 8), maps(1, 2);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> alpha(0.0, 0.5);
    std::bernoulli_distribution coin(0.5);

    GradCheckInstance inst;
    inst.cfg = SamplerConfig{ScaleMenu::three_branch(4), ScorePooling::mean};
    const std::size_t c = channels(rng), hg = grid(rng), wg = grid(rng), n = maps(rng);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor map({8, 8, c}), global({hg, wg, c});
        for (double& v : map.values()) v = unit(rng);
        for (double& v : global.values()) v = unit(rng);
        inst.batch.push_back({std::move(map), std::move(global)});
    }
    const std::size_t ng = hg * wg;
    Tensor w({3, ng});
    for (double& v : w.values()) v = unit(rng) / std::sqrt(static_cast<double>(ng));
    std::vector<double> b(3);
    for (double& v : b) v = 0.5 * unit(rng);
    inst.params = {std::move(w), std::move(b)};
    inst.objective.loss.alpha = alpha(rng);
    if (coin(rng)) {
        std::vector<double> target(c);
        for (double& v : target) v = unit(rng);
        inst.objective.downstream.target = std::move(target);
    }
    return inst;
}

}  // namespace c2f
