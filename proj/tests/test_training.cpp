#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "c2f/gradcheck.hpp"
#include "c2f/synthetic.hpp"
#include "c2f/training.hpp"

using namespace c2f;

namespace {

std::vector<TrainingSample> small_batch(std::uint64_t seed) {
    IndifferentTaskConfig cfg;
    cfg.maps = 2;
    cfg.H = cfg.W = 8;
    cfg.seed = seed;
    return scale_indifferent_task(cfg);  // 4 regions per map, so Ng = 4
}

}  // namespace

TEST(SelectorGrad, ZeroWithoutAnyLoss) {
    const auto batch = small_batch(1);
    Objective obj;
    obj.loss.alpha = 0.0;
    obj.downstream.enabled = false;
    const auto g = selector_grad(batch, SelectorParams::init(3, 4, 2), {}, obj);
    for (double x : g.weight.values()) EXPECT_EQ(x, 0.0);
    for (double x : g.bias) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(g.forward.total, 0.0);
}

TEST(SelectorGrad, ForwardMatchesEvaluateObjective) {
    const auto batch = small_batch(2);
    const auto p = SelectorParams::init(3, 4, 3);
    const Objective obj;
    const auto g = selector_grad(batch, p, {}, obj);
    const auto fp = evaluate_objective(batch, p, {}, obj);
    EXPECT_DOUBLE_EQ(g.forward.total, fp.total);
    EXPECT_DOUBLE_EQ(fp.total, fp.downstream + fp.auxiliary);
    EXPECT_DOUBLE_EQ(fp.auxiliary, balance_loss(fp.diagnostics, obj.loss.alpha));
}

TEST(SelectorGrad, MatchesFiniteDifferences) {
    std::mt19937_64 rng(123);
    int checked = 0;
    for (int i = 0; i < 20; ++i) {
        const auto inst = random_gradcheck_instance(rng);
        const auto r = check_selector_gradient(inst.batch, inst.params, inst.cfg, inst.objective);
        if (r.skipped) continue;
        ++checked;
        EXPECT_LE(r.relative_error, 1e-4) << "instance " << i;
    }
    EXPECT_GE(checked, 15);
}

TEST(SelectorGrad, ImbalanceWeightsAreDifferentiated) {
    const auto batch = small_batch(4);
    Objective obj;
    obj.loss.imbalance_weights = std::vector<double>{0.5, 1.0, 1.5};
    obj.loss.alpha = 0.3;
    const auto r = check_selector_gradient(batch, SelectorParams::init(3, 4, 5), {}, obj);
    ASSERT_FALSE(r.skipped);
    EXPECT_LE(r.relative_error, 1e-4);
}

TEST(GradCheck, RelativeErrorMetric) {
    EXPECT_EQ(relative_error(std::vector<double>{0, 0}, std::vector<double>{0, 0}), 0.0);
    EXPECT_DOUBLE_EQ(relative_error(std::vector<double>{3, 4}, std::vector<double>{0, 0}), 1.0);
}

TEST(FlattenParams, RoundTrip) {
    const auto p = SelectorParams::init(3, 4, 6);
    const auto q = unflatten_params(flatten_params(p), 3, 4);
    EXPECT_EQ(q.weight, p.weight);
    EXPECT_EQ(q.bias, p.bias);
}

TEST(TrainSelector, ZeroLearningRateIsNoOp) {
    const auto batch = small_batch(7);
    TrainConfig tc;
    tc.steps = 10;
    tc.learning_rate = 0.0;
    tc.seed = 3;
    const auto run = train_selector(batch, {}, tc);
    const auto init = SelectorParams::init(3, 4, 3);
    EXPECT_EQ(run.params.weight, init.weight);
    EXPECT_EQ(run.params.bias, init.bias);
    ASSERT_EQ(run.history.size(), 10u);
    for (const auto& r : run.history) EXPECT_EQ(r.total, run.history.front().total);
    EXPECT_EQ(run.final_loss, run.history.front().total);
}

TEST(TrainSelector, DeterministicAndResumable) {
    const auto batch = small_batch(8);
    TrainConfig tc;
    tc.steps = 20;
    const auto a = train_selector(batch, {}, tc);
    const auto b = train_selector(batch, {}, tc);
    EXPECT_EQ(a.params.weight, b.params.weight);

    TrainConfig first = tc, second = tc;
    first.steps = 12;
    second.steps = 8;
    const auto half = train_selector(batch, {}, first);
    second.init = half.params;
    second.start_step = 12;
    const auto rest = train_selector(batch, {}, second);
    EXPECT_EQ(rest.history.front().step, 12u);
    EXPECT_EQ(rest.params.weight, a.params.weight);
    EXPECT_EQ(rest.history.back().total, a.history.back().total);
}

TEST(TrainSelector, LossDecreasesOnAverage) {
    const auto batch = small_batch(9);
    TrainConfig tc;
    tc.steps = 100;
    const auto run = train_selector(batch, {}, tc);
    EXPECT_LT(run.final_loss, run.history.front().total);
}

TEST(TrainSelector, RejectsBadConfig) {
    const auto batch = small_batch(10);
    TrainConfig tc;
    tc.steps = 0;
    EXPECT_THROW(train_selector(batch, {}, tc), Error);
    tc.steps = 1;
    tc.learning_rate = -1;
    EXPECT_THROW(train_selector(batch, {}, tc), Error);
    tc.learning_rate = 1;
    tc.objective.loss.imbalance_weights = std::vector<double>{1, 1};
    EXPECT_THROW(train_selector(batch, {}, tc), Error);
    EXPECT_THROW(train_selector(std::vector<TrainingSample>{}, {}, TrainConfig{}), Error);
}

TEST(TrainSelector, OverflowReportsDivergenceWithStep) {
    const std::vector<TrainingSample> batch{{Tensor::filled({4, 4, 2}, 1.0), Tensor::filled({1, 2}, 1.0)}};
    TrainConfig tc;
    tc.steps = 5;
    tc.start_step = 40;
    // Finite weights whose logits overflow on the first forward pass.
    tc.init = SelectorParams{Tensor::filled({3, 1}, std::numeric_limits<double>::max()), {0, 0, 0}};
    try {
        train_selector(batch, {}, tc);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::divergence);
        EXPECT_NE(std::string(e.what()).find("step 40"), std::string::npos) << e.what();
    }
}

TEST(Synthetic, SeededDeterminismAndShapes) {
    SyntheticConfig cfg;
    cfg.H = cfg.W = 8;
    cfg.C = 4;
    cfg.Hg = cfg.Wg = 2;
    cfg.structure = Structure::uniform_noise;
    const auto a = gen_synthetic(cfg), b = gen_synthetic(cfg);
    EXPECT_EQ(a.map.dims(), (std::vector<std::size_t>{8, 8, 4}));
    EXPECT_EQ(a.map, b.map);
    EXPECT_EQ(a.keys, b.keys);
    EXPECT_EQ(a.keys.dims(), (std::vector<std::size_t>{cfg.heads, 64, cfg.head_dim}));
    EXPECT_EQ(a.queries.dims(), (std::vector<std::size_t>{cfg.heads, cfg.text_tokens, cfg.head_dim}));
    cfg.seed = 1;
    EXPECT_NE(gen_synthetic(cfg).map, a.map);
}

TEST(Synthetic, InvalidDimsRejected) {
    SyntheticConfig cfg;
    cfg.H = 10;
    EXPECT_THROW(gen_synthetic(cfg), Error);
    cfg.H = 0;
    EXPECT_THROW(gen_synthetic(cfg), Error);
}

TEST(SelectorGrad, SingleBlockTwoScales) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n;
    Tensor map({4, 4, 3}), global({2, 3});
    for (double& x : map.values()) x = n(rng);
    for (double& x : global.values()) x = n(rng);
    const std::vector<TrainingSample> batch{{map, global}};
    const SamplerConfig cfg{ScaleMenu(4, std::vector<Kernel>{{4, 4}, {1, 1}}, false)};
    SelectorParams p{Tensor({2, 2}, {0.7, -0.3, 0.2, 0.5}), {0.1, -0.4}};
    const auto r = check_selector_gradient(batch, p, cfg, Objective{});
    ASSERT_FALSE(r.skipped);
    EXPECT_LE(r.relative_error, 1e-4);
}
