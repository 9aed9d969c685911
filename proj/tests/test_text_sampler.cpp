#include <gtest/gtest.h>

#include <random>
#include <set>

#include "c2f/text_sampler.hpp"
#include "c2f/vision_sampler.hpp"

using namespace c2f;

TEST(AttentionScores, ZeroQueriesGiveUniformRows) {
    const Tensor a = attention_scores(Tensor({2, 3, 4}), Tensor::filled({2, 5, 4}, 0.3));
    ASSERT_EQ(a.dims(), (std::vector<std::size_t>{2, 3, 5}));
    for (double x : a.values()) EXPECT_NEAR(x, 0.2, 1e-15);
}

TEST(AttentionScores, HandSoftmax) {
    const Tensor a = attention_scores(Tensor({1, 1, 1}, {2}), Tensor({1, 2, 1}, {1, 0}));
    EXPECT_NEAR(a[0], 0.8808, 1e-4);
    EXPECT_NEAR(a[1], 0.1192, 1e-4);
}

TEST(AttentionScores, ShapeMismatchThrows) {
    EXPECT_THROW(attention_scores(Tensor({2, 1, 3}), Tensor({1, 4, 3})), Error);
    EXPECT_THROW(attention_scores(Tensor({1, 1, 3}), Tensor({1, 4, 2})), Error);
}

TEST(Importance, MaxOverHeadsThenMeanOverText) {
    const Tensor a({2, 1, 2}, {0.9, 0.1, 0.3, 0.7});
    const auto s = importance(a);
    EXPECT_DOUBLE_EQ(s[0], 0.9);
    EXPECT_DOUBLE_EQ(s[1], 0.7);
}

TEST(Importance, UniformAttention) {
    for (double x : importance(Tensor::filled({3, 4, 8}, 0.125))) EXPECT_DOUBLE_EQ(x, 0.125);
}

TEST(Importance, PerLayerSlices) {
    std::vector<double> data(2 * 2 * 1 * 2);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = 0.1 * static_cast<double>(i);
    const auto layers = per_layer_importance(Tensor({2, 2, 1, 2}, data));
    ASSERT_EQ(layers.size(), 2u);
    EXPECT_EQ(layers[0], importance(Tensor({2, 1, 2}, {data[0], data[1], data[2], data[3]})));
    EXPECT_EQ(layers[1], importance(Tensor({2, 1, 2}, {data[4], data[5], data[6], data[7]})));
}

TEST(CumulativeTopk, WorkedExample) {
    const auto r = cumulative_topk(std::vector<double>{0.1, 0.4, 0.2, 0.3}, 0.6);
    EXPECT_EQ(r.k, 2u);
    EXPECT_EQ(r.kept, (std::vector<std::size_t>{1, 3}));
    EXPECT_FALSE(r.degenerate);
}

TEST(CumulativeTopk, TinyGammaKeepsOne) {
    EXPECT_EQ(cumulative_topk(std::vector<double>{0.1, 0.4, 0.2, 0.3}, 1e-12).k, 1u);
}

TEST(CumulativeTopk, GammaOneKeepsAll) {
    const auto r = cumulative_topk(std::vector<double>{0.1, 0.4, 0.2, 0.3}, 1.0);
    EXPECT_EQ(r.k, 4u);
    EXPECT_EQ(r.kept, (std::vector<std::size_t>{1, 3, 2, 0}));
}

TEST(CumulativeTopk, AllZeroIsDegenerate) {
    const auto r = cumulative_topk(std::vector<double>{0, 0, 0}, 0.5);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.k, 3u);
}

TEST(CumulativeTopk, RejectsBadInput) {
    EXPECT_THROW(cumulative_topk(std::vector<double>{1}, 0.0), Error);
    EXPECT_THROW(cumulative_topk(std::vector<double>{1}, 1.5), Error);
    EXPECT_THROW(cumulative_topk(std::vector<double>{}, 0.5), Error);
    EXPECT_THROW(cumulative_topk(std::vector<double>{-1, 2}, 0.5), Error);
}

TEST(CumulativeTopk, KeptSetGrowsWithGamma) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(1 + trial % 40);
        for (double& x : s) x = u(rng);
        std::set<std::size_t> prev;
        for (double g : {0.1, 0.3, 0.5, 0.7, 0.85, 0.99, 1.0}) {
            const auto r = cumulative_topk(s, g);
            const std::set<std::size_t> cur(r.kept.begin(), r.kept.end());
            EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
            prev = cur;
        }
    }
}

TEST(Stochastic, DegenerateRange) {
    StochasticSampler s({8, 8, 0.85, 0.85, 3});
    for (int i = 0; i < 20; ++i) {
        const auto d = s.draw();
        EXPECT_EQ(d.layer, 8u);
        EXPECT_EQ(d.gamma, 0.85);
    }
    EXPECT_EQ(s.draws(), 20u);
}

TEST(Stochastic, DefaultRangeCoverage) {
    StochasticSampler s({});
    std::set<std::size_t> layers;
    for (int i = 0; i < 10000; ++i) {
        const auto d = s.draw();
        EXPECT_GE(d.layer, 8u);
        EXPECT_LE(d.layer, 24u);
        EXPECT_GE(d.gamma, 0.7);
        EXPECT_LE(d.gamma, 1.0);
        layers.insert(d.layer);
    }
    EXPECT_EQ(layers.size(), 17u);
}

TEST(Stochastic, SeededDeterminism) {
    StochasticSampler a({8, 24, 0.7, 1.0, 42}), b({8, 24, 0.7, 1.0, 42});
    for (int i = 0; i < 50; ++i) {
        const auto x = a.draw(), y = b.draw();
        EXPECT_EQ(x.layer, y.layer);
        EXPECT_EQ(x.gamma, y.gamma);
    }
}

TEST(Stochastic, InvalidRanges) {
    EXPECT_THROW(StochasticSampler({10, 8, 0.7, 1.0, 0}), Error);
    EXPECT_THROW(StochasticSampler({8, 32, 0.7, 1.0, 0}), Error);
    EXPECT_THROW(StochasticSampler({8, 24, 0.9, 0.7, 0}), Error);
    EXPECT_THROW(StochasticSampler({8, 24, 0.0, 0.7, 0}), Error);
}

TEST(PoolKeys, MaxOverFootprint) {
    // 1 head, 2x2 grid, d=1.
    const Tensor keys({1, 4, 1}, {1, 5, 3, 2});
    const std::vector<TokenFootprint> fps{{0, 0, 0, 2, 2}, {0, 1, 0, 1, 2}, {0, 0, 1, 1, 1}};
    const Tensor pooled = pool_keys(keys, 2, fps);
    EXPECT_EQ(pooled.values()[0], 5.0);
    EXPECT_EQ(pooled.values()[1], 3.0);
    EXPECT_EQ(pooled.values()[2], 5.0);
}

TEST(Importance, SingleHeadIsColumnMean) {
    const Tensor a({1, 2, 3}, {0.2, 0.3, 0.5, 0.6, 0.1, 0.3});
    const auto s = importance(a);
    EXPECT_DOUBLE_EQ(s[0], 0.4);
    EXPECT_DOUBLE_EQ(s[1], 0.2);
    EXPECT_DOUBLE_EQ(s[2], 0.4);
}

TEST(CumulativeTopk, PrefixIsMinimal) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> s(1 + trial % 50);
        for (double& x : s) x = u(rng);
        const double gamma = 0.05 + 0.9 * u(rng);
        const auto r = cumulative_topk(s, gamma);
        double total = 0, before = 0;
        for (double x : s) total += x;
        for (std::size_t j = 0; j + 1 < r.k; ++j) before += s[r.kept[j]];
        const double with = before + s[r.kept[r.k - 1]];
        EXPECT_GT(with / total, gamma);
        if (r.k > 1) {
            EXPECT_LE(before / total, gamma);
        }
    }
}
