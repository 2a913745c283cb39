#include <gtest/gtest.h>

#include "imputad/metrics.hpp"
#include "oracles.hpp"

using namespace imputad;

namespace {

std::pair<std::vector<double>, Labels> random_case(Rng& rng, std::size_t n, bool ties) {
    std::vector<double> s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = ties ? static_cast<double>(rng.index(6)) : rng.uniform();
        y[i] = rng.uniform() < 0.3;
    }
    y[0] = 1;
    y[1] = 0;
    return {s, y};
}

}  // namespace

TEST(Prf, HandCounts) {
    auto r = prf(2, 1, 1);
    EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
    auto p = point_prf({1, 0, 1}, {1, 0, 1});
    EXPECT_EQ(p.precision, 1.0);
    EXPECT_EQ(p.recall, 1.0);
    EXPECT_EQ(p.f1, 1.0);
    auto z = point_prf({0, 0, 0}, {1, 0, 1});
    EXPECT_EQ(z.precision, 0.0);
    EXPECT_EQ(z.recall, 0.0);
    EXPECT_EQ(z.f1, 0.0);
    EXPECT_THROW(point_prf({1}, {1, 0}), Error);
}

TEST(Confusion, CountsSumToLength) {
    auto c = confusion({1, 1, 0, 0, 1}, {1, 0, 1, 0, 0});
    EXPECT_EQ(c.tp, 1u);
    EXPECT_EQ(c.fp, 2u);
    EXPECT_EQ(c.fn, 1u);
    EXPECT_EQ(c.tn, 1u);
    EXPECT_EQ(c.total(), 5u);
}

TEST(Prf, F1BoundedByTwiceEach) {
    Rng rng(1);
    for (int k = 0; k < 200; ++k) {
        auto r = prf(rng.index(20), rng.index(20), rng.index(20));
        EXPECT_LE(r.f1, std::min(2 * r.precision, 2 * r.recall) + 1e-15);
    }
}

TEST(PointAdjust, ExpandsHitSegments) {
    Labels truth{0, 1, 1, 1, 0, 1, 1, 0};
    Labels pred{0, 0, 1, 0, 0, 0, 0, 1};
    EXPECT_EQ(point_adjust(pred, truth), (Labels{0, 1, 1, 1, 0, 0, 0, 1}));
}

TEST(MatchIntervals, OverlapCounting) {
    auto m = match_intervals({{0, 2}, {10, 12}, {20, 20}}, {{1, 5}, {11, 11}, {30, 40}});
    EXPECT_EQ(m.recalled, 2u);
    EXPECT_EQ(m.precise, 2u);
    EXPECT_DOUBLE_EQ(m.recall(), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.precision(), 2.0 / 3.0);
}

TEST(Auroc, Examples) {
    EXPECT_EQ(auroc({0.9, 0.8, 0.1}, {1, 0, 0}), 1.0);
    EXPECT_EQ(auroc({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}), 0.5);
    try {
        auroc({0.1, 0.2}, {1, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "degenerate labels");
    }
}

TEST(Auroc, MatchesPairwiseOracle) {
    Rng rng(2);
    for (int k = 0; k < 40; ++k) {
        auto [s, y] = random_case(rng, 50, k % 2 == 0);
        EXPECT_NEAR(auroc(s, y), oracle::auroc_by_pairs(s, y), 1e-12);
    }
}

TEST(Auroc, InvarianceAndLabelFlip) {
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
        auto [s, y] = random_case(rng, 50, k % 2 == 0);
        std::vector<double> t(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) + 1.0;
        EXPECT_NEAR(auroc(t, y), auroc(s, y), 1e-12);
        Labels flipped(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
        EXPECT_NEAR(auroc(s, flipped), 1.0 - auroc(s, y), 1e-12);
    }
}

TEST(Auprc, Examples) {
    EXPECT_EQ(auprc({0.9, 0.2, 0.1}, {1, 0, 0}), 1.0);
    EXPECT_NEAR(auprc({1, 1, 1, 1, 1}, {1, 0, 0, 1, 0}), 2.0 / 5.0, 1e-15);
    EXPECT_THROW(auprc({0.1, 0.2}, {0, 0}), Error);
}

TEST(Auprc, MatchesThresholdOracle) {
    Rng rng(4);
    for (int k = 0; k < 40; ++k) {
        auto [s, y] = random_case(rng, 50, k % 2 == 1);
        EXPECT_NEAR(auprc(s, y), oracle::auprc_by_thresholds(s, y), 1e-12);
    }
}
