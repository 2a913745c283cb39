#include <gtest/gtest.h>

#include "imputad/masking.hpp"
#include "oracles.hpp"

using namespace imputad;

TEST(PointMasks, BalancedExactSplit) {
    auto set = make_point_masks(2, 8, 4, 1);
    ASSERT_EQ(set.masks.size(), 4u);
    for (const auto& m : set.masks) EXPECT_EQ(m.size(), 4u);
    EXPECT_EQ(oracle::point_partition_error(set, 4), "");
}

TEST(PointMasks, SingleMaskCoversAll) {
    auto set = make_point_masks(1, 5, 1, 3);
    ASSERT_EQ(set.masks.size(), 1u);
    EXPECT_EQ(set.masks[0], (std::vector<ElementIndex>{0, 1, 2, 3, 4}));
}

TEST(PointMasks, UnevenSplitSizes) {
    auto set = make_point_masks(1, 5, 2, 9);
    std::multiset<std::size_t> sizes{set.masks[0].size(), set.masks[1].size()};
    EXPECT_EQ(sizes, (std::multiset<std::size_t>{2, 3}));
    EXPECT_EQ(oracle::point_partition_error(set, 2), "");
}

TEST(PointMasks, TooManyMasks) {
    try {
        make_point_masks(1, 4, 5, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "mask count exceeds element count");
    }
}

TEST(PointMasks, Determinism) {
    EXPECT_EQ(make_point_masks(3, 20, 6, 42).masks, make_point_masks(3, 20, 6, 42).masks);
    const auto base = make_point_masks(3, 20, 6, 0).masks;
    bool differs = false;
    for (std::uint64_t s = 1; s <= 10; ++s) differs |= make_point_masks(3, 20, 6, s).masks != base;
    EXPECT_TRUE(differs);
}

TEST(PointMasks, RandomPartitions) {
    Rng rng(2024);
    for (int k = 0; k < 300; ++k) {
        const std::size_t d = 1 + rng.index(4), T = 1 + rng.index(60), M = 1 + rng.index(d * T);
        auto set = make_point_masks(d, T, M, rng.next());
        ASSERT_EQ(oracle::point_partition_error(set, M), "") << d << "x" << T << " M=" << M;
    }
}

TEST(SequenceMasks, Examples) {
    auto a = make_sequence_masks(100, 5);
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_EQ(a.segments[k].start, 20 * k);
        EXPECT_EQ(a.segments[k].end(), 20 * k + 19);
    }
    auto b = make_sequence_masks(10, 3);
    EXPECT_EQ(b.segments[0].length, 4u);
    EXPECT_EQ(b.segments[1].length, 3u);
    EXPECT_EQ(b.segments[2].length, 3u);
    auto c = make_sequence_masks(7, 7);
    for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(c.segments[k].length, 1u);
}

TEST(SequenceMasks, TooManySegments) { EXPECT_THROW(make_sequence_masks(3, 4), Error); }

TEST(SequenceMasks, RandomPartitions) {
    Rng rng(5);
    for (int k = 0; k < 300; ++k) {
        const std::size_t T = 1 + rng.index(200), N = 1 + rng.index(T);
        ASSERT_EQ(oracle::sequence_partition_error(make_sequence_masks(T, N), N), "");
    }
}

TEST(Materialize, PointSamples) {
    Rng rng(1);
    Tensor x = oracle::random_tensor(rng, 2, 8);
    auto samples = materialize_samples(x, make_point_masks(2, 8, 4, 17));
    ASSERT_EQ(samples.size(), 4u);
    for (const auto& s : samples) {
        EXPECT_EQ(s.mask.size(), 4u);
        for (std::size_t e = 0; e < x.size(); ++e) {
            const bool masked = std::binary_search(s.mask.begin(), s.mask.end(), e);
            EXPECT_EQ(s.input.data[e], masked ? kMaskFill : x.data[e]);
        }
    }
}

TEST(Materialize, SingleMaskIsAllSentinel) {
    Tensor x(1, 6, {1, 2, 3, 4, 5, 6});
    auto samples = materialize_samples(x, make_point_masks(1, 6, 1, 0));
    ASSERT_EQ(samples.size(), 1u);
    for (double v : samples[0].input.data) EXPECT_EQ(v, kMaskFill);
}

TEST(Materialize, TargetsReassembleSeries) {
    Rng rng(3);
    Tensor x = oracle::random_tensor(rng, 3, 17);
    Tensor point(3, 17, std::nan("")), seq(3, 17, std::nan(""));
    for (const auto& s : materialize_samples(x, make_point_masks(3, 17, 5, 8)))
        for (std::size_t j = 0; j < s.mask.size(); ++j) point.data[s.mask[j]] = s.target[j];
    for (const auto& s : materialize_samples(x, make_sequence_masks(17, 4))) {
        ASSERT_TRUE(s.segment.has_value());
        for (std::size_t j = 0; j < s.mask.size(); ++j) seq.data[s.mask[j]] = s.target[j];
    }
    EXPECT_EQ(point.data, x.data);
    EXPECT_EQ(seq.data, x.data);
}

TEST(Materialize, ShapeMismatch) {
    Tensor x(2, 8);
    EXPECT_THROW(materialize_samples(x, make_point_masks(2, 9, 3, 0)), Error);
    EXPECT_THROW(materialize_samples(x, make_sequence_masks(7, 3)), Error);
}

TEST(MaskJson, RoundTrip) {
    auto p = make_point_masks(2, 9, 4, 77);
    nlohmann::json j = p;
    auto p2 = j.get<PointMaskSet>();
    EXPECT_EQ(p2.masks, p.masks);
    EXPECT_EQ(p2.seed, 77u);
    auto s = make_sequence_masks(11, 3);
    nlohmann::json k = s;
    auto s2 = k.get<SequenceMaskSet>();
    ASSERT_EQ(s2.segments.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s2.segments[i].start, s.segments[i].start);
    EXPECT_THROW(k.get<PointMaskSet>(), Error);
}
