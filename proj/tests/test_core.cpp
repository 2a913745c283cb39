#include <gtest/gtest.h>

#include <set>

#include "imputad/core.hpp"
#include "imputad/random.hpp"

using namespace imputad;

namespace {

TimeSeries row(std::vector<double> v) {
    const auto n = v.size();
    return TimeSeries(Tensor(1, n, std::move(v)));
}

std::vector<std::size_t> starts(const std::vector<Window>& ws) {
    std::vector<std::size_t> s;
    for (const auto& w : ws) s.push_back(w.start);
    return s;
}

}  // namespace

TEST(TimeSeries, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(TimeSeries(Tensor(1, 0)), Error);
    EXPECT_THROW(TimeSeries(Tensor(0, 3)), Error);
    EXPECT_THROW(row({1.0, std::nan("")}), Error);
    EXPECT_THROW(row({1.0, INFINITY}), Error);
}

TEST(TimeSeries, ValidatesLabels) {
    EXPECT_THROW(TimeSeries(Tensor(1, 3), Labels{0, 1}), Error);
    EXPECT_THROW(TimeSeries(Tensor(1, 2), Labels{0, 2}), Error);
    TimeSeries x(Tensor(2, 3), Labels{0, 1, 0}, "a");
    EXPECT_EQ(x.variates(), 2u);
    EXPECT_EQ(x.length(), 3u);
    EXPECT_EQ(x.id(), "a");
}

TEST(TimeSeries, SliceKeepsLabels) {
    TimeSeries x(Tensor(1, 5, {0, 1, 2, 3, 4}), Labels{0, 0, 1, 1, 0});
    auto s = x.slice(2, 2);
    EXPECT_EQ(s.values().data, (std::vector<double>{2, 3}));
    EXPECT_EQ(*s.labels(), (Labels{1, 1}));
    EXPECT_THROW(x.slice(4, 2), Error);
}

TEST(AnomalyInterval, LengthAndOverlap) {
    AnomalyInterval a{3, 3}, b{2, 5}, c{6, 7};
    EXPECT_EQ(a.length(), 1u);
    EXPECT_EQ(b.length(), 4u);
    EXPECT_TRUE(a.overlaps(b));
    EXPECT_FALSE(b.overlaps(c));
    EXPECT_TRUE(b.contains(5));
}

TEST(Labels, IntervalRoundTrip) {
    Labels l{0, 1, 1, 0, 0, 1, 0, 1};
    auto iv = labels_to_intervals(l);
    ASSERT_EQ(iv.size(), 3u);
    EXPECT_EQ(iv[0].start, 1u);
    EXPECT_EQ(iv[0].end, 2u);
    EXPECT_EQ(iv[2].start, 7u);
    EXPECT_EQ(intervals_to_labels(iv, l.size()), l);
    EXPECT_THROW(intervals_to_labels({{3, 9}}, 5), Error);
}

TEST(FitNormalizer, ConstantSeriesClampsStd) {
    auto s = fit_normalizer(row({5, 5, 5}));
    EXPECT_DOUBLE_EQ(s.mean[0], 5.0);
    EXPECT_DOUBLE_EQ(s.stddev[0], 1.0);
}

TEST(FitNormalizer, TwoPointPopulationStd) {
    auto s = fit_normalizer(row({0, 2}));
    EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(s.stddev[0], 1.0);
}

TEST(FitNormalizer, PerVariateMeans) {
    // Timesteps (0,10) and (0,20): variate 0 is all zeros, variate 1 averages 15.
    TimeSeries x(Tensor(2, 2, {0, 0, 10, 20}));
    auto s = fit_normalizer(x);
    EXPECT_DOUBLE_EQ(s.mean[0], 0.0);
    EXPECT_DOUBLE_EQ(s.mean[1], 15.0);
}

TEST(Normalize, Arithmetic) {
    NormalizationStats s{{2.0}, {1.0}};
    EXPECT_EQ(normalize(row({1, 3}), s).values().data, (std::vector<double>{-1, 1}));
}

TEST(Normalize, RoundTripAndZeroMean) {
    Rng rng(7);
    Tensor v(3, 50);
    for (double& x : v.data) x = rng.uniform(-20, 40);
    TimeSeries x(v, Labels(50, 0));
    auto stats = fit_normalizer(x);
    auto z = normalize(x, stats);
    for (std::size_t i = 0; i < 3; ++i) {
        double m = 0;
        for (double e : z.values().row(i)) m += e;
        EXPECT_NEAR(m / 50.0, 0.0, 1e-9);
    }
    auto back = denormalize(z, stats);
    for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(back.values().data[k], v.data[k], 1e-9);
    EXPECT_EQ(z.labels(), x.labels());

    NormalizationStats s2{{1.0, 2.0, 3.0}, {0.5, 2.0, 4.0}};
    auto y = normalize(denormalize(z, s2), s2);
    for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(y.values().data[k], z.values().data[k], 1e-9);
}

TEST(Normalize, DimensionMismatch) {
    NormalizationStats s{{0.0, 0.0}, {1.0, 1.0}};
    EXPECT_THROW(normalize(row({1, 2}), s), Error);
}

TEST(SliceWindows, Examples) {
    EXPECT_EQ(starts(slice_windows(10, 4, 2)), (std::vector<std::size_t>{0, 2, 4, 6}));
    EXPECT_EQ(starts(slice_windows(10, 4, 3)), (std::vector<std::size_t>{0, 3, 6}));
    EXPECT_EQ(starts(slice_windows(9, 4, 4)), (std::vector<std::size_t>{0, 4, 5}));
}

TEST(SliceWindows, WindowLongerThanSeries) {
    auto w = slice_windows(5, 8, 2);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].start, 0u);
    EXPECT_EQ(w[0].length, 5u);
}

TEST(SliceWindows, StrideLargerThanWindowIsError) { EXPECT_THROW(slice_windows(10, 3, 4), Error); }

TEST(SliceWindows, CoverageByEnumeration) {
    for (std::size_t T = 1; T <= 40; ++T)
        for (std::size_t w = 1; w <= T; ++w)
            for (std::size_t mu = 1; mu <= w; ++mu) {
                std::set<std::size_t> covered;
                for (const auto& win : slice_windows(T, w, mu)) {
                    ASSERT_EQ(win.length, w);
                    ASSERT_LE(win.end(), T - 1);
                    for (std::size_t t = win.start; t <= win.end(); ++t) covered.insert(t);
                }
                ASSERT_EQ(covered.size(), T) << "T=" << T << " w=" << w << " mu=" << mu;
            }
}
