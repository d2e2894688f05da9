#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "degdiff/parallel.hpp"
#include "degdiff/rng.hpp"
#include "degdiff/stats.hpp"

using namespace degdiff;

TEST(Rng, DerivedSeedsAreStable) {
    EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(2, {2, 3}));
    EXPECT_EQ(hash_tag("sweep"), hash_tag("sweep"));
    EXPECT_NE(hash_tag("sweep"), hash_tag("couple"));
    GaussianStream a(5), b(5);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Stats, RunningMerge) {
    RunningStats all, left, right;
    for (int i = 0; i < 100; ++i) {
        const double v = std::sin(i);
        all.add(v);
        (i < 37 ? left : right).add(v);
    }
    left.merge(right);
    EXPECT_EQ(left.count(), 100u);
    EXPECT_NEAR(left.mean(), all.mean(), 1e-15);
    EXPECT_NEAR(left.variance(), all.variance(), 1e-14);
}

TEST(Stats, QuantileKsSlope) {
    const std::vector<double> v{1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.9), 4.6);
    EXPECT_DOUBLE_EQ(ks_distance(v, v), 0.0);
    const std::vector<double> w{6, 7, 8};
    EXPECT_DOUBLE_EQ(ks_distance(v, w), 1.0);
    const std::vector<double> x{0, 1, 2}, y{1, 3, 5};
    EXPECT_DOUBLE_EQ(fit_slope(x, y), 2.0);
}

TEST(Parallel, OrderIndependentOfThreads) {
    std::vector<double> a(1000), b(1000);
    parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = GaussianStream(derive_seed(3, {i}))(); });
    parallel_for(b.size(), 4, [&](std::size_t i) { b[i] = GaussianStream(derive_seed(3, {i}))(); });
    EXPECT_EQ(a, b);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                 std::runtime_error);
}
