#include <cmath>

#include <gtest/gtest.h>
#include <json.hpp>

#include "degdiff/inequalities.hpp"

using namespace degdiff;

namespace {
const double kPStar = 1.0 - std::sqrt(2.0) / 4.0;
}

TEST(PowerGapInequality, DiagonalVanishes) {
    const auto r = lemmaA1_check(0.4, 0.4, 0.7);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.rhs, 0.0);
}

TEST(PowerGapInequality, SharpNearDiagonal) {
    // p = 3/4: constant 1/3; the ratio lhs/rhs tends to 1 as y -> x.
    const auto r = lemmaA1_check(1.0, 1.0 - 1e-4, 0.75);
    EXPECT_LE(r.lhs, r.rhs * (1.0 + kPointwiseSlack));
    EXPECT_NEAR(r.lhs / r.rhs, 1.0, 1e-3);
    const auto far = lemmaA1_check(1.0, 0.1, 0.75);
    EXPECT_LT(far.lhs, far.rhs);
}

TEST(PowerGapInequality, RandomSamples) {
    const auto rep = sample_lemmaA1(100000, 3);
    EXPECT_EQ(rep.samples, 100000u);
    EXPECT_EQ(rep.violations, 0u);
    EXPECT_TRUE(rep.passed);
}

// Claimed supremum (q-1)^2/(q(2-q)); values from a 40-digit evaluation.
TEST(A1Supremum, ClaimedValues) {
    const std::pair<double, double> cases[] = {{1.1, 0.0101010101010101},
                                               {1.5, 1.0 / 3.0},
                                               {1.9, 4.26315789473684},
                                               {2.0 * kPStar, 0.0938363213560543}};
    for (const auto& [q, claimed] : cases) {
        const auto rep = a1_supremum(q);
        EXPECT_NEAR(rep.claimed, claimed, 1e-13 * claimed) << q;
        EXPECT_TRUE(rep.passed) << q;
        EXPECT_LE(rep.estimate, claimed * (1.0 + 1e-12)) << q;
        EXPECT_NEAR(rep.estimate, claimed, 1e-6) << q;
    }
    EXPECT_LT(a1_supremum(1.0 + 1e-4).claimed, 1e-7);
}

TEST(FMonotone, LimitAndDecrease) {
    const auto mid = f_monotone_check(1.5, 10000);
    EXPECT_DOUBLE_EQ(mid.limit_claimed, 3.0);
    EXPECT_TRUE(mid.passed);
    for (double q : {1.1, 1.9}) {
        const auto rep = f_monotone_check(q, 10000);
        EXPECT_TRUE(rep.decreasing) << q;
        EXPECT_TRUE(rep.above_limit) << q;
        EXPECT_TRUE(rep.passed) << q;
    }
}

TEST(FChain, EndpointAndSigns) {
    EXPECT_EQ(a1_f2(1.5, 1.0), 0.0);
    for (auto f : {a1_f1, a1_f2, a1_f3, a1_f4}) EXPECT_EQ(f(1.5, 1.0), 0.0);
    EXPECT_LE(a1_f1(1.5, 0.5), 0.0);
    EXPECT_LE(a1_f2(1.5, 0.5), 0.0);
    EXPECT_GE(a1_f3(1.5, 0.5), 0.0);
    EXPECT_LE(a1_f4(1.5, 0.5), 0.0);
    for (int k = 1; k <= 19; ++k) {
        const double q = 1.0 + 0.05 * k;
        const auto rep = f_chain_signs(q, 10000);
        EXPECT_TRUE(rep.passed) << q << ": " << rep.first_failure;
    }
}

TEST(MixedTermBound, Constants) {
    // w -> 1 limit (p - 1/2)/(p(1-p)) wins for p = 3/4; w -> 0 limit 1 wins near p*.
    const auto a = lemma33_supremum(0.75);
    EXPECT_NEAR(a.estimate, 4.0 / 3.0, 1e-9);
    EXPECT_TRUE(a.passed);
    EXPECT_NEAR(lemma33_constant(kPStar), 1.0, 1e-9);
    EXPECT_NEAR(lemma33_constant(0.55), 1.0, 1e-9);
    EXPECT_NEAR(lemma33_constant(0.95), 0.45 / (0.95 * 0.05), 1e-7);
    const auto d = lemma33_check(0.3, 0.3, 0.7);
    EXPECT_EQ(d.lhs, 0.0);
    EXPECT_EQ(d.rhs, 0.0);
    const auto rep = sample_lemma33(100000, 4);
    EXPECT_EQ(rep.violations, 0u);
    EXPECT_TRUE(rep.passed);
}

TEST(LinearTermSupremum, Constant) {
    EXPECT_NEAR(lemma31_sup(0.75), 4.0, 1e-9);
    EXPECT_NEAR(lemma31_sup(0.5 + 1e-9), 2.0, 1e-6);
    EXPECT_LE(1.0, lemma31_sup(0.75));  // value at u = 0
}

TEST(QuadraticTermSupremum, Constant) {
    EXPECT_NEAR(lemma36_sup(0.75), 4.0 / 3.0, 1e-9);
    EXPECT_NEAR(lemma36_sup(kPStar), 1.09383632135605, 1e-9);
    EXPECT_LE(1.0, lemma36_sup(kPStar));  // value at w = 0
}

TEST(Suite, AllPass) {
    InequalitySuiteOptions o;
    o.samples = 20000;
    o.grid = 2000;
    const auto rep = verify_inequalities(o);
    EXPECT_TRUE(rep.passed);
    const auto j = nlohmann::json::parse(rep.json);
    EXPECT_TRUE(j["passed"].get<bool>());
    for (const auto& e : j["entries"]) {
        EXPECT_TRUE(e["passed"].get<bool>()) << e.dump();
        EXPECT_TRUE(e.contains("worst_margin")) << e.dump();
    }
}
