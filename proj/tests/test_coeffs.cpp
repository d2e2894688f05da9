#include <cmath>

#include <gtest/gtest.h>

#include "degdiff/coeffs.hpp"
#include "degdiff/errors.hpp"

using namespace degdiff;

TEST(CoeffFn, Evaluation) {
    EXPECT_DOUBLE_EQ(CoeffFn::constant(std::sqrt(2.0))(0.3), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(CoeffFn::affine(1.0, 1.0)(0.5), 1.5);
    EXPECT_DOUBLE_EQ(CoeffFn::table({{0.0, 1.0}, {1.0, 2.0}})(0.25), 1.25);
    EXPECT_THROW(CoeffFn::constant(1.0)(1.5), DomainError);
}

TEST(CoeffFn, LipschitzAndRange) {
    EXPECT_EQ(CoeffFn::constant(std::sqrt(2.0)).lipschitz(), 0.0);
    EXPECT_DOUBLE_EQ(CoeffFn::affine(1.0, 1.0).lipschitz(), 1.0);
    const auto t = CoeffFn::table({{0.0, 1.0}, {0.5, 1.0}, {1.0, 3.0}});
    EXPECT_DOUBLE_EQ(t.lipschitz(), 4.0);
    EXPECT_DOUBLE_EQ(t.min_value(), 1.0);
    EXPECT_DOUBLE_EQ(t.max_value(), 3.0);
    ASSERT_EQ(t.kinks().size(), 1u);
    EXPECT_DOUBLE_EQ(t.kinks()[0], 0.5);
}

TEST(CoeffFn, RejectsNonPositive) {
    EXPECT_THROW(CoeffFn::constant(0.0), ModelError);
    EXPECT_THROW(CoeffFn::affine(1.0, -1.0), ModelError);
    EXPECT_THROW(CoeffFn::table({{0.0, 1.0}, {0.5, -0.1}, {1.0, 1.0}}), ModelError);
    EXPECT_THROW(CoeffFn::table({{0.1, 1.0}, {1.0, 1.0}}), ModelError);
}

TEST(CoeffFn, TextRoundTrip) {
    for (const char* s : {"constant 1.5", "affine 1 0.5", "table 0:1 0.5:1 1:3"}) {
        const auto f = CoeffFn::parse(s);
        const auto g = CoeffFn::parse(f.to_string());
        for (double u : {0.0, 0.2, 0.5, 0.77, 1.0}) EXPECT_EQ(f(u), g(u)) << s;
    }
    EXPECT_THROW(CoeffFn::parse("cubic 1 2"), ModelError);
    EXPECT_THROW(CoeffFn::parse("constant x"), ModelError);
    EXPECT_THROW(CoeffFn::parse("table 0:1 1"), ModelError);
}

TEST(EpsilonForP, CappedAtHalf) {
    BallModel m;
    m.gamma = CoeffFn::constant(std::sqrt(2.0));
    m.g = CoeffFn::constant(1.5);
    EXPECT_DOUBLE_EQ(epsilon_for_p(m, 1.0 - std::sqrt(2.0) / 4.0), 0.5);

    BallModel a;
    a.gamma = CoeffFn::constant(1.0);
    a.g = CoeffFn::affine(0.5, 0.5);
    EXPECT_DOUBLE_EQ(epsilon_for_p(a, 0.9), 0.5);
}

TEST(EpsilonForP, BoundaryEqualityIsInfeasible) {
    BallModel m;
    m.gamma = CoeffFn::constant(std::sqrt(2.0));
    m.g = CoeffFn::constant(0.6);
    EXPECT_THROW(epsilon_for_p(m, 1.0 - 0.6 / 2.0), InfeasibleError);
}

TEST(EpsilonForP, ShellStopsWhereConditionFails) {
    // gamma = 1, g(|x|) = 0.2 + 0.6|x|: 1 - g = 0.8 - 0.6|x| < p = 0.35 iff |x| > 0.75.
    BallModel m;
    m.gamma = CoeffFn::constant(1.0);
    m.g = CoeffFn::affine(0.2, 0.6);
    const double eps = epsilon_for_p(m, 0.35);
    // With the radius argument the shell depth is measured in 1 - |x|.
    EXPECT_NEAR(eps, 0.25, 2e-4);
    EXPECT_LE(eps, 0.25 + 1e-12);
}

TEST(BallModel, Validation) {
    BallModel m;
    m.n = 1;
    EXPECT_THROW(m.validate(), ModelError);
    m.n = 2;
    m.r = 0.0;
    EXPECT_THROW(m.validate(), ModelError);
    m.r = 0.5;
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(parse_coeff_argument("radial"), CoeffArgument::Radial);
    EXPECT_THROW(parse_coeff_argument("angle"), ModelError);
}
