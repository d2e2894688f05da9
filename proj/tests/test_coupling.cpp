#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "degdiff/coupling.hpp"
#include "degdiff/errors.hpp"
#include "degdiff/rng.hpp"

using namespace degdiff;

namespace {
BallModel model(double c) {
    BallModel m;
    m.n = 2;
    m.r = 0.5;
    m.gamma = CoeffFn::constant(std::sqrt(2.0));
    m.g = CoeffFn::constant(c);
    return m;
}
const double kPStar = 1.0 - std::sqrt(2.0) / 4.0;
}  // namespace

TEST(Threshold, Constants) {
    const auto op = optimal_p();
    EXPECT_NEAR(op.p, kPStar, 1e-9);
    EXPECT_NEAR(op.F, std::sqrt(2.0) - 1.0, 1e-9);
    EXPECT_NEAR(threshold_c(), 2.0 * (std::sqrt(2.0) - 1.0), 1e-9);
    EXPECT_DOUBLE_EQ(threshold_F(0.75), 0.5);
    EXPECT_GT(threshold_F(0.75), op.F);
}

TEST(SingularTerms, IdenticalStatesVanish) {
    Eigen::VectorXd x(2);
    x << 0.3, 0.9;
    const auto s = singular_terms(model(1.0), x, x, 0.75);
    EXPECT_EQ(s.I1, 0.0);
    EXPECT_EQ(s.I2, 0.0);
    EXPECT_EQ(s.I3, 0.0);
    EXPECT_EQ(s.I4, 0.0);
    EXPECT_EQ(s.I5, 0.0);
    EXPECT_EQ(s.Z, 0.0);
}

// Values from a 40-digit evaluation through the Ito generator of (Y^p, X),
// which does not use the I1..I5 formulas.
TEST(SingularTerms, MatchesGeneratorOracle) {
    Eigen::VectorXd x(2), xt(2);
    x << 0.9, 0.0;
    xt << 0.8, 0.0;
    const auto s = singular_terms(model(1.0), x, xt, 0.75);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    EXPECT_LT(rel(s.I1, 0.30047107890348267), 1e-12);
    EXPECT_LT(rel(s.I2, 0.53092487517112844), 1e-12);
    EXPECT_LT(rel(s.I3, 0.0029214709914974010), 1e-12);
    EXPECT_LT(rel(s.I4, -0.02), 1e-12);
    EXPECT_LT(rel(s.I5, 0.10772850710047669), 1e-12);
    EXPECT_LT(rel(s.Z, 0.039581006351331664), 1e-12);
}

TEST(SingularTerms, SquaresAreNonNegative) {
    GaussianStream rng(17);
    const BallModel m = model(1.2);
    for (int i = 0; i < 10000; ++i) {
        Eigen::VectorXd x(2), xt(2);
        x << rng(), rng();
        xt << rng(), rng();
        x *= 0.999 / std::max(1.0, x.norm());
        xt *= 0.999 / std::max(1.0, xt.norm());
        const auto s = singular_terms(m, x, xt, 0.7);
        EXPECT_GE(s.I3, 0.0);
        EXPECT_GE(s.I5, 0.0);
    }
}

TEST(ShellRateK, SignAtZeroConstant) {
    for (double eps : {0.01, 0.1, 0.3, 0.49}) {
        EXPECT_LT(lemma37_K(model(1.5), kPStar, eps, 0.0), 0.0) << eps;
        EXPECT_GT(lemma37_K(model(0.5), kPStar, eps, 0.0), 0.0) << eps;
    }
    // With C = 0 and a constant bracket, K = 4p(1-eps) * 2 * (F* - 0.75).
    EXPECT_NEAR(lemma37_K(model(1.5), kPStar, 0.2, 0.0),
                4.0 * kPStar * 0.8 * 2.0 * (threshold_F(kPStar) - 0.75), 1e-12);
}

TEST(ShellRateK, SmallShellIsNegative) {
    const double k1 = lemma37_K(model(1.5), kPStar, 1e-3, 10.0);
    const double k2 = lemma37_K(model(1.5), kPStar, 1e-6, 10.0);
    EXPECT_LT(k1, 0.0);
    EXPECT_LT(k2, 0.0);
    EXPECT_NEAR(k2, 4.0 * kPStar * 2.0 * (threshold_F(kPStar) - 0.75), 1e-3);
}

TEST(ContractingEpsilon, Regimes) {
    const double e15 = contracting_epsilon(model(1.5), kPStar, 0.5);
    EXPECT_GT(e15, 0.0);
    const auto k = coupling_constants(model(1.5), kPStar, e15);
    EXPECT_LT(k.K_worst, 0.0);
    EXPECT_GE(coupling_constants(model(1.5), kPStar, std::min(0.5, e15 * 1.2)).K_worst, k.K_worst);
    EXPECT_EQ(contracting_epsilon(model(0.5), default_exponent(model(0.5)), 0.5), 0.0);
}

TEST(Regime, Labels) {
    EXPECT_EQ(classify_regime(threshold_c()), Regime::Threshold);
    EXPECT_EQ(classify_regime(1.5), Regime::Above);
    EXPECT_EQ(classify_regime(0.3), Regime::Below);
    EXPECT_EQ(to_string(Regime::Threshold), "threshold");
}

TEST(Coupled, IdenticalStartsStayTogether) {
    Eigen::VectorXd x(2);
    x << 0.0, std::sqrt(1.0 - 1e-3);
    const auto d = run_coupled(model(1.5), x, x, 0.05, 1e-5, 99);
    for (double w : d.W) EXPECT_EQ(w, 0.0);
    EXPECT_EQ(d.sup_W, 0.0);
    EXPECT_EQ(d.final_distance, 0.0);
}

TEST(Coupled, InequalityAndStabilityAboveThreshold) {
    const auto [x0, xt0] = coupled_starts(2, 1e-3, 2e-3, 1e-2);
    CoupledOptions o;
    o.record_steps = false;
    std::size_t held = 0;
    double sum_ratio = 0.0;
    const std::size_t paths = 1000;
    for (std::size_t i = 0; i < paths; ++i) {
        const auto d = run_coupled(model(1.5), x0, xt0, 1.0, 1e-5, derive_seed(5, {i}), o);
        EXPECT_TRUE(d.K_contracting);
        held += d.inequality_held ? 1 : 0;
        sum_ratio += d.sup_W / d.W0;
    }
    EXPECT_GE(static_cast<double>(held), 0.99 * paths);
    EXPECT_LE(sum_ratio / paths, 10.0);
}

TEST(Coupled, RejectsOtherExponents) {
    BallModel m = model(1.0);
    m.r = 0.75;
    Eigen::VectorXd x(2);
    x << 0.0, 1.0;
    EXPECT_THROW(run_coupled(m, x, x, 0.1, 1e-3, 1), ModelError);
}

TEST(Sweep, OneRowPerC) {
    SweepOptions o;
    o.c_values = {0.3, threshold_c(), 1.5};
    o.replicas = 8;
    o.T = 0.05;
    o.dt = 1e-4;
    const auto rows = threshold_sweep(model(1.0), o);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1].regime, Regime::Threshold);
    std::ostringstream os;
    write_sweep_csv(os, rows);
    std::string line;
    std::istringstream is(os.str());
    std::getline(is, line);
    EXPECT_EQ(line, "c,replicas,median_ratio,p95_ratio,ineq_held_fraction,p,eps,dt,seed,regime");
    int n = 0;
    while (std::getline(is, line)) ++n;
    EXPECT_EQ(n, 3);
}

TEST(DefaultExponent, FallsBackBelowThreshold) {
    EXPECT_NEAR(default_exponent(model(1.5)), kPStar, 1e-12);
    EXPECT_NEAR(default_exponent(model(0.3)), 0.85 + 0.015, 1e-12);
    EXPECT_NEAR(default_exponent(model(0.5)), 0.775, 1e-12);
}
