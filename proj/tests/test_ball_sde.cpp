#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "degdiff/ball_sde.hpp"
#include "degdiff/errors.hpp"
#include "degdiff/radial.hpp"
#include "degdiff/rng.hpp"
#include "degdiff/stats.hpp"

using namespace degdiff;

namespace {
BallModel model(double c, double r = 0.5) {
    BallModel m;
    m.n = 2;
    m.r = r;
    m.gamma = CoeffFn::constant(std::sqrt(2.0));
    m.g = CoeffFn::constant(c);
    return m;
}
}  // namespace

TEST(BallStep, OriginIsPureNoise) {
    const BallModel m = model(1.0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2), dB(2);
    dB << 0.01, -0.02;
    const Eigen::VectorXd out = step(m, x, 1e-4, dB);
    EXPECT_DOUBLE_EQ(out(0), std::sqrt(2.0) * 0.01);
    EXPECT_DOUBLE_EQ(out(1), std::sqrt(2.0) * -0.02);
}

TEST(BallStep, BoundaryIsPureDrift) {
    const BallModel m = model(1.5);
    Eigen::VectorXd x(2), dB(2);
    x << 0.6, 0.8;
    dB << 0.3, 0.3;
    const double dt = 1e-3;
    const Eigen::VectorXd out = step(m, x, dt, dB);
    EXPECT_NEAR(out(0), 0.6 * (1.0 - 1.5 * dt), 1e-15);
    EXPECT_NEAR(out(1), 0.8 * (1.0 - 1.5 * dt), 1e-15);
}

TEST(BallStep, ProjectionLandsOnSphere) {
    Eigen::VectorXd x(2);
    x << 1.01, 0.0;
    project_to_ball(x);
    EXPECT_EQ(x.norm(), 1.0);
    Eigen::VectorXd y(3);
    y << 0.3, -0.9, 0.6;
    project_to_ball(y);
    EXPECT_LE(y.squaredNorm(), 1.0);
}

TEST(BallStep, FirstStepFromBoundary) {
    const double c = 1.0, dt = 1e-4;
    const BallModel m = model(c);
    Eigen::VectorXd x(2), dB = Eigen::VectorXd::Zero(2);
    x << 0.0, 1.0;
    const double Y = radial_value(step(m, x, dt, dB));
    EXPECT_NEAR(Y, 1.0 - (1.0 - c * dt) * (1.0 - c * dt), 1e-16);
    EXPECT_NEAR(Y / dt, 2.0 * c, 1e-3);
}

TEST(BallStep, RejectsBadInput) {
    const BallModel m = model(1.0);
    Eigen::VectorXd x(2), dB(2);
    x << 2.0, 0.0;
    dB << 0.0, 0.0;
    EXPECT_THROW(step(m, x, 1e-3, dB), DomainError);
    x << std::nan(""), 0.0;
    EXPECT_THROW(step(m, x, 1e-3, dB), NumericError);
}

TEST(Simulate, Deterministic) {
    const BallModel m = model(1.0);
    Eigen::VectorXd x0(2);
    x0 << 0.0, 1.0;
    const Trajectory a = simulate(m, x0, 0.05, 1e-4, 42);
    const Trajectory b = simulate(m, x0, 0.05, 1e-4, 42);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.radial, b.radial);
    const Trajectory c = simulate(m, x0, 0.05, 1e-4, 43);
    EXPECT_NE(a.states, c.states);
    EXPECT_EQ(a.steps(), 500u);
    for (double y : a.radial) EXPECT_GE(y, 0.0);
}

TEST(Simulate, SubstepIncrementsSumToCoarse) {
    const BallModel m = model(1.0);
    Eigen::VectorXd x0(2);
    x0 << 0.0, 1.0;
    SchemeSpec s;
    s.kind = SchemeKind::EulerSubstep;
    const Trajectory t = simulate(m, x0, 0.01, 1e-4, 7, s);
    EXPECT_EQ(t.increments.cols(), 100);
    for (double y : t.radial) EXPECT_GE(y, 0.0);
}

TEST(Occupation, Trivial) {
    const BallModel m = model(1.0);
    Eigen::VectorXd x0(2);
    x0 << 0.0, 1.0;
    const Trajectory t = simulate(m, x0, 0.01, 1e-4, 3);
    EXPECT_EQ(occupation_near_boundary(t, 1.0), 1.0);

    // gamma tiny, start at the origin: Y stays essentially 1.
    BallModel tiny = m;
    tiny.gamma = CoeffFn::constant(1e-12);
    const Trajectory o = simulate(tiny, Eigen::VectorXd::Zero(2), 0.01, 1e-4, 3);
    EXPECT_EQ(occupation_near_boundary(o, 0.5), 0.0);
}

TEST(Simulate, CsvHasMetadataAndColumns) {
    const BallModel m = model(1.0);
    Eigen::VectorXd x0(2);
    x0 << 0.0, 1.0;
    const Trajectory t = simulate(m, x0, 1e-3, 1e-4, 5);
    std::ostringstream os;
    write_trajectory_csv(os, t, m);
    const std::string s = os.str();
    EXPECT_EQ(s.front(), '#');
    EXPECT_NE(s.find("t,x_1,x_2,Y\n"), std::string::npos);
}

// Ball Y_T against the independently coded radial simulator.
TEST(Simulate, MeanMatchesRadialSimulator) {
    const BallModel m = model(1.0);
    const RadialModel rm = RadialModel::from_ball(m);
    const std::size_t paths = 10000;
    const double T = 1.0, dt = 1e-4;
    const std::size_t steps = step_count(T, dt);
    RunningStats ball, rad;
    for (std::size_t i = 0; i < paths; ++i) {
        GaussianStream nb(derive_seed(11, {1, i}));
        Eigen::VectorXd x(2);
        x << 0.0, 1.0;
        advance_path(m, x, steps, dt, SchemeSpec{}, nb, [](std::size_t, const auto&, const auto&) {});
        ball.add(radial_value(x));
        GaussianStream nr(derive_seed(11, {2, i}));
        double v = 0.0;
        for (std::size_t k = 0; k < steps; ++k) v = radial_step(rm, v, dt, std::sqrt(dt) * nr());
        rad.add(v);
    }
    const double se = std::sqrt(ball.std_error() * ball.std_error() + rad.std_error() * rad.std_error());
    EXPECT_LT(std::abs(ball.mean() - rad.mean()), 3.0 * se) << ball.mean() << " vs " << rad.mean();
}
