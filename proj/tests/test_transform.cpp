#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "degdiff/errors.hpp"
#include "degdiff/rng.hpp"
#include "degdiff/transform.hpp"

using namespace degdiff;

namespace {
BallModel model(int n, double c) {
    BallModel m;
    m.n = n;
    m.r = 0.5;
    m.gamma = CoeffFn::constant(std::sqrt(2.0));
    m.g = CoeffFn::constant(c);
    return m;
}
}  // namespace

TEST(Chart, ForwardMap) {
    Eigen::VectorXd pole(3);
    pole << 0.0, 0.0, 1.0;
    const auto s0 = forward_map(pole);
    EXPECT_EQ(s0.v, 0.0);
    EXPECT_EQ(s0.y.norm(), 0.0);

    Eigen::VectorXd x(2);
    x << 0.3, 0.4;
    const auto s = forward_map(x);
    EXPECT_NEAR(s.v, 0.75, 1e-15);
    EXPECT_NEAR(s.y(0), 0.6, 1e-15);
    x << 0.6, 0.8;
    const auto b = forward_map(x);
    EXPECT_NEAR(b.v, 0.0, 1e-15);
    EXPECT_NEAR(b.y(0), 0.6, 1e-15);
    EXPECT_THROW(forward_map(Eigen::VectorXd::Zero(2)), DomainError);
}

TEST(Chart, RoundTrip) {
    GaussianStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        Eigen::VectorXd x(4);
        for (int k = 0; k < 4; ++k) x(k) = rng();
        x(3) = std::abs(x(3)) + 0.1;
        x *= 0.9 / x.norm() * std::abs(std::sin(1.0 + i));
        if (x.norm() < 1e-3) continue;
        const Eigen::VectorXd back = inverse_map(forward_map(x));
        EXPECT_LT((back - x).norm(), 1e-12);
    }
}

TEST(AMatrix, Identity) {
    EXPECT_EQ(A_matrix(Eigen::VectorXd::Zero(3)), Eigen::MatrixXd::Identity(3, 3));
    EXPECT_EQ(A_sqrt(Eigen::VectorXd::Zero(3)), Eigen::MatrixXd::Identity(3, 3));
}

TEST(AMatrix, QuadraticFormIdentityAndBound) {
    GaussianStream rng(8);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        Eigen::VectorXd y(3), xi(3);
        for (int k = 0; k < 3; ++k) {
            y(k) = rng();
            xi(k) = rng();
        }
        y *= 0.999 * std::abs(std::cos(0.37 * i)) / y.norm();
        const double q = xi.dot(A_matrix(y) * xi);
        const double ref = xi.squaredNorm() - std::pow(xi.dot(y), 2);
        worst = std::max(worst, std::abs(q - ref) / xi.squaredNorm());
        if (y.norm() <= 0.5) EXPECT_GE(q, 0.75 * xi.squaredNorm() * (1.0 - 1e-15));
    }
    EXPECT_LT(worst, 1e-14);
}

TEST(AMatrix, SquareRootAndSpectrum) {
    GaussianStream rng(4);
    for (int i = 0; i < 200; ++i) {
        Eigen::VectorXd y(4);
        for (int k = 0; k < 4; ++k) y(k) = rng();
        y *= 0.98 * (i + 1) / 200.0 / y.norm();
        const Eigen::MatrixXd S = A_sqrt(y);
        EXPECT_LT((S * S - A_matrix(y)).norm(), 1e-14);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A_matrix(y));
        const auto ev = es.eigenvalues();
        EXPECT_NEAR(ev(0), 1.0 - y.squaredNorm(), 1e-14);
        for (int k = 1; k < 4; ++k) EXPECT_NEAR(ev(k), 1.0, 1e-14);
    }
    Eigen::VectorXd y(2);
    y << 0.6, 0.8;
    EXPECT_THROW(A_sqrt(y), SingularError);
}

TEST(Transformed, ZeroNoiseFollowsDrift) {
    const BallModel m = model(3, 1.0);
    ZeroNoise z;
    const double dt = 1e-3;
    const auto p = simulate_transformed_with(m, 0.0, Eigen::VectorXd::Zero(2), 100, dt, z);
    double v = 0.0;
    for (std::size_t k = 1; k < p.v.size(); ++k) {
        v = v + (2.0 * 1.0 * (1.0 - v) - 3.0 * v * 2.0) * dt;
        EXPECT_NEAR(p.v[k], v, 1e-15);
        EXPECT_EQ(p.y.col(static_cast<Eigen::Index>(k)).norm(), 0.0);
    }
    EXPECT_FALSE(p.truncation);
}

TEST(Transformed, FirstStepFromPole) {
    const BallModel m = model(2, 1.3);
    const double dt = 1e-4;
    GaussianStream noise(6);
    const auto p = simulate_transformed_with(m, 0.0, Eigen::VectorXd::Zero(1), 1, dt, noise);
    EXPECT_NEAR(p.v[1], 2.0 * 1.3 * dt, 1e-18);
    EXPECT_EQ(p.y(0, 1), 0.0);
}

TEST(Transformed, ChartExitPolicies) {
    const BallModel m = model(2, 1.0);
    TransformOptions stop;
    stop.chart_radius = 0.05;
    const auto a = simulate_transformed(m, 1.0, 1e-3, 12, stop);
    ASSERT_TRUE(a.truncation);
    EXPECT_EQ(a.v.size(), a.truncation_index + 1);
    TransformOptions flag = stop;
    flag.on_exit = ChartExit::Flag;
    const auto b = simulate_transformed(m, 1.0, 1e-3, 12, flag);
    EXPECT_EQ(b.v.size(), 1001u);
    EXPECT_EQ(b.truncation_index, a.truncation_index);
    for (std::size_t k = 0; k < b.v.size(); ++k) EXPECT_LT(b.y.col(static_cast<Eigen::Index>(k)).norm(), 1.0 + 1e-9);
}

TEST(Transformed, NeedsRadialCoefficients) {
    BallModel m = model(2, 1.0);
    m.g = CoeffFn::affine(1.0, 0.5);
    EXPECT_THROW(require_v_coefficients(m), ModelError);
    m.argument = CoeffArgument::Radial;
    EXPECT_NO_THROW(require_v_coefficients(m));
}

TEST(Transformed, Csv) {
    const auto p = simulate_transformed(model(3, 1.0), 1e-3, 1e-4, 1);
    std::ostringstream os;
    write_transformed_csv(os, p);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,v,y_1,y_2,truncated");
}
