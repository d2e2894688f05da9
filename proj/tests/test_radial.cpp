#include <cmath>

#include <gtest/gtest.h>
#include <json.hpp>

#include "degdiff/errors.hpp"
#include "degdiff/radial.hpp"
#include "degdiff/rng.hpp"

using namespace degdiff;

namespace {
RadialModel model(double r, double c) {
    RadialModel m;
    m.n = 2;
    m.r = r;
    m.gamma = CoeffFn::constant(std::sqrt(2.0));
    m.g = CoeffFn::constant(c);
    return m;
}
}  // namespace

// r = 1/4, n = 2, gamma^2 = 2, g = 1: s'(v) = exp(-sqrt v)/(1 - v).
// Values from a 40-digit evaluation of the closed form.
TEST(ScalePrime, ClosedFormQuarter) {
    const RadialModel m = model(0.25, 1.0);
    const std::pair<double, double> cases[] = {
        {0.25, 0.80870754628351123}, {0.5, 0.98613738279047958}, {0.01, 0.91397718993531270}, {0.9, 3.8725058150845298}};
    for (const auto& [v, expected] : cases) EXPECT_NEAR(scale_prime(m, v) / expected, 1.0, 1e-10) << v;
    EXPECT_NEAR(scale_prime(m, 0.5), std::exp(-std::sqrt(0.5)) / 0.5, 1e-8 * std::exp(-std::sqrt(0.5)) / 0.5);
}

TEST(ScalePrime, TendsToOneAtZero) {
    const RadialModel m = model(0.25, 1.0);
    EXPECT_EQ(scale_prime(m, 0.0), 1.0);
    EXPECT_NEAR(scale_prime(m, 1e-10), 1.0, 1e-4);
    const RadialModel aff{3, 0.3, CoeffFn::affine(1.0, 0.5), CoeffFn::table({{0.0, 2.0}, {0.4, 1.0}, {1.0, 1.5}})};
    EXPECT_NEAR(scale_prime(aff, 1e-12), 1.0, 1e-3);
}

TEST(ScalePrime, Errors) {
    EXPECT_THROW(scale_prime(model(0.5, 1.0), 0.2), ClassificationOnlyError);
    EXPECT_THROW(scale_prime(model(0.25, 1.0), 1.0), DomainError);
    EXPECT_THROW(scale_prime(model(0.25, 1.0), -0.1), DomainError);
}

TEST(Classify, QuarterIsRegular) {
    const auto c = classify_boundary(model(0.25, 1.0));
    EXPECT_EQ(c.verdict, BoundaryVerdict::Regular);
    EXPECT_TRUE(c.attainable());
}

// r = 1/2, n = 2, gamma^2 = 2, reference point 1/2:
//   attainability = (1/(2c)) int_0^{1/2} [(2 eta)^{-c/2} - 1]/(1 - eta) d eta,  entrance = ln 2/(2c).
TEST(Classify, HalfMatchesClosedForms) {
    const std::pair<double, double> cases[] = {
        {1.0, 0.276651649860258}, {1.5, 0.531395774086676}, {1.9, 2.536713443245147}};
    for (const auto& [c, A] : cases) {
        const auto cls = classify_boundary(model(0.5, c));
        EXPECT_EQ(cls.verdict, BoundaryVerdict::Regular) << c;
        ASSERT_FALSE(cls.attainability.divergent);
        EXPECT_NEAR(cls.attainability.value / A, 1.0, 1e-8) << c;
        EXPECT_NEAR(cls.entrance.value / (std::log(2.0) / (2.0 * c)), 1.0, 1e-8) << c;
    }
}

TEST(Classify, HalfAboveTwoIsEntrance) {
    for (double c : {2.1, 3.0}) {
        const auto cls = classify_boundary(model(0.5, c));
        EXPECT_EQ(cls.verdict, BoundaryVerdict::Entrance) << c;
        EXPECT_TRUE(cls.attainability.divergent);
        EXPECT_NEAR(cls.entrance.value / (std::log(2.0) / (2.0 * c)), 1.0, 1e-8) << c;
    }
}

TEST(Classify, ThreeQuartersIsUnattainable) {
    const auto cls = classify_boundary(model(0.75, 1.0));
    EXPECT_EQ(cls.verdict, BoundaryVerdict::Entrance);
    EXPECT_FALSE(cls.attainable());
    const auto j = nlohmann::json::parse(cls.to_json());
    EXPECT_EQ(j["verdict"], "entrance");
}

TEST(RadialStep, DriftAtZero) {
    const RadialModel m = model(0.5, 1.3);
    EXPECT_DOUBLE_EQ(m.drift(0.0), 2.6);
    EXPECT_DOUBLE_EQ(radial_step(m, 0.0, 1e-3, 0.7), 2.6e-3);  // noise factor vanishes at v = 0
}

TEST(RadialStep, ZeroNoiseIsEuler) {
    const RadialModel m = model(0.5, 1.0);
    ZeroNoise z;
    const auto path = simulate_radial_with(m, 0.3, 50, 1e-3, z);
    double v = 0.3;
    for (std::size_t k = 1; k <= 50; ++k) {
        v = v + m.drift(v) * 1e-3;
        EXPECT_DOUBLE_EQ(path[k], v);
    }
}

TEST(RadialStep, FirstStepMean) {
    const RadialModel m = model(0.5, 1.0);
    GaussianStream noise(9);
    const double dt = 1e-4;
    double sum = 0.0;
    for (int i = 0; i < 1000; ++i) sum += radial_step(m, 0.0, dt, std::sqrt(dt) * noise());
    EXPECT_NEAR(sum / 1000.0, 2.0 * dt, 1e-17);
}

TEST(DriftOfYp, Preconditions) {
    const RadialModel m = model(0.5, 1.5);
    EXPECT_THROW(verify_drift_of_Yp(m, 1.0, 0.01, 1e-6, 100, 1), InfeasibleError);
    EXPECT_THROW(verify_drift_of_Yp(m, 0.7, 0.6, 1e-6, 100, 1), InfeasibleError);
    EXPECT_THROW(verify_drift_of_Yp(model(0.25, 1.5), 0.7, 0.01, 1e-6, 100, 1), InfeasibleError);
}

TEST(DriftOfYp, MatchesFormula) {
    const RadialModel m = model(0.5, 1.5);
    const double p = 1.0 - std::sqrt(2.0) / 4.0;
    const auto rep = verify_drift_of_Yp(m, p, 0.01, 1e-6, 200000, 5);
    EXPECT_EQ(rep.replicas, 200000u);
    EXPECT_DOUBLE_EQ(rep.formula, yp_drift_formula(m, p, 0.01));
    EXPECT_LT(std::abs(rep.z), 4.0) << rep.empirical << " vs " << rep.formula;
}

TEST(EpsilonForP, Radial) {
    EXPECT_DOUBLE_EQ(epsilon_for_p(model(0.5, 1.5), 0.3), 0.5);
    EXPECT_THROW(epsilon_for_p(model(0.5, 0.6), 0.7), InfeasibleError);
}
