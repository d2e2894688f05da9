#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace degdiff {

struct InequalityPair {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Slack for pointwise inequalities that are tight near x = y.
inline constexpr double kPointwiseSlack = 1e-12;

/// lhs = (x^{p-1/2} - y^{p-1/2})^2,
/// rhs = (2p-1)^2/(4p(1-p)) (x^p - y^p)(y^{p-1} - x^{p-1}).
InequalityPair lemmaA1_check(double x, double y, double p);

/// Supremum of a function on an open interval (0, 1).
struct SupremumReport {
    double claimed = 0.0;        // closed form, or NaN when none is known
    double estimate = 0.0;       // max of grid_estimate and the endpoint limits
    double grid_estimate = 0.0;  // max over evaluated interior points only
    double argmax = 0.0;         // 0 or 1 when an endpoint limit wins
    bool at_limit = false;
    int levels = 0;
    std::vector<double> level_estimates;  // running grid maximum per level
    double tolerance = 1e-6;
    bool passed = true;
    double violation_location = -1.0;  // first point exceeding the claim, or -1

    std::string to_json() const;
};

/// Nested geometric + uniform grids on (0, 1), refined `levels` times, with a
/// golden-section polish around interior maxima.
SupremumReport grid_supremum(const std::function<double(double)>& h, double limit_at_0, double limit_at_1,
                             int levels = 4);

/// sup_{0<z<1} z^{2-q}(1-z^{q-1})^2 / ((1-z^q)(1-z^{2-q})) against (q-1)^2/(q(2-q)).
/// The estimate comes from grid points alone; it must approach the claim from below.
SupremumReport a1_supremum(double q);
double a1_function(double q, double z);

/// f(z) = (1-z^q)(1-z^{2-q}) / (z^{2-q}(1-z^{q-1})^2) on (0, 1).
double a1_f(double q, double z);
double a1_f1(double q, double z);
double a1_f2(double q, double z);
double a1_f3(double q, double z);
double a1_f4(double q, double z);

struct MonotoneReport {
    double q = 0.0;
    std::size_t grid = 0;
    bool decreasing = true;
    double worst_increase = 0.0;  // largest f(z_{i+1}) - f(z_i) seen
    double worst_location = 0.0;
    double limit_claimed = 0.0;
    double limit_numeric = 0.0;  // f just below 1
    bool limit_ok = false;
    bool above_limit = true;  // f(z) >= limit on the whole grid
    bool passed = false;
};
MonotoneReport f_monotone_check(double q, std::size_t grid);

struct SignChainReport {
    double q = 0.0;
    std::size_t grid = 0;
    bool signs_ok = true;      // f1 <= 0, f2 <= 0, f3 >= 0, f4 <= 0
    bool endpoints_ok = true;  // f_i(1) == 0 exactly
    bool couplings_ok = true;  // derivative identities by finite differences
    double worst_sign_margin = 0.0;
    double worst_coupling_error = 0.0;  // relative
    std::string first_failure;
    bool passed = false;
};
SignChainReport f_chain_signs(double q, std::size_t grid);

/// Constant of the |x^{p-1/2}-y^{p-1/2}||x-y| bound:
/// sup_{0<w<1} (1-w^{p-1/2})(1-w) / ((1-w^p)(1-w^{1-p})).
SupremumReport lemma33_supremum(double p);
double lemma33_constant(double p);

/// lhs = |x^{p-1/2}-y^{p-1/2}||x-y|, rhs = C max(x^{1/2}y^{1-p}, y^{1/2}x^{1-p}) (x^p-y^p)(y^{p-1}-x^{p-1}).
InequalityPair lemma33_check(double x, double y, double p, double C);
InequalityPair lemma33_check(double x, double y, double p);

/// sup_{0<u<1} (1-u)/(1-u^{1-p}); the u -> 1 limit 1/(1-p).
SupremumReport lemma31_supremum(double p);
double lemma31_sup(double p);

/// sup_{0<w<1} (1-w)^2/((1-w^{2p})(1-w^{2-2p})); the w -> 1 limit 1/(4p(1-p)).
SupremumReport lemma36_supremum(double p);
double lemma36_sup(double p);

/// Random-sample check of a pointwise inequality.
struct SampleCheckReport {
    std::string name;
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst_margin = 0.0;  // min over samples of rhs - lhs
    double worst_x = 0.0, worst_y = 0.0, worst_p = 0.0;
    bool passed = false;
};

/// (x, y) uniform on (0,1]^2, p uniform on (1/2, 1).
SampleCheckReport sample_lemmaA1(std::size_t samples, std::uint64_t seed);
/// Same sampling; p is drawn from 1000 equispaced values so C(p) can be tabulated.
SampleCheckReport sample_lemma33(std::size_t samples, std::uint64_t seed);

struct InequalitySuiteOptions {
    std::size_t samples = 100000;
    std::size_t grid = 10000;
    std::uint64_t seed = 1;
};

struct InequalitySuiteReport {
    bool passed = false;
    std::string json;
};

/// Every check of this module; one JSON entry per lemma with pass/fail,
/// sample count and worst margin.
InequalitySuiteReport verify_inequalities(const InequalitySuiteOptions& options);

}  // namespace degdiff
