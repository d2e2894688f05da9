#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "degdiff/coeffs.hpp"
#include "degdiff/rng.hpp"

namespace degdiff {

using Point = Eigen::VectorXd;

/// Scalar field with an optional analytic gradient; without one the gradient
/// is a central difference with step 1e-5.
struct ScalarField {
    std::function<double(const Point&)> value;
    std::function<Point(const Point&)> gradient;
    std::string description;

    double operator()(const Point& x) const { return value(x); }
    Point grad(const Point& x) const;

    /// Field from an expression over x1..xn.
    static ScalarField parse(const std::string& text, int n);
};

/// Domain D = {phi > 0} with the diffusion dX = h(X)^{1/2} sigma(X) dB + b(X) dt.
struct DomainSpec {
    std::string name;
    int n = 2;
    ScalarField phi;
    ScalarField h;
    std::function<Eigen::MatrixXd(const Point&)> sigma;
    std::function<Point(const Point&)> b;
    Point center;          // interior point; boundary samples are found along rays from it
    double h_neighborhood = 0.0;  // samples with 0 < h < h_neighborhood form the boundary neighbourhood

    Eigen::MatrixXd a(const Point& x) const;
};

/// Unit ball: phi = h = 1 - |x|^2, sigma = gamma(|x|) I, b = -g(|x|) x.
DomainSpec sphere_domain(int n, const CoeffFn& gamma, const CoeffFn& g);

enum class EllipsoidDrift { Gradient, Inward };

/// phi = h = 1 - sum x_i^2 / a_i^2, sigma = I; b = grad h or b = -x.
DomainSpec ellipsoid_domain(const std::vector<double>& semi_axes, EllipsoidDrift drift);

/// Fields from expressions; sigma = s(x) I.
DomainSpec expression_domain(int n, const std::string& phi, const std::string& h, const std::string& sigma_scale,
                             const std::vector<std::string>& drift, const Point& center);

/// Points with phi = 0 found by bisection along random rays from the centre.
std::vector<Point> boundary_samples(const DomainSpec& spec, std::size_t count, std::uint64_t seed);

/// Points with h uniform on (0, h_neighborhood), one per random ray.
std::vector<Point> neighborhood_samples(const DomainSpec& spec, std::size_t count, std::uint64_t seed);

struct DomainValidation {
    bool ok = true;
    std::string failure;
};

/// h > 0 at the interior samples, |h| < 1e-10 and |grad h| > 0 at boundary
/// samples, <a xi, xi> > 0 for random xi at every sample.
DomainValidation validate_domain(const DomainSpec& spec, const std::vector<Point>& boundary,
                                 const std::vector<Point>& interior, std::uint64_t seed);

struct DriftDecomposition {
    double g = 0.0;
    Point beta;
};

/// g = <b, grad h>/|grad h|, beta = b - g grad h/|grad h|.
/// Throws HypothesisViolation when |grad h| = 0 or g <= 0.
DriftDecomposition decompose_drift(const DomainSpec& spec, const Point& x);

struct AlphaReport {
    std::vector<double> values;
    double min = 0.0, max = 0.0, mean = 0.0;
    double spread = 0.0;           // max - min
    double relative_spread = 0.0;  // spread / |mean|
    bool constant = false;         // relative spread < 1e-6
    bool above_threshold = false;  // constant and alpha > sqrt(2) - 1
};

/// alpha = 2 g |grad h| / <a grad h, grad h> at each boundary sample.
AlphaReport alpha(const DomainSpec& spec, const std::vector<Point>& boundary);

/// <grad h, grad h>, g |grad h| = <b, grad h>, and <a grad h, grad h>.
std::function<double(const Point&)> grad_h_squared(const DomainSpec& spec);
std::function<double(const Point&)> g_times_grad_h(const DomainSpec& spec);
std::function<double(const Point&)> a_grad_h(const DomainSpec& spec);

struct FunctionOfHReport {
    bool is_function = false;
    double lipschitz_estimate = 0.0;
    double worst_spread = 0.0;  // largest within-bin spread of f
    double worst_h = 0.0;       // centre of that bin
    double bin_width = 0.0;
    std::size_t bins_used = 0;
};

/// Bin test: samples are binned by h (width 1e-3 of the h range); f is a
/// function of h when no bin spread exceeds 1e-6 + L_est * width, where L_est
/// is the largest slope between adjacent bin means.
FunctionOfHReport is_function_of_h(const DomainSpec& spec, const std::function<double(const Point&)>& f,
                                   const std::vector<Point>& samples);

struct DomainTrajectory {
    double dt = 0.0;
    Eigen::MatrixXd states;  // n x (N+1)
    std::vector<double> h;
    std::size_t backtracks = 0;
};

/// One Euler step x + sqrt(max(h,0)) sigma dB + b dt, backtracked along the
/// step by 40 bisections when it leaves {phi >= 0}. Returns the number of
/// backtracks (0 or 1). Throws StepRejection when no fraction of the step is admissible.
int domain_step(const DomainSpec& spec, Point& x, double dt, const Eigen::VectorXd& dB);

template <NormalSource Noise>
DomainTrajectory simulate_domain_with(const DomainSpec& spec, const Point& x0, std::size_t steps, double dt,
                                      Noise& noise);

DomainTrajectory simulate_domain(const DomainSpec& spec, const Point& x0, double T, double dt, std::uint64_t seed);

/// Final state only (for distributional comparisons).
Point simulate_domain_final(const DomainSpec& spec, const Point& x0, double T, double dt, std::uint64_t seed);

struct DomainCoupling {
    std::vector<double> W;  // (h(X)^p - h(Xt)^p)^2 + |X - Xt|^2 while both h <= eps
    double sup_W = 0.0;
    double initial_distance = 0.0;
    double final_distance = 0.0;
    std::size_t tau_index = 0;
};

/// Coupled chains with identical increments, Y = h(X) in place of 1 - |X|^2.
DomainCoupling couple_domain(const DomainSpec& spec, const Point& x0, const Point& xt0, double T, double dt,
                             std::uint64_t seed, double p, double eps);

template <NormalSource Noise>
DomainTrajectory simulate_domain_with(const DomainSpec& spec, const Point& x0, std::size_t steps, double dt,
                                      Noise& noise) {
    DomainTrajectory out;
    out.dt = dt;
    out.states.resize(spec.n, static_cast<Eigen::Index>(steps + 1));
    out.h.resize(steps + 1);
    Point x = x0;
    Eigen::VectorXd dB(spec.n);
    const double sdt = std::sqrt(dt);
    out.states.col(0) = x;
    out.h[0] = spec.h(x);
    for (std::size_t k = 1; k <= steps; ++k) {
        for (int i = 0; i < spec.n; ++i) dB(i) = sdt * noise();
        out.backtracks += static_cast<std::size_t>(domain_step(spec, x, dt, dB));
        out.states.col(static_cast<Eigen::Index>(k)) = x;
        out.h[k] = spec.h(x);
    }
    return out;
}

}  // namespace degdiff
