#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "degdiff/coeffs.hpp"
#include "degdiff/rng.hpp"

namespace degdiff {

/// The autonomous radial diffusion V = 1 - |X|^2:
///   dV = -2 V^r gamma(V) sqrt(1-V) dbeta + [2 g(V)(1-V) - n V^{2r} gamma^2(V)] dt,
/// with gamma, g read as functions of v.
struct RadialModel {
    int n = 2;
    double r = 0.5;
    CoeffFn gamma = CoeffFn::constant(1.4142135623730951);
    CoeffFn g = CoeffFn::constant(1.0);

    void validate() const;
    double drift(double v) const;
    double diffusion_sq(double v) const;

    /// Radial companion of a ball model. Requires coefficients read at
    /// 1-|x|^2, or constant coefficients (where the two readings agree).
    static RadialModel from_ball(const BallModel& model);
    BallModel to_ball() const;
};

/// s'(v) = exp(-int_0^v 2b/sigma^2), for r < 1/2.
/// Throws ClassificationOnlyError for r >= 1/2, DomainError for v outside [0,1).
double scale_prime(const RadialModel& model, double v);

struct ScaleDensity {
    double value = 0.0;
    double log_value = 0.0;
    double abs_error_log = 0.0;  // quadrature error estimate of log s'
};
ScaleDensity scale_density(const RadialModel& model, double v);

enum class BoundaryVerdict { Regular, Exit, Entrance, Natural, Inconclusive };
std::string to_string(BoundaryVerdict v);

/// One Feller test integral at v = 0, truncated at a geometric sequence of
/// depths and extrapolated geometrically once decade contributions settle.
struct FellerIntegral {
    bool decided = false;
    bool divergent = false;
    double value = 0.0;           // +inf when divergent
    double quadrature_error = 0.0;  // |level(k) - level(k-1)|
    double tail_error = 0.0;
    double truncation_depth = 0.0;  // smallest v reached
};

/// Feller classification of the endpoint V = 0.
///   attainability  = int_0^m s'(eta) M(eta, m] d eta   (finite <=> 0 attainable)
///   entrance       = int_0^m m(xi) S(xi, m] d xi
/// with m(v) = 2 / (sigma^2(v) s'(v)) the speed density and m the reference point.
struct BoundaryClassification {
    BoundaryVerdict verdict = BoundaryVerdict::Inconclusive;
    FellerIntegral attainability;
    FellerIntegral entrance;
    double reference_point = 0.5;
    int refinement_levels = 0;

    bool attainable() const noexcept {
        return verdict == BoundaryVerdict::Regular || verdict == BoundaryVerdict::Exit;
    }
    std::string to_json() const;
};

struct FellerOptions {
    double reference_point = 0.5;
    double tolerance = 1e-8;      // relative quadrature tolerance for finite integrals
    double divergence_cap = 1e12;  // partial integral above this => divergent
    int max_levels = 4;
    std::size_t max_panels = 400000;
};

BoundaryClassification classify_boundary(const RadialModel& model, const FellerOptions& options = {});

/// Euler step of V clamped to [0, 1).
double radial_step(const RadialModel& model, double v, double dt, double dW);

template <NormalSource Noise>
std::vector<double> simulate_radial_with(const RadialModel& model, double v0, std::size_t steps, double dt,
                                         Noise& noise) {
    std::vector<double> out(steps + 1);
    out[0] = v0;
    const double sdt = std::sqrt(dt);
    for (std::size_t k = 1; k <= steps; ++k) out[k] = radial_step(model, out[k - 1], dt, sdt * noise());
    return out;
}

std::vector<double> simulate_radial(const RadialModel& model, double v0, double T, double dt, std::uint64_t seed);

/// Largest eps <= 1/2 with p > 1 - g(v)/gamma^2(v) on [0, eps).
double epsilon_for_p(const RadialModel& model, double p);

/// 2p(1-v) v^{p-1} [g + (p-1) gamma^2] - n p gamma^2 v^p, coefficients at v.
double yp_drift_formula(const RadialModel& model, double p, double v);

struct DriftReport {
    double empirical = 0.0;
    double formula = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double epsilon = 0.0;
    std::size_t replicas = 0;
};

/// Monte Carlo estimate of E[Y^p_dt - v^p | Y_0 = v] / dt from one step of the
/// ball scheme started at |x|^2 = 1 - v, compared with the closed-form drift.
DriftReport verify_drift_of_Yp(const RadialModel& model, double p, double v, double dt, std::size_t replicas,
                               std::uint64_t seed);

}  // namespace degdiff
