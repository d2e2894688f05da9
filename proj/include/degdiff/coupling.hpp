#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "degdiff/ball_sde.hpp"
#include "degdiff/coeffs.hpp"

namespace degdiff {

/// F(p) = (1-p) + (2p-1)^2/(4(1-p)), the bracket constant of the coupling estimate.
double threshold_F(double p);

struct OptimalP {
    double p = 0.0;
    double F = 0.0;
};

/// Golden-section minimisation of F on (1/2, 1) to bracket width 1e-12.
OptimalP optimal_p();

/// Smallest constant c with g = c, gamma^2 = 2 above which the estimate closes: 2 F*.
double threshold_c();

struct SingularTerms {
    double I1 = 0.0, I2 = 0.0, I3 = 0.0, I4 = 0.0, I5 = 0.0;
    double Z = 0.0;
};

/// Drift terms of d(Y^p - Yt^p)^2 and d|X - Xt|^2 for r = 1/2, coefficients
/// read through the model's coefficient argument. Throws DomainError unless
/// both radial values are positive.
SingularTerms singular_terms(const BallModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& xt, double p);

/// Explicit constants of the pointwise estimates on the shell {Y, Yt <= eps}:
///   (Y^p-Yt^p) I1 + 2p Z |x|^2 G(|x|)          <= A1 eps Z
///   I3 <= p(2p-1)^2/(1-p) gamma^2 |x|^2 Z + A3 eps Z + C3x |x-xt|^2
///   I5 <= A5 eps^{2-2p} Z + 2 n eps L_gamma^2 |x-xt|^2
/// so that 2(Y^p-Yt^p) I1 + I3 + I5 <= K Z + C_hat |x-xt|^2 with
///   K = 4p |x|^2 gamma^2 [F(p) - g/gamma^2] + (2 A1 + A3) eps + A5 eps^{2-2p}.
struct CouplingConstants {
    double p = 0.0;
    double eps = 0.0;
    double C31 = 0.0, C33 = 0.0, C36 = 0.0;
    double sup_gamma = 0.0, sup_g = 0.0, L_gamma = 0.0, L_g = 0.0;  // Lipschitz in |x|
    double L_u2G = 0.0;
    double A1 = 0.0, A3 = 0.0, A5 = 0.0, C3x = 0.0;
    double C_hat = 0.0;
    double worst_bracket = 0.0;  // max over the shell of F gamma^2 - g
    double K_worst = 0.0;        // upper bound of K over the shell

    /// K at a point with |x|^2 = norm_sq.
    double K_at(const BallModel& model, double norm_sq) const;
};

CouplingConstants coupling_constants(const BallModel& model, double p, double eps);

/// max over the shell of (F(p) gamma^2 - g), checked at shell ends and coefficient kinks
/// (exact for piecewise-affine coefficients, where the expression is convex on each piece).
double shell_worst_bracket(const BallModel& model, double p, double eps);

/// Upper bound of K over the shell with a caller-supplied constant:
///   4p [max (F gamma^2 - g) u^2] + C (eps + eps^{2-2p}).
double lemma37_K(const BallModel& model, double p, double eps, double C);

/// Largest eps <= eps_max with K_worst(eps) < 0, or 0 when none exists.
double contracting_epsilon(const BallModel& model, double p, double eps_max);

struct CoupledOptions {
    double p = 0.0;        // 0 selects the optimal exponent
    double epsilon = 0.0;  // 0 selects contracting_epsilon (or eps(p) when none)
    bool record_steps = true;
    double safety = 1.05;
    SchemeSpec scheme;
};

struct CoupledDiagnostics {
    // Per recorded step k = 0..tau-1.
    std::vector<double> W, Z, I1, I2, I3, I4, I5, prod1, prod2;
    std::vector<unsigned char> K_negative;
    // Left-point time integrals up to tau.
    double int_W = 0.0, int_Z = 0.0;
    double int_I1 = 0.0, int_I2 = 0.0, int_I3 = 0.0, int_I4 = 0.0, int_I5 = 0.0;
    double int_prod1 = 0.0, int_prod2 = 0.0;
    double int_lhs = 0.0;    // integral of 2 prod1 + I3 + I5
    double int_dist2 = 0.0;  // integral of |X - Xt|^2
    double initial_distance = 0.0;
    double final_distance = 0.0;
    double W0 = 0.0, sup_W = 0.0;
    double p = 0.0, eps = 0.0;
    std::size_t tau_index = 0;  // first step with Y or Yt above eps (steps if never)
    std::size_t steps = 0;
    std::size_t skipped = 0;  // steps with Y = 0 or Yt = 0
    bool K_contracting = false;
    double C_hat = 0.0;
    bool inequality_held = true;  // cumulative integrals at every step
    double worst_ratio = 0.0;     // max_k int_lhs / (C_hat int_dist2)
};

/// Two ball chains driven by identical increments.
CoupledDiagnostics run_coupled(const BallModel& model, const Eigen::VectorXd& x0, const Eigen::VectorXd& xt0, double T,
                               double dt, std::uint64_t seed, const CoupledOptions& options = {});

enum class Regime { Above, Threshold, Below };
std::string to_string(Regime r);
Regime classify_regime(double c);

struct SweepOptions {
    std::vector<double> c_values;
    double T = 1.0;
    double dt = 1e-5;
    std::size_t replicas = 1000;
    std::uint64_t seed = 1;
    double start_depth = 1e-3;
    double partner_depth = 2e-3;
    double angle = 1e-2;
    unsigned threads = 0;
};

struct SweepRow {
    double c = 0.0;
    std::size_t replicas = 0;
    double median_ratio = 0.0;
    double p95_ratio = 0.0;
    double ineq_held_fraction = 0.0;
    double p = 0.0;
    double eps = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    Regime regime = Regime::Above;
};

/// Exponent used for a model: the optimal one when admissible, otherwise
/// p_min + (1 - p_min)/10 with p_min = 1 - g/gamma^2 on the boundary.
double default_exponent(const BallModel& model);

/// Pair of starting points at the given depths separated by `angle` in the (1, n) plane.
std::pair<Eigen::VectorXd, Eigen::VectorXd> coupled_starts(int n, double depth, double partner_depth, double angle);

std::vector<SweepRow> threshold_sweep(const BallModel& base, const SweepOptions& options);

/// Header: c,replicas,median_ratio,p95_ratio,ineq_held_fraction,p,eps,dt,seed,regime
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace degdiff
