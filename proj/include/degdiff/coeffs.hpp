#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace degdiff {

enum class CoeffKind { Constant, Affine, Table };

/// Strictly positive Lipschitz function on [0, 1].
///
/// Three representations are supported: a constant, an affine function
/// `intercept + slope * u`, and a piecewise-linear table with breakpoints
/// covering 0 and 1. Each has an exact Lipschitz constant and an exact
/// minimum, so positivity is checked once at construction.
///
/// Text form (used in config files): `constant 1.5`, `affine 1 0.5`,
/// `table 0:1 0.5:1 1:3`.
class CoeffFn {
public:
    static CoeffFn constant(double value);
    static CoeffFn affine(double intercept, double slope);
    static CoeffFn table(std::vector<std::pair<double, double>> points);
    static CoeffFn parse(std::string_view text);

    CoeffKind kind() const noexcept { return kind_; }
    bool is_constant() const noexcept;

    /// Throws DomainError when u is outside [0, 1].
    double operator()(double u) const;
    double lipschitz() const noexcept;
    double min_value() const noexcept;
    double max_value() const noexcept;

    /// Interior points where the derivative may jump (table breakpoints).
    std::vector<double> kinks() const;
    const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

    std::string to_string() const;

private:
    CoeffFn() = default;
    void validate() const;

    CoeffKind kind_ = CoeffKind::Constant;
    double a_ = 1.0;  // constant value or intercept
    double b_ = 0.0;  // slope
    std::vector<std::pair<double, double>> points_;
};

double evaluate(const CoeffFn& f, double u);
double lipschitz_constant(const CoeffFn& f);

/// Which scalar the coefficients of a ball model read.
///   Radius: gamma(|x|), g(|x|)          (the ball equation as usually written)
///   Radial: gamma(1-|x|^2), g(1-|x|^2)  (the reparameterised form near the boundary)
enum class CoeffArgument { Radius, Radial };

std::string to_string(CoeffArgument a);
CoeffArgument parse_coeff_argument(std::string_view s);

/// dX = (1-|X|^2)^r gamma dB - g X dt on the closed unit ball of R^n.
struct BallModel {
    int n = 2;
    double r = 0.5;
    CoeffFn gamma = CoeffFn::constant(1.4142135623730951);
    CoeffFn g = CoeffFn::constant(1.0);
    CoeffArgument argument = CoeffArgument::Radius;

    void validate() const;

    /// Coefficient argument for a state with |x|^2 = norm_sq (clamped into [0, 1]).
    double coefficient_argument(double norm_sq) const noexcept;
    double gamma_at(double norm_sq) const { return gamma(coefficient_argument(norm_sq)); }
    double g_at(double norm_sq) const { return g(coefficient_argument(norm_sq)); }

    /// Coefficient argument value on the sphere |x| = 1.
    double boundary_argument() const noexcept { return argument == CoeffArgument::Radius ? 1.0 : 0.0; }

    /// Lipschitz constants of gamma, g as functions of |x| on [0, 1].
    double gamma_lipschitz_in_radius() const;
    double g_lipschitz_in_radius() const;

    std::string describe() const;
};

/// Largest eps in (0, 1/2] such that margin(s) > 0 for every depth s in [0, eps),
/// checked on a 10^4-point grid plus the supplied kink depths. Returns 0 when
/// margin(0) <= 0.
double feasible_shell_depth(const std::function<double(double)>& margin, std::span<const double> kinks);

/// eps(p): largest eps <= 1/2 with p > 1 - g/gamma^2 on the boundary shell of
/// coefficient-argument depth eps. Throws InfeasibleError when p <= 1 - g/gamma^2 at the boundary.
double epsilon_for_p(const BallModel& model, double p);

}  // namespace degdiff
