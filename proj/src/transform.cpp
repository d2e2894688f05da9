#include "degdiff/transform.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "degdiff/ball_sde.hpp"
#include "degdiff/errors.hpp"

namespace degdiff {

TransformedState forward_map(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    if (n < 2) throw DomainError("forward_map needs n >= 2");
    const double r = x.norm();
    if (!(r > 0.0)) throw DomainError("forward_map is undefined at x = 0");
    return {1.0 - x.squaredNorm(), x.head(n - 1) / r};
}

Eigen::VectorXd inverse_map(const TransformedState& s) {
    if (!(s.v >= 0.0 && s.v < 1.0)) throw DomainError("v must lie in [0, 1)");
    const double yn = s.y.squaredNorm();
    if (yn > 1.0) throw DomainError("|y| must be <= 1");
    const double r = std::sqrt(1.0 - s.v);
    Eigen::VectorXd x(s.y.size() + 1);
    x.head(s.y.size()) = r * s.y;
    x(s.y.size()) = r * std::sqrt(1.0 - yn);
    return x;
}

Eigen::MatrixXd A_matrix(const Eigen::VectorXd& y) {
    return Eigen::MatrixXd::Identity(y.size(), y.size()) - y * y.transpose();
}

Eigen::MatrixXd A_sqrt(const Eigen::VectorXd& y) {
    const double s = y.squaredNorm();
    if (!(s < 1.0)) throw SingularError("A(y) is singular for |y| >= 1");
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(y.size(), y.size());
    if (s == 0.0) return out;
    // (1 - sqrt(1-s)) / s = 1 / (1 + sqrt(1-s)), which stays accurate for small s.
    out -= (1.0 / (1.0 + std::sqrt(1.0 - s))) * (y * y.transpose());
    return out;
}

void require_v_coefficients(const BallModel& model) {
    model.validate();
    if (model.argument == CoeffArgument::Radius && !(model.gamma.is_constant() && model.g.is_constant()))
        throw ModelError("the transformed system reads coefficients at V; use the radial argument");
}

namespace detail {

double clamp_v(double v, double cap) { return std::clamp(v, 0.0, 1.0 - cap); }

void transformed_step(const BallModel& model, double& v, Eigen::VectorXd& y, double dt, double dbeta,
                      const Eigen::VectorXd& dM, double cap) {
    const double gam = model.gamma(v);
    const double vr = radial_power(v, model.r);
    const double vr2g2 = vr * vr * gam * gam;
    const int n = model.n;
    const double next_v = v - 2.0 * vr * gam * std::sqrt(1.0 - v) * dbeta +
                          (2.0 * model.g(v) * (1.0 - v) - n * vr2g2) * dt;
    // Keep A(y) positive definite once the path has left the chart.
    const double ny = y.norm();
    if (ny >= 1.0) y *= (1.0 - 1e-12) / ny;
    Eigen::VectorXd next_y = y + (vr * gam / std::sqrt(1.0 - v)) * (A_sqrt(y) * dM) -
                             (0.5 * (n - 1) * vr2g2 / (1.0 - v) * dt) * y;
    if (!std::isfinite(next_v) || !next_y.allFinite()) throw NumericError("non-finite transformed state");
    v = clamp_v(next_v, cap);
    y = std::move(next_y);
}

}  // namespace detail

TransformedPath simulate_transformed(const BallModel& model, double T, double dt, std::uint64_t seed,
                                     const TransformOptions& opt) {
    if (!(T > 0.0 && dt > 0.0)) throw DomainError("T and dt must be positive");
    GaussianStream noise(seed);
    TransformedPath p = simulate_transformed_with(model, 0.0, Eigen::VectorXd::Zero(model.n - 1), step_count(T, dt),
                                                  dt, noise, opt);
    p.seed = seed;
    return p;
}

void write_transformed_csv(std::ostream& out, const TransformedPath& path) {
    out << "t,v";
    for (int i = 1; i < path.n; ++i) out << ",y_" << i;
    out << ",truncated\n";
    for (std::size_t k = 0; k < path.v.size(); ++k) {
        fmt::print(out, "{:.17g},{:.17g}", path.t[k], path.v[k]);
        for (Eigen::Index i = 0; i < path.y.rows(); ++i)
            fmt::print(out, ",{:.17g}", path.y(i, static_cast<Eigen::Index>(k)));
        fmt::print(out, ",{}\n", static_cast<int>(path.truncated[k]));
    }
}

}  // namespace degdiff
