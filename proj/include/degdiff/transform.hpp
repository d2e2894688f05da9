#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "degdiff/coeffs.hpp"
#include "degdiff/rng.hpp"

namespace degdiff {

/// Boundary chart near the north pole: v = 1 - |x|^2, y = x'/|x| with x' the first n-1 coordinates.
struct TransformedState {
    double v = 0.0;
    Eigen::VectorXd y;
};

/// Throws DomainError for x = 0.
TransformedState forward_map(const Eigen::VectorXd& x);

/// Inverse on the chart, choosing x_n >= 0.
Eigen::VectorXd inverse_map(const TransformedState& s);

/// A(y) = I - y y^T.
Eigen::MatrixXd A_matrix(const Eigen::VectorXd& y);

/// Symmetric square root I - [(1 - sqrt(1-|y|^2)) / |y|^2] y y^T; SingularError when |y| >= 1.
Eigen::MatrixXd A_sqrt(const Eigen::VectorXd& y);

enum class ChartExit { Stop, Flag };

struct TransformOptions {
    double v_cap = 1e-6;        // V is clamped to [0, 1 - v_cap]
    double chart_radius = 0.5;  // |y| above this is a truncation event
    ChartExit on_exit = ChartExit::Stop;
    bool record = true;  // keep the whole path, otherwise only the final state
};

struct TransformedPath {
    int n = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> t;
    std::vector<double> v;
    Eigen::MatrixXd y;  // (n-1) x (recorded steps)
    std::vector<unsigned char> truncated;
    bool truncation = false;
    std::size_t truncation_index = 0;  // first step with |y| > chart_radius
    double final_v = 0.0;
    Eigen::VectorXd final_y;
};

/// Coefficients of the transformed system are read at V, so the model must
/// use the radial coefficient argument or have constant coefficients.
void require_v_coefficients(const BallModel& model);

/// Euler scheme for
///   dV = -2 V^r gamma(V) sqrt(1-V) dbeta + [2 g(V)(1-V) - n V^{2r} gamma^2(V)] dt
///   dY = V^r gamma(V) (1-V)^{-1/2} A^{1/2}(Y) dM - ((n-1)/2)(1-V)^{-1} V^{2r} gamma^2(V) Y dt
/// from (v0, y0). Noise draws per step: beta first, then the n-1 components of M.
template <NormalSource Noise>
TransformedPath simulate_transformed_with(const BallModel& model, double v0, const Eigen::VectorXd& y0,
                                          std::size_t steps, double dt, Noise& noise,
                                          const TransformOptions& opt = {});

TransformedPath simulate_transformed(const BallModel& model, double T, double dt, std::uint64_t seed,
                                     const TransformOptions& opt = {});

/// CSV columns t, v, y_1..y_{n-1}, truncated.
void write_transformed_csv(std::ostream& out, const TransformedPath& path);

namespace detail {
double clamp_v(double v, double cap);
void transformed_step(const BallModel& model, double& v, Eigen::VectorXd& y, double dt, double dbeta,
                      const Eigen::VectorXd& dM, double cap);
}  // namespace detail

template <NormalSource Noise>
TransformedPath simulate_transformed_with(const BallModel& model, double v0, const Eigen::VectorXd& y0,
                                          std::size_t steps, double dt, Noise& noise, const TransformOptions& opt) {
    require_v_coefficients(model);
    const int m = model.n - 1;
    TransformedPath path;
    path.n = model.n;
    path.dt = dt;
    double v = detail::clamp_v(v0, opt.v_cap);
    Eigen::VectorXd y = y0;
    Eigen::VectorXd dM(m);
    const double sdt = std::sqrt(dt);
    auto record = [&](std::size_t k, bool flag) {
        if (!opt.record) return;
        path.t.push_back(static_cast<double>(k) * dt);
        path.v.push_back(v);
        path.truncated.push_back(flag ? 1 : 0);
    };
    std::vector<Eigen::VectorXd> ys;
    if (opt.record) ys.push_back(y);
    record(0, y.norm() > opt.chart_radius);
    for (std::size_t k = 1; k <= steps; ++k) {
        const double dbeta = sdt * noise();
        for (int i = 0; i < m; ++i) dM(i) = sdt * noise();
        detail::transformed_step(model, v, y, dt, dbeta, dM, opt.v_cap);
        const bool out = y.norm() > opt.chart_radius;
        if (out && !path.truncation) {
            path.truncation = true;
            path.truncation_index = k;
        }
        if (opt.record) ys.push_back(y);
        record(k, out);
        if (out && opt.on_exit == ChartExit::Stop) break;
    }
    if (opt.record) {
        path.y.resize(m, static_cast<Eigen::Index>(ys.size()));
        for (std::size_t k = 0; k < ys.size(); ++k) path.y.col(static_cast<Eigen::Index>(k)) = ys[k];
    }
    path.final_v = v;
    path.final_y = y;
    return path;
}

}  // namespace degdiff
