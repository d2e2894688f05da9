#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "degdiff/coeffs.hpp"
#include "degdiff/rng.hpp"

namespace degdiff {

enum class SchemeKind { EulerProject, EulerSubstep };

std::string to_string(SchemeKind k);
SchemeKind parse_scheme_kind(std::string_view s);

/// Euler-Maruyama with radial projection, optionally refined near the sphere:
/// coarse steps that start with Y < substep_radius are split into
/// `substep_factor` substeps whose increments sum to the recorded one.
struct SchemeSpec {
    SchemeKind kind = SchemeKind::EulerProject;
    double substep_radius = 1e-2;
    int substep_factor = 4;

    void validate() const;
    std::string describe() const;
};

struct Trajectory {
    int n = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    SchemeSpec scheme;
    std::vector<double> times;   // t_k = k dt, k = 0..N
    Eigen::MatrixXd states;      // n x (N+1)
    std::vector<double> radial;  // Y_k = 1 - |X_k|^2
    Eigen::MatrixXd increments;  // n x N, column k-1 drives step k

    std::size_t steps() const noexcept { return radial.empty() ? 0 : radial.size() - 1; }
};

/// 1 - |x|^2, clamped at 0.
inline double radial_value(const Eigen::Ref<const Eigen::VectorXd>& x) {
    return std::max(0.0, 1.0 - x.squaredNorm());
}

/// Y^r with Y clamped to [0, 1] first.
inline double radial_power(double y, double r) {
    y = std::clamp(y, 0.0, 1.0);
    return r == 0.5 ? std::sqrt(y) : std::pow(y, r);
}

/// Radially rescales x into the closed unit ball; the result has |x| <= 1.
void project_to_ball(Eigen::Ref<Eigen::VectorXd> x);

/// One Euler step followed by projection onto the closed ball.
Eigen::VectorXd step(const BallModel& model, const Eigen::VectorXd& x, double dt, const Eigen::VectorXd& dB);
void step_in_place(const BallModel& model, Eigen::Ref<Eigen::VectorXd> x, double dt,
                   const Eigen::Ref<const Eigen::VectorXd>& dB);

/// ceil(T / dt) guarded against representation error in the quotient.
std::size_t step_count(double T, double dt);

/// Runs `steps` coarse steps of size dt from x (updated in place). After each
/// step k = 1..steps, calls obs(k, x, dB) with the coarse increment dB.
template <NormalSource Noise, class Observer>
void advance_path(const BallModel& model, Eigen::VectorXd& x, std::size_t steps, double dt,
                  const SchemeSpec& scheme, Noise& noise, Observer&& obs) {
    const auto n = x.size();
    Eigen::VectorXd dB(n), sub(n);
    const double sdt = std::sqrt(dt);
    const bool refine = scheme.kind == SchemeKind::EulerSubstep;
    const double fine_dt = dt / scheme.substep_factor;
    const double fine_sdt = std::sqrt(fine_dt);
    for (std::size_t k = 1; k <= steps; ++k) {
        if (refine && radial_value(x) < scheme.substep_radius) {
            dB.setZero();
            for (int j = 0; j < scheme.substep_factor; ++j) {
                for (Eigen::Index i = 0; i < n; ++i) sub(i) = fine_sdt * noise();
                step_in_place(model, x, fine_dt, sub);
                dB += sub;
            }
        } else {
            for (Eigen::Index i = 0; i < n; ++i) dB(i) = sdt * noise();
            step_in_place(model, x, dt, dB);
        }
        obs(k, x, dB);
    }
}

Trajectory simulate(const BallModel& model, const Eigen::VectorXd& x0, double T, double dt, std::uint64_t seed,
                    const SchemeSpec& scheme = {});

/// Fraction of recorded states (k = 0..N) with Y_k <= delta.
double occupation_near_boundary(const Trajectory& traj, double delta);

/// CSV with columns t, x_1..x_n, Y; metadata in leading '#' comment lines.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const BallModel& model);

}  // namespace degdiff
