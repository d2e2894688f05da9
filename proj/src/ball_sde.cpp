#include "degdiff/ball_sde.hpp"

#include <ostream>

#include <fmt/format.h>

#include "degdiff/errors.hpp"

namespace degdiff {

std::string to_string(SchemeKind k) { return k == SchemeKind::EulerProject ? "euler-project" : "euler-substep"; }

SchemeKind parse_scheme_kind(std::string_view s) {
    if (s == "euler-project") return SchemeKind::EulerProject;
    if (s == "euler-substep") return SchemeKind::EulerSubstep;
    throw ModelError("scheme must be 'euler-project' or 'euler-substep'");
}

void SchemeSpec::validate() const {
    if (!(substep_radius > 0.0 && substep_radius < 1.0)) throw ModelError("substep radius must lie in (0,1)");
    if (substep_factor < 2) throw ModelError("substep factor must be >= 2");
}

std::string SchemeSpec::describe() const {
    if (kind == SchemeKind::EulerProject) return to_string(kind);
    return fmt::format("{} radius={:.17g} factor={}", to_string(kind), substep_radius, substep_factor);
}

void project_to_ball(Eigen::Ref<Eigen::VectorXd> x) {
    const double norm = x.norm();
    if (norm <= 1.0) return;
    x /= norm;
    // rounding can leave |x| a hair above 1
    while (x.squaredNorm() > 1.0) x *= 1.0 - std::numeric_limits<double>::epsilon();
}

void step_in_place(const BallModel& model, Eigen::Ref<Eigen::VectorXd> x, double dt,
                   const Eigen::Ref<const Eigen::VectorXd>& dB) {
    const double norm_sq = x.squaredNorm();
    const double y = std::max(0.0, 1.0 - norm_sq);
    const double diffusion = radial_power(y, model.r) * model.gamma_at(norm_sq);
    const double drift = model.g_at(norm_sq) * dt;
    x = x - drift * x + diffusion * dB;
    if (!x.allFinite()) throw NumericError("non-finite state in ball step");
    project_to_ball(x);
}

Eigen::VectorXd step(const BallModel& model, const Eigen::VectorXd& x, double dt, const Eigen::VectorXd& dB) {
    if (!x.allFinite() || !dB.allFinite() || !std::isfinite(dt)) throw NumericError("non-finite input to step");
    if (x.size() != dB.size()) throw DomainError("state and increment dimensions differ");
    if (x.squaredNorm() > 1.0 + 1e-12) throw DomainError("state outside the closed unit ball");
    if (!(dt > 0.0)) throw DomainError("dt must be > 0");
    Eigen::VectorXd out = x;
    step_in_place(model, out, dt, dB);
    return out;
}

std::size_t step_count(double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("T and dt must be > 0");
    const double q = T / dt;
    const double r = std::round(q);
    if (std::abs(q - r) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(q));
}

Trajectory simulate(const BallModel& model, const Eigen::VectorXd& x0, double T, double dt, std::uint64_t seed,
                    const SchemeSpec& scheme) {
    model.validate();
    scheme.validate();
    if (x0.size() != model.n) throw DomainError("start point has wrong dimension");
    if (!x0.allFinite()) throw NumericError("non-finite start point");
    if (x0.squaredNorm() > 1.0 + 1e-12) throw DomainError("start point outside the closed unit ball");
    const std::size_t N = step_count(T, dt);

    Trajectory traj;
    traj.n = model.n;
    traj.dt = dt;
    traj.seed = seed;
    traj.scheme = scheme;
    traj.times.resize(N + 1);
    traj.states.resize(model.n, static_cast<Eigen::Index>(N + 1));
    traj.radial.resize(N + 1);
    traj.increments.resize(model.n, static_cast<Eigen::Index>(N));

    Eigen::VectorXd x = x0;
    project_to_ball(x);
    traj.times[0] = 0.0;
    traj.states.col(0) = x;
    traj.radial[0] = radial_value(x);

    GaussianStream noise(seed);
    advance_path(model, x, N, dt, scheme, noise, [&](std::size_t k, const Eigen::VectorXd& xk, const Eigen::VectorXd& dB) {
        const auto c = static_cast<Eigen::Index>(k);
        traj.times[k] = static_cast<double>(k) * dt;
        traj.states.col(c) = xk;
        traj.radial[k] = radial_value(xk);
        traj.increments.col(c - 1) = dB;
    });
    return traj;
}

double occupation_near_boundary(const Trajectory& traj, double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("delta must lie in (0,1]");
    if (traj.radial.empty()) return 0.0;
    std::size_t hits = 0;
    for (double y : traj.radial) hits += y <= delta ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(traj.radial.size());
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const BallModel& model) {
    out << "# model: " << model.describe() << '\n';
    out << "# seed: " << traj.seed << '\n';
    out << "# scheme: " << traj.scheme.describe() << '\n';
    out << fmt::format("# dt: {:.17g}\n", traj.dt);
    out << 't';
    for (int i = 1; i <= traj.n; ++i) out << ",x_" << i;
    out << ",Y\n";
    for (std::size_t k = 0; k < traj.radial.size(); ++k) {
        out << fmt::format("{:.17g}", traj.times[k]);
        for (int i = 0; i < traj.n; ++i) out << fmt::format(",{:.17g}", traj.states(i, static_cast<Eigen::Index>(k)));
        out << fmt::format(",{:.17g}\n", traj.radial[k]);
    }
}

}  // namespace degdiff
