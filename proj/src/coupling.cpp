#include "degdiff/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "degdiff/errors.hpp"
#include "degdiff/inequalities.hpp"
#include "degdiff/parallel.hpp"
#include "degdiff/stats.hpp"

namespace degdiff {

namespace {

void require_p(double p) {
    if (!(p > 0.5 && p < 1.0)) throw DomainError("p must lie in (1/2, 1)");
}

// a^s - b^s computed as a^s (1 - (b/a)^s), exact zero when a == b.
double pow_diff(double a, double b, double s) {
    if (a == b) return 0.0;
    return -std::pow(a, s) * std::expm1(s * std::log(b / a));
}

struct ProofSuprema {
    double C31, C33, C36;
};

ProofSuprema proof_suprema(double p) { return {lemma31_sup(p), lemma33_constant(p), lemma36_sup(p)}; }

CouplingConstants build_constants(const BallModel& model, double p, double eps, const ProofSuprema& s) {
    CouplingConstants k;
    k.p = p;
    k.eps = eps;
    k.C31 = s.C31;
    k.C33 = s.C33;
    k.C36 = s.C36;
    k.sup_gamma = model.gamma.max_value();
    k.sup_g = model.g.max_value();
    k.L_gamma = model.gamma_lipschitz_in_radius();
    k.L_g = model.g_lipschitz_in_radius();
    const double sg = k.sup_gamma, lg = k.L_gamma;
    const double root = std::sqrt(1.0 - eps);
    k.L_u2G = 2.0 * k.sup_g + k.L_g + (1.0 - p) * (2.0 * sg * sg + 2.0 * sg * lg);
    k.A1 = p * k.L_u2G * k.C31 / root;
    const double B = 0.5 * sg + lg / (2.0 * root);
    k.A3 = 8.0 * p * p * sg * B * k.C33;
    k.C3x = 4.0 * p * p * ((sg + lg) * (sg + lg) + sg * sg);
    k.A5 = 2.0 * model.n * sg * sg * k.C36;
    k.C_hat = k.C3x + 2.0 * model.n * eps * lg * lg;
    k.worst_bracket = shell_worst_bracket(model, p, eps);
    const double lead = k.worst_bracket <= 0.0 ? (1.0 - eps) * k.worst_bracket : k.worst_bracket;
    k.K_worst = 4.0 * p * lead + (2.0 * k.A1 + k.A3) * eps + k.A5 * std::pow(eps, 2.0 - 2.0 * p);
    return k;
}

}  // namespace

double threshold_F(double p) { return (1.0 - p) + (2.0 * p - 1.0) * (2.0 * p - 1.0) / (4.0 * (1.0 - p)); }

// F is flat at its minimum, so comparing F values cannot locate p* closer
// than about sqrt(ulp / F''). The search runs on |F'| instead, which has a
// sharp V-shaped minimum at the same point.
OptimalP optimal_p() {
    auto slope = [](double p) {
        const double u = 2.0 * p - 1.0, v = 1.0 - p;
        return std::abs(-1.0 + u / v + u * u / (4.0 * v * v));
    };
    const double inv_phi = 0.6180339887498949;
    double a = 0.5, b = 1.0 - 1e-9;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = slope(c), fd = slope(d);
    while (b - a > 1e-12) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = slope(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = slope(d);
        }
    }
    const double p = 0.5 * (a + b);
    return {p, threshold_F(p)};
}

double threshold_c() { return 2.0 * optimal_p().F; }

SingularTerms singular_terms(const BallModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& xt, double p) {
    if (model.r != 0.5) throw ModelError("singular terms are defined for r = 1/2");
    require_p(p);
    if (x.size() != model.n || xt.size() != model.n) throw DomainError("state dimension does not match the model");
    const double nx = x.squaredNorm(), nxt = xt.squaredNorm();
    const double Y = 1.0 - nx, Yt = 1.0 - nxt;
    if (!(Y > 0.0 && Yt > 0.0)) throw DomainError("singular terms need Y > 0 and Yt > 0");
    const double gam = model.gamma_at(nx), gamt = model.gamma_at(nxt);
    const double g = model.g_at(nx), gt = model.g_at(nxt);
    const double G = g + (p - 1.0) * gam * gam, Gt = gt + (p - 1.0) * gamt * gamt;
    const int n = model.n;

    SingularTerms s;
    s.I1 = 2.0 * p * (nx * std::pow(Y, p - 1.0) * G - nxt * std::pow(Yt, p - 1.0) * Gt);
    s.I2 = -n * p * (gam * gam * std::pow(Y, p) - gamt * gamt * std::pow(Yt, p));
    const double a = gam * std::pow(Y, p - 0.5), at = gamt * std::pow(Yt, p - 0.5);
    double i3 = 0.0, i4 = 0.0;
    for (int j = 0; j < n; ++j) {
        const double d = a * x(j) - at * xt(j);
        i3 += d * d;
        i4 += (x(j) - xt(j)) * (g * x(j) - gt * xt(j));
    }
    s.I3 = 4.0 * p * p * i3;
    s.I4 = -2.0 * i4;
    const double e = std::sqrt(Y) * gam - std::sqrt(Yt) * gamt;
    s.I5 = n * e * e;
    s.Z = pow_diff(Y, Yt, p) * pow_diff(Yt, Y, p - 1.0);
    return s;
}

double shell_worst_bracket(const BallModel& model, double p, double eps) {
    require_p(p);
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
    const double F = threshold_F(p);
    double lo = 0.0, hi = eps;
    if (model.argument == CoeffArgument::Radius) {
        lo = std::sqrt(1.0 - eps);
        hi = 1.0;
    }
    std::vector<double> pts{lo, hi};
    for (const CoeffFn* f : {&model.gamma, &model.g})
        for (double k : f->kinks())
            if (k > lo && k < hi) pts.push_back(k);
    double worst = -std::numeric_limits<double>::infinity();
    for (double u : pts) {
        const double gam = model.gamma(u);
        worst = std::max(worst, F * gam * gam - model.g(u));
    }
    return worst;
}

double CouplingConstants::K_at(const BallModel& model, double norm_sq) const {
    const double gam = model.gamma_at(norm_sq);
    return 4.0 * p * norm_sq * (threshold_F(p) * gam * gam - model.g_at(norm_sq)) + (2.0 * A1 + A3) * eps +
           A5 * std::pow(eps, 2.0 - 2.0 * p);
}

CouplingConstants coupling_constants(const BallModel& model, double p, double eps) {
    model.validate();
    require_p(p);
    if (!(eps > 0.0 && eps <= 0.5)) throw DomainError("eps must lie in (0, 1/2]");
    return build_constants(model, p, eps, proof_suprema(p));
}

double lemma37_K(const BallModel& model, double p, double eps, double C) {
    require_p(p);
    if (!(eps > 0.0 && eps < 0.5)) throw DomainError("eps must lie in (0, 1/2)");
    if (!(C >= 0.0)) throw DomainError("C must be >= 0");
    const double w = shell_worst_bracket(model, p, eps);
    const double lead = w <= 0.0 ? (1.0 - eps) * w : w;
    return 4.0 * p * lead + C * (eps + std::pow(eps, 2.0 - 2.0 * p));
}

double contracting_epsilon(const BallModel& model, double p, double eps_max) {
    model.validate();
    require_p(p);
    if (!(eps_max > 0.0 && eps_max <= 0.5)) throw DomainError("eps_max must lie in (0, 1/2]");
    const ProofSuprema s = proof_suprema(p);
    auto K = [&](double e) { return build_constants(model, p, e, s).K_worst; };
    double fail = -1.0;
    for (int k = 0; k <= 240; ++k) {
        const double e = eps_max * std::exp2(-k / 4.0);
        if (K(e) < 0.0) {
            if (fail < 0.0) return e;
            double good = e;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (good + fail);
                (K(mid) < 0.0 ? good : fail) = mid;
            }
            return good;
        }
        fail = e;
    }
    return 0.0;
}

double default_exponent(const BallModel& model) {
    const double b = model.boundary_argument();
    const double gb = model.gamma(b);
    const double p_min = std::max(0.5, 1.0 - model.g(b) / (gb * gb));
    const double p_star = optimal_p().p;
    if (p_star > p_min) return p_star;
    return p_min + 0.1 * (1.0 - p_min);
}

CoupledDiagnostics run_coupled(const BallModel& model, const Eigen::VectorXd& x0, const Eigen::VectorXd& xt0, double T,
                               double dt, std::uint64_t seed, const CoupledOptions& options) {
    model.validate();
    options.scheme.validate();
    if (model.r != 0.5) throw ModelError("coupled diagnostics are defined for r = 1/2");
    if (x0.size() != model.n || xt0.size() != model.n) throw DomainError("start dimension does not match the model");
    if (x0.squaredNorm() > 1.0 || xt0.squaredNorm() > 1.0) throw DomainError("starts must lie in the closed ball");
    if (!(T > 0.0 && dt > 0.0)) throw DomainError("T and dt must be positive");

    CoupledDiagnostics d;
    d.p = options.p > 0.0 ? options.p : default_exponent(model);
    require_p(d.p);
    const double eps_p = epsilon_for_p(model, d.p);
    if (options.epsilon > 0.0) {
        d.eps = std::min(options.epsilon, eps_p);
    } else {
        const double ec = contracting_epsilon(model, d.p, eps_p);
        d.eps = ec > 0.0 ? ec : eps_p;
    }
    const CouplingConstants k = coupling_constants(model, d.p, d.eps);
    d.K_contracting = k.K_worst < 0.0;
    d.C_hat = k.C_hat;
    const double bound_factor = options.safety * k.C_hat;

    const std::size_t steps = step_count(T, dt);
    d.steps = steps;
    d.tau_index = steps;
    Eigen::VectorXd x = x0, xt = xt0;
    d.initial_distance = (x0 - xt0).norm();
    const int n = model.n;
    Eigen::VectorXd dB(n);
    GaussianStream noise(seed);
    const double sdt = std::sqrt(dt);
    const SchemeSpec& scheme = options.scheme;
    const double fine_dt = dt / scheme.substep_factor;
    const double fine_sdt = std::sqrt(fine_dt);
    const double p = d.p;

    for (std::size_t step = 0;; ++step) {
        const double Y = radial_value(x), Yt = radial_value(xt);
        if (Y > d.eps || Yt > d.eps) {
            d.tau_index = step;
            break;
        }
        const double dist2 = (x - xt).squaredNorm();
        const double ypd = pow_diff(Y, Yt, p);
        const double W = ypd * ypd + dist2;
        if (step == 0) d.W0 = W;
        d.sup_W = std::max(d.sup_W, W);
        d.int_W += W * dt;

        SingularTerms s;
        bool usable = Y > 0.0 && Yt > 0.0;
        if (usable) {
            s = singular_terms(model, x, xt, p);
        } else {
            ++d.skipped;
        }
        const double prod1 = ypd * s.I1, prod2 = ypd * s.I2;
        if (usable) {
            d.int_Z += s.Z * dt;
            d.int_I1 += s.I1 * dt;
            d.int_I2 += s.I2 * dt;
            d.int_I3 += s.I3 * dt;
            d.int_I4 += s.I4 * dt;
            d.int_I5 += s.I5 * dt;
            d.int_prod1 += prod1 * dt;
            d.int_prod2 += prod2 * dt;
            d.int_lhs += (2.0 * prod1 + s.I3 + s.I5) * dt;
            d.int_dist2 += dist2 * dt;
        }
        const double bound = bound_factor * d.int_dist2;
        if (!(d.int_lhs <= bound + 1e-12 * (std::abs(d.int_lhs) + bound))) d.inequality_held = false;
        if (bound > 0.0) d.worst_ratio = std::max(d.worst_ratio, d.int_lhs / (k.C_hat * d.int_dist2));
        if (options.record_steps) {
            d.W.push_back(W);
            d.Z.push_back(s.Z);
            d.I1.push_back(s.I1);
            d.I2.push_back(s.I2);
            d.I3.push_back(s.I3);
            d.I4.push_back(s.I4);
            d.I5.push_back(s.I5);
            d.prod1.push_back(prod1);
            d.prod2.push_back(prod2);
            d.K_negative.push_back(k.K_at(model, x.squaredNorm()) < 0.0 ? 1 : 0);
        }
        if (step == steps) break;

        if (scheme.kind == SchemeKind::EulerSubstep && std::min(Y, Yt) < scheme.substep_radius) {
            for (int j = 0; j < scheme.substep_factor; ++j) {
                for (int i = 0; i < n; ++i) dB(i) = fine_sdt * noise();
                step_in_place(model, x, fine_dt, dB);
                step_in_place(model, xt, fine_dt, dB);
            }
        } else {
            for (int i = 0; i < n; ++i) dB(i) = sdt * noise();
            step_in_place(model, x, dt, dB);
            step_in_place(model, xt, dt, dB);
        }
    }
    if (d.tau_index == 0) {
        const double ypd = pow_diff(radial_value(x), radial_value(xt), p);
        d.W0 = d.sup_W = ypd * ypd + (x - xt).squaredNorm();
    }
    d.final_distance = (x - xt).norm();
    return d;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Above:
            return "above";
        case Regime::Threshold:
            return "threshold";
        case Regime::Below:
            return "below";
    }
    return "below";
}

Regime classify_regime(double c) {
    const double cs = threshold_c();
    if (std::abs(c - cs) <= 1e-9) return Regime::Threshold;
    return c > cs ? Regime::Above : Regime::Below;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> coupled_starts(int n, double depth, double partner_depth, double angle) {
    if (n < 2) throw DomainError("dimension must be >= 2");
    if (!(depth >= 0.0 && depth < 1.0 && partner_depth >= 0.0 && partner_depth < 1.0))
        throw DomainError("start depths must lie in [0, 1)");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n), xt = Eigen::VectorXd::Zero(n);
    x(n - 1) = std::sqrt(1.0 - depth);
    const double rt = std::sqrt(1.0 - partner_depth);
    xt(0) = rt * std::sin(angle);
    xt(n - 1) = rt * std::cos(angle);
    return {x, xt};
}

std::vector<SweepRow> threshold_sweep(const BallModel& base, const SweepOptions& options) {
    base.validate();
    if (options.c_values.empty()) throw DomainError("c grid is empty");
    if (options.replicas == 0) throw DomainError("replicas must be positive");
    const auto [x0, xt0] = coupled_starts(base.n, options.start_depth, options.partner_depth, options.angle);
    std::vector<SweepRow> rows;
    for (std::size_t ci = 0; ci < options.c_values.size(); ++ci) {
        const double c = options.c_values[ci];
        if (!(c > 0.0)) throw DomainError("c values must be positive");
        BallModel model = base;
        model.g = CoeffFn::constant(c);
        CoupledOptions copt;
        copt.p = default_exponent(model);
        copt.record_steps = false;
        const double eps_p = epsilon_for_p(model, copt.p);
        const double ec = contracting_epsilon(model, copt.p, eps_p);
        copt.epsilon = ec > 0.0 ? ec : eps_p;

        std::vector<double> ratio(options.replicas);
        std::vector<unsigned char> held(options.replicas);
        parallel_for(options.replicas, options.threads, [&](std::size_t r) {
            const auto seed = derive_seed(options.seed, {hash_tag("sweep"), ci, r});
            const CoupledDiagnostics d = run_coupled(model, x0, xt0, options.T, options.dt, seed, copt);
            ratio[r] = d.final_distance / d.initial_distance;
            held[r] = d.inequality_held ? 1 : 0;
        });
        SweepRow row;
        row.c = c;
        row.replicas = options.replicas;
        row.median_ratio = quantile(ratio, 0.5);
        row.p95_ratio = quantile(ratio, 0.95);
        std::size_t count = 0;
        for (unsigned char h : held) count += h;
        row.ineq_held_fraction = static_cast<double>(count) / static_cast<double>(options.replicas);
        row.p = copt.p;
        row.eps = copt.epsilon;
        row.dt = options.dt;
        row.seed = options.seed;
        row.regime = classify_regime(c);
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "c,replicas,median_ratio,p95_ratio,ineq_held_fraction,p,eps,dt,seed,regime\n";
    for (const SweepRow& r : rows)
        fmt::print(out, "{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", r.c, r.replicas,
                   r.median_ratio, r.p95_ratio, r.ineq_held_fraction, r.p, r.eps, r.dt, r.seed, to_string(r.regime));
}

}  // namespace degdiff
