#include "degdiff/general_domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "degdiff/errors.hpp"
#include "degdiff/expression.hpp"

namespace degdiff {

namespace {

constexpr double kFdStep = 1e-5;

std::span<const double> coords(const Point& x) { return {x.data(), static_cast<std::size_t>(x.size())}; }

Point random_direction(int n, GaussianStream& rng) {
    Point d(n);
    do {
        for (int i = 0; i < n; ++i) d(i) = rng();
    } while (d.norm() < 1e-8);
    return d.normalized();
}

// Largest s along the ray with phi(center + s d) > 0, bracketed then bisected.
double ray_exit(const DomainSpec& spec, const Point& d) {
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (spec.phi(spec.center + hi * d) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 60) throw HypothesisViolation("domain is unbounded along a sampled ray");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (spec.phi(spec.center + mid * d) > 0.0 ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace

Point ScalarField::grad(const Point& x) const {
    if (gradient) return gradient(x);
    Point g(x.size());
    Point xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + kFdStep;
        xm(i) = x(i) - kFdStep;
        g(i) = (value(xp) - value(xm)) / (2.0 * kFdStep);
        xp(i) = xm(i) = x(i);
    }
    return g;
}

ScalarField ScalarField::parse(const std::string& text, int n) {
    auto e = Expression::parse(text, n);
    return {[e](const Point& x) { return e(coords(x)); }, {}, text};
}

Eigen::MatrixXd DomainSpec::a(const Point& x) const {
    const Eigen::MatrixXd s = sigma(x);
    return s * s.transpose();
}

DomainSpec sphere_domain(int n, const CoeffFn& gamma, const CoeffFn& g) {
    if (n < 1) throw ModelError("dimension must be positive");
    DomainSpec s;
    s.name = fmt::format("sphere(n={}, gamma={}, g={})", n, gamma.to_string(), g.to_string());
    s.n = n;
    ScalarField f{[](const Point& x) { return 1.0 - x.squaredNorm(); }, [](const Point& x) { return Point(-2.0 * x); },
                  "1 - |x|^2"};
    s.phi = f;
    s.h = f;
    s.sigma = [gamma, n](const Point& x) {
        return Eigen::MatrixXd(gamma(x.norm()) * Eigen::MatrixXd::Identity(n, n));
    };
    s.b = [g](const Point& x) { return Point(-g(x.norm()) * x); };
    s.center = Point::Zero(n);
    s.h_neighborhood = 0.1;
    return s;
}

DomainSpec ellipsoid_domain(const std::vector<double>& semi_axes, EllipsoidDrift drift) {
    const int n = static_cast<int>(semi_axes.size());
    if (n < 1) throw ModelError("ellipsoid needs at least one semi-axis");
    Point inv2(n);
    for (int i = 0; i < n; ++i) {
        if (!(semi_axes[static_cast<std::size_t>(i)] > 0.0)) throw ModelError("semi-axes must be positive");
        inv2(i) = 1.0 / (semi_axes[static_cast<std::size_t>(i)] * semi_axes[static_cast<std::size_t>(i)]);
    }
    DomainSpec s;
    std::string axes;
    for (double a : semi_axes) axes += fmt::format("{}{}", axes.empty() ? "" : ",", a);
    s.name = fmt::format("ellipsoid({}; b={})", axes, drift == EllipsoidDrift::Gradient ? "grad h" : "-x");
    s.n = n;
    ScalarField f{[inv2](const Point& x) { return 1.0 - x.cwiseProduct(x).dot(inv2); },
                  [inv2](const Point& x) { return Point(-2.0 * x.cwiseProduct(inv2)); }, "1 - sum x_i^2/a_i^2"};
    s.phi = f;
    s.h = f;
    s.sigma = [n](const Point&) { return Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)); };
    if (drift == EllipsoidDrift::Gradient)
        s.b = [inv2](const Point& x) { return Point(-2.0 * x.cwiseProduct(inv2)); };
    else
        s.b = [](const Point& x) { return Point(-x); };
    s.center = Point::Zero(n);
    s.h_neighborhood = 0.1;
    return s;
}

DomainSpec expression_domain(int n, const std::string& phi, const std::string& h, const std::string& sigma_scale,
                             const std::vector<std::string>& drift, const Point& center) {
    if (n < 1) throw ModelError("dimension must be positive");
    if (static_cast<int>(drift.size()) != n) throw ModelError(fmt::format("drift needs {} components", n));
    if (center.size() != n) throw ModelError("centre has the wrong dimension");
    DomainSpec s;
    // an empty h means h = phi
    const std::string& hh = h.empty() ? phi : h;
    s.name = fmt::format("expression(phi={}, h={})", phi, hh);
    s.n = n;
    s.phi = ScalarField::parse(phi, n);
    s.h = ScalarField::parse(hh, n);
    auto sig = Expression::parse(sigma_scale, n);
    s.sigma = [sig, n](const Point& x) { return Eigen::MatrixXd(sig(coords(x)) * Eigen::MatrixXd::Identity(n, n)); };
    std::vector<Expression> comps;
    for (const auto& d : drift) comps.push_back(Expression::parse(d, n));
    s.b = [comps](const Point& x) {
        Point out(static_cast<Eigen::Index>(comps.size()));
        for (std::size_t i = 0; i < comps.size(); ++i) out(static_cast<Eigen::Index>(i)) = comps[i](coords(x));
        return out;
    };
    s.center = center;
    if (!(s.phi(center) > 0.0)) throw ModelError("centre must satisfy phi > 0");
    s.h_neighborhood = 0.1 * s.h(center);
    return s;
}

std::vector<Point> boundary_samples(const DomainSpec& spec, std::size_t count, std::uint64_t seed) {
    GaussianStream rng(seed);
    std::vector<Point> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Point d = random_direction(spec.n, rng);
        out.push_back(spec.center + ray_exit(spec, d) * d);
    }
    return out;
}

std::vector<Point> neighborhood_samples(const DomainSpec& spec, std::size_t count, std::uint64_t seed) {
    GaussianStream rng(seed);
    std::mt19937_64 uni(mix64(seed));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double h_center = spec.h(spec.center);
    const double hN = spec.h_neighborhood > 0.0 ? spec.h_neighborhood : 0.1 * h_center;
    if (!(hN > 0.0) || hN >= h_center) throw HypothesisViolation("boundary neighbourhood is empty");
    std::vector<Point> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Point d = random_direction(spec.n, rng);
        const double s_exit = ray_exit(spec, d);
        double target = 0.0;
        while (!(target > 0.0)) target = hN * u01(uni);
        // h(center) > target >= h(boundary) brackets a crossing on the ray.
        double lo = 0.0, hi = s_exit;
        for (int it = 0; it < 200 && hi - lo > 1e-16 * s_exit; ++it) {
            const double mid = 0.5 * (lo + hi);
            (spec.h(spec.center + mid * d) > target ? lo : hi) = mid;
        }
        out.push_back(spec.center + 0.5 * (lo + hi) * d);
    }
    return out;
}

DomainValidation validate_domain(const DomainSpec& spec, const std::vector<Point>& boundary,
                                 const std::vector<Point>& interior, std::uint64_t seed) {
    GaussianStream rng(seed);
    auto positive_a = [&](const Point& x) {
        const Point xi = random_direction(spec.n, rng);
        return xi.dot(spec.a(x) * xi) > 0.0;
    };
    for (const auto& x : interior) {
        if (!(spec.h(x) > 0.0)) return {false, fmt::format("h <= 0 at interior point h={}", spec.h(x))};
        if (!positive_a(x)) return {false, "a(x) is not positive definite at an interior sample"};
    }
    for (const auto& x : boundary) {
        if (!(std::abs(spec.h(x)) < 1e-10)) return {false, fmt::format("|h| = {} at a boundary sample", spec.h(x))};
        if (!(spec.h.grad(x).norm() > 0.0)) return {false, "grad h vanishes at a boundary sample"};
        if (!positive_a(x)) return {false, "a(x) is not positive definite at a boundary sample"};
    }
    return {};
}

DriftDecomposition decompose_drift(const DomainSpec& spec, const Point& x) {
    const Point gh = spec.h.grad(x);
    const double norm = gh.norm();
    if (!(norm > 0.0)) throw HypothesisViolation("grad h vanishes");
    const Point b = spec.b(x);
    const Point unit = gh / norm;
    DriftDecomposition out;
    out.g = b.dot(unit);
    if (!(out.g > 0.0)) throw HypothesisViolation(fmt::format("drift is not inward: g = {}", out.g));
    out.beta = b - out.g * unit;
    return out;
}

std::function<double(const Point&)> grad_h_squared(const DomainSpec& spec) {
    return [spec](const Point& x) { return spec.h.grad(x).squaredNorm(); };
}

std::function<double(const Point&)> g_times_grad_h(const DomainSpec& spec) {
    return [spec](const Point& x) { return spec.b(x).dot(spec.h.grad(x)); };
}

std::function<double(const Point&)> a_grad_h(const DomainSpec& spec) {
    return [spec](const Point& x) {
        const Point gh = spec.h.grad(x);
        return gh.dot(spec.a(x) * gh);
    };
}

AlphaReport alpha(const DomainSpec& spec, const std::vector<Point>& boundary) {
    AlphaReport rep;
    if (boundary.empty()) return rep;
    double sum = 0.0;
    for (const auto& x : boundary) {
        const auto dec = decompose_drift(spec, x);
        const Point gh = spec.h.grad(x);
        const double agg = gh.dot(spec.a(x) * gh);
        if (!(agg > 0.0)) throw HypothesisViolation("<a grad h, grad h> vanishes on the boundary");
        const double v = 2.0 * dec.g * gh.norm() / agg;
        rep.values.push_back(v);
        sum += v;
    }
    const auto [mn, mx] = std::minmax_element(rep.values.begin(), rep.values.end());
    rep.min = *mn;
    rep.max = *mx;
    rep.mean = sum / static_cast<double>(rep.values.size());
    rep.spread = rep.max - rep.min;
    rep.relative_spread = rep.spread / std::abs(rep.mean);
    rep.constant = rep.relative_spread < 1e-6;
    rep.above_threshold = rep.constant && rep.mean > std::sqrt(2.0) - 1.0;
    return rep;
}

FunctionOfHReport is_function_of_h(const DomainSpec& spec, const std::function<double(const Point&)>& f,
                                   const std::vector<Point>& samples) {
    FunctionOfHReport rep;
    if (samples.size() < 2) return rep;
    std::vector<double> hs(samples.size()), fs(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        hs[i] = spec.h(samples[i]);
        fs[i] = f(samples[i]);
    }
    const auto [hmin, hmax] = std::minmax_element(hs.begin(), hs.end());
    const double lo = *hmin, range = *hmax - *hmin;
    if (!(range > 0.0)) throw DomainError("samples must span a range of h values");
    rep.bin_width = 1e-3 * range;

    struct Bin {
        double fmin = std::numeric_limits<double>::infinity();
        double fmax = -std::numeric_limits<double>::infinity();
        double hsum = 0.0, fsum = 0.0;
        std::size_t count = 0;
    };
    std::map<long, Bin> bins;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const long k = std::min(999L, static_cast<long>((hs[i] - lo) / rep.bin_width));
        Bin& b = bins[k];
        b.fmin = std::min(b.fmin, fs[i]);
        b.fmax = std::max(b.fmax, fs[i]);
        b.hsum += hs[i];
        b.fsum += fs[i];
        ++b.count;
    }
    rep.bins_used = bins.size();

    const Bin* prev = nullptr;
    for (const auto& [k, b] : bins) {
        if (prev) {
            const double dh = b.hsum / b.count - prev->hsum / prev->count;
            if (dh > 0.0)
                rep.lipschitz_estimate =
                    std::max(rep.lipschitz_estimate, std::abs(b.fsum / b.count - prev->fsum / prev->count) / dh);
        }
        prev = &b;
        const double spread = b.fmax - b.fmin;
        if (spread > rep.worst_spread) {
            rep.worst_spread = spread;
            rep.worst_h = lo + (static_cast<double>(k) + 0.5) * rep.bin_width;
        }
    }
    rep.is_function = rep.worst_spread <= 1e-6 + rep.lipschitz_estimate * rep.bin_width;
    return rep;
}

int domain_step(const DomainSpec& spec, Point& x, double dt, const Eigen::VectorXd& dB) {
    const double hx = std::max(spec.h(x), 0.0);
    Point inc = spec.b(x) * dt;
    if (hx > 0.0) inc += std::sqrt(hx) * (spec.sigma(x) * dB);
    if (!inc.allFinite()) throw NumericError("non-finite domain step");
    if (spec.phi(x + inc) >= 0.0) {
        x += inc;
        return 0;
    }
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (spec.phi(x + mid * inc) >= 0.0 ? lo : hi) = mid;
    }
    if (lo == 0.0) throw StepRejection("no admissible fraction of the step after 40 bisections");
    x += lo * inc;
    return 1;
}

DomainTrajectory simulate_domain(const DomainSpec& spec, const Point& x0, double T, double dt, std::uint64_t seed) {
    if (!(T > 0.0 && dt > 0.0)) throw DomainError("T and dt must be positive");
    if (x0.size() != spec.n) throw DomainError("start point has the wrong dimension");
    if (spec.phi(x0) < -1e-10) throw DomainError("start point lies outside the closed domain");
    GaussianStream noise(seed);
    const auto steps = static_cast<std::size_t>(std::llround(T / dt));
    return simulate_domain_with(spec, x0, steps, dt, noise);
}

Point simulate_domain_final(const DomainSpec& spec, const Point& x0, double T, double dt, std::uint64_t seed) {
    if (!(T > 0.0 && dt > 0.0)) throw DomainError("T and dt must be positive");
    if (spec.phi(x0) < -1e-10) throw DomainError("start point lies outside the closed domain");
    GaussianStream noise(seed);
    const auto steps = static_cast<std::size_t>(std::llround(T / dt));
    Point x = x0;
    Eigen::VectorXd dB(spec.n);
    const double sdt = std::sqrt(dt);
    for (std::size_t k = 0; k < steps; ++k) {
        for (int i = 0; i < spec.n; ++i) dB(i) = sdt * noise();
        domain_step(spec, x, dt, dB);
    }
    return x;
}

DomainCoupling couple_domain(const DomainSpec& spec, const Point& x0, const Point& xt0, double T, double dt,
                             std::uint64_t seed, double p, double eps) {
    if (!(p > 0.5 && p < 1.0)) throw DomainError("p must lie in (1/2, 1)");
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (!(T > 0.0 && dt > 0.0)) throw DomainError("T and dt must be positive");
    GaussianStream noise(seed);
    const auto steps = static_cast<std::size_t>(std::llround(T / dt));
    Point x = x0, xt = xt0;
    Eigen::VectorXd dB(spec.n);
    const double sdt = std::sqrt(dt);
    DomainCoupling out;
    out.initial_distance = (x - xt).norm();
    auto W = [&](double y, double yt) {
        const double d = std::pow(std::max(y, 0.0), p) - std::pow(std::max(yt, 0.0), p);
        return d * d + (x - xt).squaredNorm();
    };
    std::size_t k = 0;
    for (;; ++k) {
        const double y = spec.h(x), yt = spec.h(xt);
        if (y > eps || yt > eps) break;
        out.W.push_back(W(y, yt));
        out.sup_W = std::max(out.sup_W, out.W.back());
        if (k == steps) break;
        for (int i = 0; i < spec.n; ++i) dB(i) = sdt * noise();
        domain_step(spec, x, dt, dB);
        domain_step(spec, xt, dt, dB);
    }
    out.tau_index = k;
    out.final_distance = (x - xt).norm();
    return out;
}

}  // namespace degdiff
