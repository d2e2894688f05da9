#include "degdiff/radial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "degdiff/ball_sde.hpp"
#include "degdiff/errors.hpp"
#include "degdiff/parallel.hpp"

namespace degdiff {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLn10 = 2.302585092994045684;

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

struct GaussNodes {
    std::array<double, 10> x{};
    std::array<double, 10> w{};
};

// 10-point Gauss-Legendre rule on [-1, 1].
const GaussNodes& gauss10() {
    static const GaussNodes nodes = [] {
        using rule = boost::math::quadrature::gauss<double, 10>;
        GaussNodes g;
        const auto& ab = rule::abscissa();
        const auto& wt = rule::weights();
        for (std::size_t i = 0; i < ab.size(); ++i) {
            g.x[2 * i] = -ab[i];
            g.x[2 * i + 1] = ab[i];
            g.w[2 * i] = wt[i];
            g.w[2 * i + 1] = wt[i];
        }
        return g;
    }();
    return nodes;
}

// Geometric tail bookkeeping for a positive integral accumulated in decade
// blocks of t = -ln v.
class TailTracker {
public:
    explicit TailTracker(double cap) : log_cap_(std::log(cap)) {}

    bool decided() const noexcept { return decided_; }
    bool divergent() const noexcept { return divergent_; }
    double value() const noexcept { return value_; }
    double tail_error() const noexcept { return tail_error_; }

    void close_block(double log_block) {
        if (decided_) return;
        blocks_.push_back(log_block);
        log_partial_ = log_add(log_partial_, log_block);
        if (log_partial_ > log_cap_) return diverge();
        const std::size_t nb = blocks_.size();
        if (nb < 3) return;
        const double partial = std::exp(log_partial_);
        if (log_block == kNegInf || log_block - log_partial_ < std::log(1e-17)) return converge(partial, 0.0, 0.0);
        const double q1 = std::exp(log_block - blocks_[nb - 2]);
        const double q0 = std::exp(blocks_[nb - 2] - blocks_[nb - 3]);
        const double var = std::abs(q1 - q0);
        if (q1 >= 1.0) {
            if (var <= 1e-3 * q1) diverge();
            return;
        }
        const double tail = std::exp(log_block) * q1 / (1.0 - q1);
        if (std::log(partial + tail) > log_cap_) {
            if (var <= 1e-3 * q1) diverge();
            return;
        }
        const double err = tail * var / (1.0 - q1);
        if (var <= 1e-3 * q1 && err <= 1e-10 * (partial + tail)) converge(partial + tail, err, tail);
    }

private:
    void diverge() {
        decided_ = true;
        divergent_ = true;
        value_ = std::numeric_limits<double>::infinity();
    }
    void converge(double v, double err, double /*tail*/) {
        decided_ = true;
        value_ = v;
        tail_error_ = err;
    }

    double log_cap_;
    std::vector<double> blocks_;
    double log_partial_ = kNegInf;
    bool decided_ = false;
    bool divergent_ = false;
    double value_ = 0.0;
    double tail_error_ = 0.0;
};

struct PassResult {
    FellerIntegral attainability;
    FellerIntegral entrance;
};

// One sweep toward v = 0 in t = -ln v. With L = log s' (L(t_ref) = 0),
// lambda = log(2/sigma^2), the integrands are
//   attainability: e^{-t} Q(t),        Q = M e^{L}
//   entrance:      e^{lambda - t} R(t), R = S e^{-L}
// so only differences of L inside one panel ever appear. Panels are capped so
// |dL| stays O(1), which resolves the boundary layers of the stiff case r > 1/2.
class FellerPass {
public:
    FellerPass(const RadialModel& model, const FellerOptions& opt, double h_max, double dl_max)
        : m_(model), opt_(opt), h_max_(h_max), dl_max_(dl_max) {
        const double ref = opt.reference_point;
        for (const CoeffFn* f : {&model.gamma, &model.g})
            for (double k : f->kinks())
                if (k > 0.0 && k < ref) kinks_.push_back(-std::log(k));
        std::sort(kinks_.begin(), kinks_.end());
    }

    PassResult run() {
        const double t0 = -std::log(opt_.reference_point);
        constexpr double t_max = 700.0;
        TailTracker sigma(opt_.divergence_cap), entrance(opt_.divergence_cap);
        double lq = kNegInf, lr = kNegInf;
        double block_sigma = kNegInf, block_entrance = kNegInf;
        double t = t0;
        double block_end = t0 + kLn10;
        std::size_t kink_idx = 0;
        std::size_t panels = 0;
        while (t < t_max && panels < opt_.max_panels && !(sigma.decided() && entrance.decided())) {
            while (kink_idx < kinks_.size() && kinks_[kink_idx] <= t) ++kink_idx;
            double stop = std::min(block_end, t_max);
            if (kink_idx < kinks_.size()) stop = std::min(stop, kinks_[kink_idx]);
            double h = std::min(h_max_, stop - t);
            for (int it = 0; it < 60; ++it) {
                const double pm = std::max(std::abs(phi(t)), std::abs(phi(t + h)));
                if (pm * h <= dl_max_) break;
                h = 0.9 * dl_max_ / pm;
            }
            const double b = (t + h >= stop) ? stop : t + h;
            panel(t, b, lq, lr, block_sigma, block_entrance);
            ++panels;
            t = b;
            if (t >= block_end) {
                sigma.close_block(block_sigma);
                entrance.close_block(block_entrance);
                block_sigma = block_entrance = kNegInf;
                block_end += kLn10;
            }
        }
        const double depth = std::exp(-t);
        return {finish(sigma, depth), finish(entrance, depth)};
    }

private:
    static FellerIntegral finish(const TailTracker& tr, double depth) {
        FellerIntegral out;
        out.decided = tr.decided();
        out.divergent = tr.divergent();
        out.value = tr.decided() ? tr.value() : std::numeric_limits<double>::quiet_NaN();
        out.tail_error = tr.tail_error();
        out.truncation_depth = depth;
        return out;
    }

    // d/dt log s'(v(t)) = v F(v), F = 2b/sigma^2.
    double phi(double t) const {
        const double v = std::exp(-t);
        const double gam = m_.gamma(v);
        return m_.g(v) / (gam * gam) * std::exp(-(1.0 - 2.0 * m_.r) * t) - m_.n * v / (2.0 * (1.0 - v));
    }

    // log(2 / sigma^2(v(t))).
    double lambda(double t) const {
        const double v = std::exp(-t);
        return -std::log(2.0) + 2.0 * m_.r * t - 2.0 * std::log(m_.gamma(v)) - std::log1p(-v);
    }

    // Degree-9 Legendre interpolants of phi and lambda on one panel, built from
    // the Gauss nodes. dL(x) integrates the phi interpolant from the left end.
    struct PanelFit {
        std::array<double, 10> phi_c{};
        std::array<double, 10> lam_c{};
        double half = 0.0;

        static void legendre(double x, std::array<double, 12>& P) {
            P[0] = 1.0;
            P[1] = x;
            for (int k = 1; k < 11; ++k) P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1);
        }
        // Returns dL and lambda at local coordinate x in [-1, 1].
        void eval(double x, double& dl, double& lam) const {
            std::array<double, 12> P{};
            legendre(x, P);
            double acc = phi_c[0] * (x + 1.0);
            lam = lam_c[0];
            for (int k = 1; k < 10; ++k) {
                acc += phi_c[k] * (P[k + 1] - P[k - 1]) / (2 * k + 1);
                lam += lam_c[k] * P[k];
            }
            dl = half * acc;
        }
    };

    PanelFit fit(double a, double b) const {
        const auto& g = gauss10();
        PanelFit f;
        f.half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        std::array<double, 12> P{};
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            const double t = mid + f.half * g.x[i];
            const double ph = phi(t), la = lambda(t);
            PanelFit::legendre(g.x[i], P);
            for (int k = 0; k < 10; ++k) {
                f.phi_c[k] += g.w[i] * ph * P[k];
                f.lam_c[k] += g.w[i] * la * P[k];
            }
        }
        for (int k = 0; k < 10; ++k) {
            f.phi_c[k] *= 0.5 * (2 * k + 1);
            f.lam_c[k] *= 0.5 * (2 * k + 1);
        }
        return f;
    }

    // qhat(t) = int_a^t exp(lambda(s)-lambda(a) - (s-a) + dL(t) - dL(s)) ds
    // rhat(t) = int_a^t exp(dL(s) - dL(t) - (s-a)) ds
    static void inner(const PanelFit& f, double xt, double dl_t, double lam_a, double& qhat, double& rhat) {
        const auto& g = gauss10();
        const double half = 0.5 * (xt + 1.0), mid = 0.5 * (xt - 1.0);
        double qs = 0.0, rs = 0.0;
        for (std::size_t j = 0; j < g.x.size(); ++j) {
            const double xs = mid + half * g.x[j];
            double dl_s = 0.0, lam_s = 0.0;
            f.eval(xs, dl_s, lam_s);
            const double ds = f.half * (xs + 1.0);
            qs += g.w[j] * std::exp(lam_s - lam_a - ds + dl_t - dl_s);
            rs += g.w[j] * std::exp(dl_s - dl_t - ds);
        }
        qhat = f.half * half * qs;
        rhat = f.half * half * rs;
    }

    void panel(double a, double b, double& lq, double& lr, double& block_sigma, double& block_entrance) const {
        const auto& g = gauss10();
        const PanelFit f = fit(a, b);
        double dl0 = 0.0, lam_a = 0.0;
        f.eval(-1.0, dl0, lam_a);
        double i1s = 0.0, i2s = 0.0, i1n = 0.0, i2n = 0.0;
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            double dl = 0.0, lam = 0.0;
            f.eval(g.x[i], dl, lam);
            double qhat = 0.0, rhat = 0.0;
            inner(f, g.x[i], dl, lam_a, qhat, rhat);
            const double decay = std::exp(-f.half * (g.x[i] + 1.0));
            const double lam_rel = std::exp(lam - lam_a);
            i1s += g.w[i] * decay * std::exp(dl);
            i2s += g.w[i] * decay * qhat;
            i1n += g.w[i] * lam_rel * decay * std::exp(-dl);
            i2n += g.w[i] * lam_rel * decay * rhat;
        }
        i1s *= f.half;
        i2s *= f.half;
        i1n *= f.half;
        i2n *= f.half;
        const double panel_sigma = log_add(lq - a + std::log(i1s), lam_a - 2.0 * a + std::log(i2s));
        const double panel_entrance = log_add(lam_a - a + lr + std::log(i1n), lam_a - 2.0 * a + std::log(i2n));
        block_sigma = log_add(block_sigma, panel_sigma);
        block_entrance = log_add(block_entrance, panel_entrance);

        double dl_b = 0.0, lam_b = 0.0;
        f.eval(1.0, dl_b, lam_b);
        double qhat_b = 0.0, rhat_b = 0.0;
        inner(f, 1.0, dl_b, lam_a, qhat_b, rhat_b);
        lq = log_add(lq + dl_b, lam_a - a + std::log(qhat_b));
        lr = log_add(lr - dl_b, -a + std::log(rhat_b));
    }

    const RadialModel& m_;
    const FellerOptions& opt_;
    double h_max_;
    double dl_max_;
    std::vector<double> kinks_;
};

}  // namespace

void RadialModel::validate() const {
    if (n < 2) throw ModelError("dimension n must be >= 2");
    if (!(r > 0.0 && r <= 1.0)) throw ModelError("diffusion exponent r must lie in (0,1]");
}

double RadialModel::drift(double v) const {
    const double gam = gamma(v);
    return 2.0 * g(v) * (1.0 - v) - n * std::pow(v, 2.0 * r) * gam * gam;
}

double RadialModel::diffusion_sq(double v) const {
    const double gam = gamma(v);
    return 4.0 * std::pow(v, 2.0 * r) * gam * gam * (1.0 - v);
}

RadialModel RadialModel::from_ball(const BallModel& model) {
    if (model.argument == CoeffArgument::Radius && !(model.gamma.is_constant() && model.g.is_constant()))
        throw ModelError("radial companion needs coefficients read at 1-|x|^2 or constant coefficients");
    return RadialModel{model.n, model.r, model.gamma, model.g};
}

BallModel RadialModel::to_ball() const { return BallModel{n, r, gamma, g, CoeffArgument::Radial}; }

ScaleDensity scale_density(const RadialModel& model, double v) {
    model.validate();
    if (!(model.r < 0.5)) throw ClassificationOnlyError("scale function from 0 requires r < 1/2");
    if (!(v >= 0.0 && v < 1.0)) throw DomainError(fmt::format("scale_prime: v={} outside [0,1)", v));
    if (v == 0.0) return {1.0, 0.0, 0.0};

    // w = tau^{1/(1-2r)} removes the w^{-2r} endpoint singularity.
    const double k = 1.0 / (1.0 - 2.0 * model.r);
    auto integrand = [&](double tau) {
        const double w = std::pow(tau, k);
        const double gam = model.gamma(w);
        return k * (model.g(w) / (gam * gam) - model.n * std::pow(w, 2.0 * model.r) / (2.0 * (1.0 - w)));
    };
    std::vector<double> cuts{0.0};
    for (const CoeffFn* f : {&model.gamma, &model.g})
        for (double knot : f->kinks())
            if (knot < v) cuts.push_back(std::pow(knot, 1.0 - 2.0 * model.r));
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(std::pow(v, 1.0 - 2.0 * model.r));

    using rule = boost::math::quadrature::gauss_kronrod<double, 31>;
    double total = 0.0, err_total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        double err = 0.0;
        total += rule::integrate(integrand, cuts[i], cuts[i + 1], 15, 1e-13, &err);
        err_total += err;
    }
    if (!std::isfinite(total)) throw DomainError("scale_prime: integral does not converge at this v");
    return {std::exp(-total), -total, err_total};
}

double scale_prime(const RadialModel& model, double v) { return scale_density(model, v).value; }

std::string to_string(BoundaryVerdict v) {
    switch (v) {
        case BoundaryVerdict::Regular:
            return "regular";
        case BoundaryVerdict::Exit:
            return "exit";
        case BoundaryVerdict::Entrance:
            return "entrance";
        case BoundaryVerdict::Natural:
            return "natural";
        case BoundaryVerdict::Inconclusive:
            return "inconclusive";
    }
    return "inconclusive";
}

std::string BoundaryClassification::to_json() const {
    auto integral = [](const FellerIntegral& f) {
        nlohmann::json j;
        j["decided"] = f.decided;
        j["divergent"] = f.divergent;
        j["value"] = (f.decided && !f.divergent) ? nlohmann::json(f.value) : nlohmann::json(nullptr);
        j["quadrature_error"] = f.quadrature_error;
        j["tail_error"] = f.tail_error;
        j["truncation_depth"] = f.truncation_depth;
        return j;
    };
    nlohmann::json j;
    j["verdict"] = to_string(verdict);
    j["attainable"] = attainable();
    j["integral_attainability"] = integral(attainability);
    j["integral_entrance"] = integral(entrance);
    j["reference_point"] = reference_point;
    j["refinement_levels"] = refinement_levels;
    return j.dump(2);
}

BoundaryClassification classify_boundary(const RadialModel& model, const FellerOptions& options) {
    model.validate();
    if (!(options.reference_point > 0.0 && options.reference_point < 1.0))
        throw DomainError("reference point must lie in (0,1)");

    BoundaryClassification out;
    out.reference_point = options.reference_point;

    auto settle = [&](const FellerIntegral& prev, FellerIntegral cur) {
        if (!prev.decided || !cur.decided || prev.divergent != cur.divergent) {
            cur.decided = false;
            return cur;
        }
        if (!cur.divergent) cur.quadrature_error = std::abs(cur.value - prev.value);
        return cur;
    };
    auto within_tol = [&](const FellerIntegral& f) {
        return f.decided && (f.divergent || f.quadrature_error <= options.tolerance * std::abs(f.value));
    };

    PassResult prev = FellerPass(model, options, kLn10 / 8.0, 4.0).run();
    PassResult cur = prev;
    int level = 1;
    for (; level <= options.max_levels; ++level) {
        const double scale = std::ldexp(1.0, -level);
        PassResult next = FellerPass(model, options, kLn10 / 8.0 * scale, 4.0 * scale).run();
        cur.attainability = settle(prev.attainability, next.attainability);
        cur.entrance = settle(prev.entrance, next.entrance);
        prev = next;
        const bool undecided = !prev.attainability.decided || !prev.entrance.decided;
        if (undecided || (within_tol(cur.attainability) && within_tol(cur.entrance))) break;
    }
    out.refinement_levels = std::min(level, options.max_levels) + 1;
    out.attainability = cur.attainability;
    out.entrance = cur.entrance;

    if (!within_tol(out.attainability) || !within_tol(out.entrance)) {
        out.verdict = BoundaryVerdict::Inconclusive;
        return out;
    }
    const bool sigma_finite = !out.attainability.divergent;
    const bool entrance_finite = !out.entrance.divergent;
    if (sigma_finite)
        out.verdict = entrance_finite ? BoundaryVerdict::Regular : BoundaryVerdict::Exit;
    else
        out.verdict = entrance_finite ? BoundaryVerdict::Entrance : BoundaryVerdict::Natural;
    return out;
}

double radial_step(const RadialModel& model, double v, double dt, double dW) {
    constexpr double kUpper = 1.0 - 1e-12;
    v = std::clamp(v, 0.0, kUpper);
    const double gam = model.gamma(v);
    const double vr = radial_power(v, model.r);
    const double next = v + (2.0 * model.g(v) * (1.0 - v) - model.n * vr * vr * gam * gam) * dt -
                        2.0 * vr * gam * std::sqrt(1.0 - v) * dW;
    if (!std::isfinite(next)) throw NumericError("non-finite radial state");
    return std::clamp(next, 0.0, kUpper);
}

std::vector<double> simulate_radial(const RadialModel& model, double v0, double T, double dt, std::uint64_t seed) {
    model.validate();
    if (!(v0 >= 0.0 && v0 < 1.0)) throw DomainError("v0 must lie in [0,1)");
    GaussianStream noise(seed);
    return simulate_radial_with(model, v0, step_count(T, dt), dt, noise);
}

double epsilon_for_p(const RadialModel& model, double p) {
    auto margin = [&](double v) {
        const double gam = model.gamma(v);
        return p - 1.0 + model.g(v) / (gam * gam);
    };
    if (!(margin(0.0) > 0.0)) throw InfeasibleError(fmt::format("p={} does not exceed 1 - g/gamma^2 at v=0", p));
    std::vector<double> kinks = model.gamma.kinks();
    for (double k : model.g.kinks()) kinks.push_back(k);
    return feasible_shell_depth(margin, kinks);
}

double yp_drift_formula(const RadialModel& model, double p, double v) {
    const double gam2 = std::pow(model.gamma(v), 2);
    return 2.0 * p * (1.0 - v) * std::pow(v, p - 1.0) * (model.g(v) + (p - 1.0) * gam2) -
           model.n * p * gam2 * std::pow(v, p);
}

DriftReport verify_drift_of_Yp(const RadialModel& model, double p, double v, double dt, std::size_t replicas,
                               std::uint64_t seed) {
    model.validate();
    if (model.r != 0.5) throw InfeasibleError("the Y^p drift identity is stated for r = 1/2");
    if (!(p > 0.5 && p < 1.0)) throw InfeasibleError("p must lie in (1/2, 1)");
    const double eps = epsilon_for_p(model, p);
    if (!(v > 0.0 && v < eps)) throw InfeasibleError(fmt::format("v={} outside (0, eps(p)={})", v, eps));
    if (!(dt > 0.0) || replicas < 2) throw DomainError("need dt > 0 and at least two replicas");

    const BallModel ball = model.to_ball();
    constexpr std::size_t kChunk = 1 << 14;
    const std::size_t chunks = (replicas + kChunk - 1) / kChunk;
    struct Partial {
        std::size_t count = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::vector<Partial> parts(chunks);
    const double vp = std::pow(v, p);
    parallel_for(chunks, 0, [&](std::size_t c) {
        GaussianStream noise(derive_seed(seed, {hash_tag("drift-yp"), c}));
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.n);
        x0(model.n - 1) = std::sqrt(1.0 - v);
        Eigen::VectorXd x(model.n), dB(model.n);
        const double sdt = std::sqrt(dt);
        Partial& part = parts[c];
        const std::size_t lo = c * kChunk, hi = std::min(replicas, lo + kChunk);
        for (std::size_t i = lo; i < hi; ++i) {
            x = x0;
            for (int j = 0; j < model.n; ++j) dB(j) = sdt * noise();
            step_in_place(ball, x, dt, dB);
            const double sample = (std::pow(radial_value(x), p) - vp) / dt;
            ++part.count;
            const double delta = sample - part.mean;
            part.mean += delta / static_cast<double>(part.count);
            part.m2 += delta * (sample - part.mean);
        }
    });
    Partial total;
    for (const Partial& part : parts) {
        if (part.count == 0) continue;
        const double n_new = static_cast<double>(total.count + part.count);
        const double delta = part.mean - total.mean;
        total.mean += delta * static_cast<double>(part.count) / n_new;
        total.m2 += part.m2 + delta * delta * static_cast<double>(total.count) * static_cast<double>(part.count) / n_new;
        total.count += part.count;
    }
    DriftReport rep;
    rep.replicas = total.count;
    rep.epsilon = eps;
    rep.empirical = total.mean;
    rep.formula = yp_drift_formula(model, p, v);
    const double var = total.m2 / static_cast<double>(total.count - 1);
    rep.std_error = std::sqrt(var / static_cast<double>(total.count));
    rep.z = (rep.empirical - rep.formula) / rep.std_error;
    return rep;
}

}  // namespace degdiff
