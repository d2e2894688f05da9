#include "degdiff/inequalities.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "degdiff/errors.hpp"
#include "degdiff/rng.hpp"

namespace degdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// 1 - w^a given lw = log w, accurate when w is close to 1.
double one_minus_pow(double a, double lw) { return -std::expm1(a * lw); }

void require_p(double p) {
    if (!(p > 0.5 && p < 1.0)) throw DomainError("p must lie in (1/2, 1)");
}

void require_q(double q) {
    if (!(q > 1.0 && q < 2.0)) throw DomainError("q must lie in (1, 2)");
}

// (x^a - y^a) evaluated as x^a (1 - (y/x)^a) so the difference keeps full
// relative accuracy when y is close to x.
double pow_difference(double x, double y, double a) {
    const double l = std::log1p((y - x) / x);
    return std::pow(x, a) * one_minus_pow(a, l);
}

// Z = (x^p - y^p)(y^{p-1} - x^{p-1}) >= 0.
double z_product(double x, double y, double p) {
    return pow_difference(x, y, p) * (-pow_difference(x, y, p - 1.0));
}

double golden_max(const std::function<double(double)>& h, double lo, double hi, double& arg) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = h(c), fd = h(d);
    for (int it = 0; it < 120 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = h(d);
        }
    }
    if (fc > fd) {
        arg = c;
        return fc;
    }
    arg = d;
    return fd;
}

}  // namespace

InequalityPair lemmaA1_check(double x, double y, double p) {
    require_p(p);
    if (!(x > 0.0 && y > 0.0)) throw DomainError("lemmaA1_check needs x, y > 0");
    const double d = pow_difference(x, y, p - 0.5);
    const double k = (2.0 * p - 1.0) * (2.0 * p - 1.0) / (4.0 * p * (1.0 - p));
    return {d * d, k * z_product(x, y, p)};
}

std::string SupremumReport::to_json() const {
    nlohmann::json j;
    j["claimed"] = std::isnan(claimed) ? nlohmann::json(nullptr) : nlohmann::json(claimed);
    j["estimate"] = estimate;
    j["grid_estimate"] = grid_estimate;
    j["argmax"] = argmax;
    j["at_limit"] = at_limit;
    j["levels"] = levels;
    j["level_estimates"] = level_estimates;
    j["tolerance"] = tolerance;
    j["passed"] = passed;
    j["violation_location"] = violation_location < 0.0 ? nlohmann::json(nullptr) : nlohmann::json(violation_location);
    return j.dump();
}

SupremumReport grid_supremum(const std::function<double(double)>& h, double limit_at_0, double limit_at_1,
                             int levels) {
    if (levels < 1) throw DomainError("grid_supremum needs at least one level");
    SupremumReport rep;
    rep.claimed = kNaN;
    rep.levels = levels;
    double best = kNegInf, arg = 0.5;
    auto visit = [&](double z) {
        if (!(z > 0.0 && z < 1.0)) return;
        const double v = h(z);
        if (v > best) {
            best = v;
            arg = z;
        }
    };
    for (int level = 0; level < levels; ++level) {
        const int m = 1000 << level;
        for (int i = 1; i < m; ++i) visit(static_cast<double>(i) / m);
        const int decades = 8 + 2 * level;
        for (int j = 1; j <= 16 * decades; ++j) {
            const double d = std::pow(10.0, -j / 16.0);
            visit(d);
            visit(1.0 - d);
        }
        const double width = std::min(1.0 / m, 0.15 * std::min(arg, 1.0 - arg));
        if (width > 0.0) {
            double polished_arg = arg;
            const double lo = std::max(arg - width, 0.5 * arg);
            const double hi = std::min(arg + width, arg + 0.5 * (1.0 - arg));
            const double v = golden_max(h, lo, hi, polished_arg);
            if (v > best) {
                best = v;
                arg = polished_arg;
            }
        }
        rep.level_estimates.push_back(best);
    }
    rep.grid_estimate = best;
    rep.estimate = best;
    rep.argmax = arg;
    if (limit_at_0 >= rep.estimate) {
        rep.estimate = limit_at_0;
        rep.argmax = 0.0;
        rep.at_limit = true;
    }
    if (limit_at_1 >= rep.estimate) {
        rep.estimate = limit_at_1;
        rep.argmax = 1.0;
        rep.at_limit = true;
    }
    return rep;
}

double a1_function(double q, double z) {
    const double lz = std::log(z);
    const double t = one_minus_pow(q - 1.0, lz);
    return std::exp((2.0 - q) * lz) * t * t / (one_minus_pow(q, lz) * one_minus_pow(2.0 - q, lz));
}

SupremumReport a1_supremum(double q) {
    require_q(q);
    // No endpoint limit is injected: the grid alone must approach the claim.
    SupremumReport rep = grid_supremum([q](double z) { return a1_function(q, z); }, kNegInf, kNegInf);
    rep.claimed = (q - 1.0) * (q - 1.0) / (q * (2.0 - q));
    const bool below = rep.grid_estimate <= rep.claimed * (1.0 + 1e-12) + 1e-300;
    if (!below) rep.violation_location = rep.argmax;
    bool monotone = true;
    for (std::size_t i = 1; i < rep.level_estimates.size(); ++i)
        monotone = monotone && rep.level_estimates[i] >= rep.level_estimates[i - 1];
    rep.passed = below && monotone && rep.claimed - rep.grid_estimate <= rep.tolerance;
    return rep;
}

double a1_f(double q, double z) { return 1.0 / a1_function(q, z); }

double a1_f1(double q, double z) {
    const double lz = std::log(z);
    return q * (z - 1.0) - z * std::expm1(-q * lz);
}

double a1_f2(double q, double z) {
    const double lz = std::log(z);
    return -(q + 1.0) * (2.0 - q) * std::expm1(q * lz) - q * (q - 1.0) * std::expm1((q - 1.0) * lz) +
           q * (3.0 - q) * (z - 1.0);
}

double a1_f3(double q, double z) {
    const double lz = std::log(z);
    return -(q + 1.0) * (2.0 - q) * std::expm1(2.0 * lz) - 2.0 * q * (q - 1.0) * (z - 1.0) +
           2.0 * q * std::expm1((3.0 - q) * lz) - 2.0 * (q - 1.0) * std::expm1((2.0 - q) * lz);
}

double a1_f4(double q, double z) {
    const double lz = std::log(z);
    return -(2.0 - q) * std::expm1((q + 1.0) * lz) - 2.0 * (q - 1.0) * std::expm1(q * lz) +
           q * std::expm1((q - 1.0) * lz) + q * std::expm1(2.0 * lz) - 2.0 * (q - 1.0) * (z - 1.0);
}

MonotoneReport f_monotone_check(double q, std::size_t grid) {
    require_q(q);
    if (grid < 2) throw DomainError("grid needs at least two points");
    MonotoneReport rep;
    rep.q = q;
    rep.grid = grid;
    rep.limit_claimed = q * (2.0 - q) / ((q - 1.0) * (q - 1.0));
    double prev = 0.0;
    for (std::size_t i = 1; i <= grid; ++i) {
        const double z = static_cast<double>(i) / static_cast<double>(grid + 1);
        const double f = a1_f(q, z);
        if (i > 1) {
            const double inc = f - prev;
            if (inc > rep.worst_increase || i == 2) {
                rep.worst_increase = inc;
                rep.worst_location = z;
            }
            if (inc > 1e-12 * std::max(1.0, std::abs(prev))) rep.decreasing = false;
        }
        if (f < rep.limit_claimed * (1.0 - 1e-12)) rep.above_limit = false;
        prev = f;
    }
    rep.limit_numeric = a1_f(q, 1.0 - 1e-9);
    rep.limit_ok = std::abs(rep.limit_numeric - rep.limit_claimed) <= 1e-6 * rep.limit_claimed;
    rep.passed = rep.decreasing && rep.limit_ok && rep.above_limit;
    return rep;
}

namespace {

// Fourth-order central difference.
template <class F>
double central_difference(F&& f, double z, double h) {
    return (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h);
}

// Sums of absolute monomials; they set the rounding floor of each function.
double f2_scale(double q, double z) {
    return (q + 1.0) * (2.0 - q) * std::pow(z, q) + q * (q - 1.0) * std::pow(z, q - 1.0) + q * (3.0 - q) * z +
           (q - 1.0) * (2.0 - q);
}
double f3_scale(double q, double z) {
    return (q + 1.0) * (2.0 - q) * z * z + 2.0 * q * (q - 1.0) * z + q * (q - 1.0) + 2.0 * q * std::pow(z, 3.0 - q) +
           2.0 * (q - 1.0) * std::pow(z, 2.0 - q);
}
double f4_scale(double q, double z) {
    return (2.0 - q) * std::pow(z, q + 1.0) + 2.0 * (q - 1.0) * std::pow(z, q) + q * std::pow(z, q - 1.0) +
           q * z * z + 2.0 * (q - 1.0) * z + (2.0 - q);
}

}  // namespace

SignChainReport f_chain_signs(double q, std::size_t grid) {
    require_q(q);
    if (grid < 2) throw DomainError("grid needs at least two points");
    SignChainReport rep;
    rep.q = q;
    rep.grid = grid;
    rep.worst_sign_margin = std::numeric_limits<double>::infinity();
    auto fail = [&](const std::string& what) {
        if (rep.first_failure.empty()) rep.first_failure = what;
    };

    rep.endpoints_ok = a1_f1(q, 1.0) == 0.0 && a1_f2(q, 1.0) == 0.0 && a1_f3(q, 1.0) == 0.0 && a1_f4(q, 1.0) == 0.0;
    if (!rep.endpoints_ok) fail("f_i(1) != 0");

    auto coupling = [&](double fd, double an, double scale, const char* name, double z) {
        const double err = std::abs(fd - an) / (std::abs(an) + 1e-6 * scale);
        rep.worst_coupling_error = std::max(rep.worst_coupling_error, err);
        if (!(err <= 1e-5)) {
            rep.couplings_ok = false;
            fail(std::string(name) + " coupling at z=" + std::to_string(z));
        }
    };

    for (std::size_t i = 1; i <= grid; ++i) {
        const double z = static_cast<double>(i) / static_cast<double>(grid);
        const double v1 = a1_f1(q, z), v2 = a1_f2(q, z), v3 = a1_f3(q, z), v4 = a1_f4(q, z);
        const double margin = std::min({-v1, -v2, v3, -v4});
        rep.worst_sign_margin = std::min(rep.worst_sign_margin, margin);
        if (margin < -kPointwiseSlack) {
            rep.signs_ok = false;
            fail("sign condition at z=" + std::to_string(z));
        }
        const double f1p = q + 1.0 + (q - 1.0) * std::pow(z, -q);
        if (!(f1p > 0.0)) {
            rep.signs_ok = false;
            fail("f1' <= 0 at z=" + std::to_string(z));
        }

        const double h = 1e-3 * z;
        coupling(central_difference([q](double s) { return a1_f1(q, s); }, z, h), f1p,
                 q + 1.0 + (q - 1.0) * std::pow(z, -q), "f1'", z);
        const double w3 = 2.0 * std::pow(z, 1.0 - q);
        coupling(central_difference([q](double s) { return a1_f3(q, s); }, z, h), w3 * v2, w3 * f2_scale(q, z),
                 "f3'", z);
        const double w4 = std::pow(z, q - 2.0);
        coupling(central_difference([q](double s) { return a1_f4(q, s); }, z, h), w4 * v3, w4 * f3_scale(q, z),
                 "f4'", z);
        if (z <= 0.999) {
            const double denom = std::pow(z, 3.0 - q) * std::pow(one_minus_pow(q - 1.0, std::log(z)), 3);
            const double hf = 1e-3 * std::min(z, 1.0 - z);
            coupling(central_difference([q](double s) { return a1_f(q, s); }, z, hf), v4 / denom,
                     f4_scale(q, z) / denom, "f'", z);
        }
    }
    rep.passed = rep.signs_ok && rep.endpoints_ok && rep.couplings_ok;
    return rep;
}

namespace {

double lemma33_function(double p, double w) {
    const double lw = std::log(w);
    return one_minus_pow(p - 0.5, lw) * (1.0 - w) / (one_minus_pow(p, lw) * one_minus_pow(1.0 - p, lw));
}

SupremumReport lemma33_supremum_levels(double p, int levels) {
    require_p(p);
    return grid_supremum([p](double w) { return lemma33_function(p, w); }, 1.0, (p - 0.5) / (p * (1.0 - p)), levels);
}

}  // namespace

SupremumReport lemma33_supremum(double p) { return lemma33_supremum_levels(p, 4); }

double lemma33_constant(double p) { return lemma33_supremum(p).estimate; }

InequalityPair lemma33_check(double x, double y, double p, double C) {
    require_p(p);
    if (!(x > 0.0 && y > 0.0)) throw DomainError("lemma33_check needs x, y > 0");
    const double lhs = std::abs(pow_difference(x, y, p - 0.5)) * std::abs(x - y);
    const double m = std::max(std::sqrt(x) * std::pow(y, 1.0 - p), std::sqrt(y) * std::pow(x, 1.0 - p));
    return {lhs, C * m * z_product(x, y, p)};
}

InequalityPair lemma33_check(double x, double y, double p) { return lemma33_check(x, y, p, lemma33_constant(p)); }

SupremumReport lemma31_supremum(double p) {
    require_p(p);
    SupremumReport rep = grid_supremum(
        [p](double u) { return (1.0 - u) / one_minus_pow(1.0 - p, std::log(u)); }, 1.0, 1.0 / (1.0 - p));
    rep.claimed = 1.0 / (1.0 - p);
    rep.passed = rep.grid_estimate <= rep.claimed * (1.0 + 1e-12);
    if (!rep.passed) rep.violation_location = rep.argmax;
    return rep;
}

double lemma31_sup(double p) { return lemma31_supremum(p).estimate; }

SupremumReport lemma36_supremum(double p) {
    require_p(p);
    SupremumReport rep = grid_supremum(
        [p](double w) {
            const double lw = std::log(w);
            return (1.0 - w) * (1.0 - w) / (one_minus_pow(2.0 * p, lw) * one_minus_pow(2.0 - 2.0 * p, lw));
        },
        1.0, 1.0 / (4.0 * p * (1.0 - p)));
    rep.claimed = 1.0 / (4.0 * p * (1.0 - p));
    rep.passed = rep.grid_estimate <= rep.claimed * (1.0 + 1e-12);
    if (!rep.passed) rep.violation_location = rep.argmax;
    return rep;
}

double lemma36_sup(double p) { return lemma36_supremum(p).estimate; }

namespace {

template <class Check>
SampleCheckReport run_samples(std::string name, std::size_t samples, std::uint64_t seed, bool discrete_p,
                              Check&& check) {
    SampleCheckReport rep;
    rep.name = std::move(name);
    rep.samples = samples;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    std::mt19937_64 engine(derive_seed(seed, {hash_tag(rep.name)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = 1.0 - unit(engine);
        const double y = 1.0 - unit(engine);
        double p = 0.0;
        if (discrete_p) {
            const auto k = static_cast<std::size_t>(unit(engine) * 1000.0);
            p = 0.5 + 0.5 * (static_cast<double>(std::min<std::size_t>(k, 999)) + 0.5) / 1000.0;
        } else {
            do p = 0.5 + 0.5 * unit(engine);
            while (!(p > 0.5 && p < 1.0));
        }
        const InequalityPair r = check(x, y, p);
        const double margin = r.rhs - r.lhs;
        if (margin < rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_x = x;
            rep.worst_y = y;
            rep.worst_p = p;
        }
        if (!(r.lhs <= r.rhs + kPointwiseSlack)) ++rep.violations;
    }
    rep.passed = rep.violations == 0;
    return rep;
}

}  // namespace

SampleCheckReport sample_lemmaA1(std::size_t samples, std::uint64_t seed) {
    return run_samples("lemmaA1", samples, seed, false, [](double x, double y, double p) {
        return lemmaA1_check(x, y, p);
    });
}

SampleCheckReport sample_lemma33(std::size_t samples, std::uint64_t seed) {
    std::vector<double> table(1000, kNaN);
    return run_samples("lemma33", samples, seed, true, [&](double x, double y, double p) {
        const auto k = static_cast<std::size_t>(std::lround((p - 0.5) * 2000.0 - 0.5));
        if (std::isnan(table[k])) table[k] = lemma33_supremum_levels(p, 2).estimate;
        return lemma33_check(x, y, p, table[k]);
    });
}

InequalitySuiteReport verify_inequalities(const InequalitySuiteOptions& options) {
    nlohmann::json entries = nlohmann::json::array();
    bool all = true;
    auto add = [&](nlohmann::json e) {
        all = all && e["passed"].get<bool>();
        entries.push_back(std::move(e));
    };
    auto sample_entry = [](const SampleCheckReport& r) {
        return nlohmann::json{{"name", r.name},
                              {"passed", r.passed},
                              {"samples", r.samples},
                              {"violations", r.violations},
                              {"worst_margin", r.worst_margin},
                              {"worst_input", {r.worst_x, r.worst_y, r.worst_p}}};
    };

    add(sample_entry(sample_lemmaA1(options.samples, options.seed)));
    add(sample_entry(sample_lemma33(options.samples, options.seed)));

    const double p_star = 1.0 - std::sqrt(2.0) / 4.0;
    for (double q : {1.1, 1.5, 1.9, 2.0 * p_star}) {
        const SupremumReport s = a1_supremum(q);
        add({{"name", "a1_supremum"},
             {"q", q},
             {"passed", s.passed},
             {"samples", s.levels},
             {"claimed", s.claimed},
             {"estimate", s.grid_estimate},
             {"worst_margin", s.claimed - s.grid_estimate}});
    }

    std::vector<double> qs;
    for (int k = 1; k <= 19; ++k) qs.push_back(1.0 + 0.05 * k);
    {
        bool ok = true;
        double worst = 0.0;
        for (double q : qs) {
            const MonotoneReport m = f_monotone_check(q, options.grid);
            ok = ok && m.passed;
            worst = std::max(worst, m.worst_increase);
        }
        add({{"name", "f_monotone"},
             {"passed", ok},
             {"samples", qs.size() * options.grid},
             {"worst_margin", -worst}});
    }
    {
        bool ok = true;
        double worst = std::numeric_limits<double>::infinity(), coupling = 0.0;
        std::string failure;
        for (double q : qs) {
            const SignChainReport s = f_chain_signs(q, options.grid);
            ok = ok && s.passed;
            worst = std::min(worst, s.worst_sign_margin);
            coupling = std::max(coupling, s.worst_coupling_error);
            if (failure.empty()) failure = s.first_failure;
        }
        add({{"name", "f_chain_signs"},
             {"passed", ok},
             {"samples", qs.size() * options.grid},
             {"worst_margin", worst},
             {"worst_coupling_error", coupling},
             {"first_failure", failure}});
    }
    {
        // The three proof constants over p in [0.51, 0.99].
        bool ok = true;
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 49; ++k) {
            const double p = 0.51 + 0.01 * k;
            const SupremumReport s31 = lemma31_supremum(p);
            const SupremumReport s36 = lemma36_supremum(p);
            const double c33 = lemma33_constant(p);
            ok = ok && s31.passed && s36.passed && std::isfinite(c33) && std::isfinite(s31.estimate) &&
                 std::isfinite(s36.estimate);
            worst = std::min({worst, s31.claimed - s31.grid_estimate, s36.claimed - s36.grid_estimate});
        }
        add({{"name", "proof_constants"}, {"passed", ok}, {"samples", 49}, {"worst_margin", worst}});
    }

    InequalitySuiteReport rep;
    rep.passed = all;
    rep.json = nlohmann::json{{"passed", all}, {"entries", entries}}.dump(2);
    return rep;
}

}  // namespace degdiff
