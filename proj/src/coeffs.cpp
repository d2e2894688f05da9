#include "degdiff/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "degdiff/errors.hpp"

namespace degdiff {

CoeffFn CoeffFn::constant(double value) {
    CoeffFn f;
    f.kind_ = CoeffKind::Constant;
    f.a_ = value;
    f.validate();
    return f;
}

CoeffFn CoeffFn::affine(double intercept, double slope) {
    CoeffFn f;
    f.kind_ = CoeffKind::Affine;
    f.a_ = intercept;
    f.b_ = slope;
    f.validate();
    return f;
}

CoeffFn CoeffFn::table(std::vector<std::pair<double, double>> points) {
    CoeffFn f;
    f.kind_ = CoeffKind::Table;
    f.points_ = std::move(points);
    f.validate();
    return f;
}

void CoeffFn::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    switch (kind_) {
        case CoeffKind::Constant:
            if (!finite(a_) || a_ <= 0.0) throw ModelError("constant coefficient must be finite and > 0");
            break;
        case CoeffKind::Affine:
            if (!finite(a_) || !finite(b_)) throw ModelError("affine coefficient must be finite");
            if (std::min(a_, a_ + b_) <= 0.0) throw ModelError("affine coefficient must be > 0 on [0,1]");
            break;
        case CoeffKind::Table: {
            if (points_.size() < 2) throw ModelError("table needs at least two breakpoints");
            if (points_.front().first != 0.0 || points_.back().first != 1.0)
                throw ModelError("table breakpoints must cover 0 and 1");
            for (std::size_t i = 0; i < points_.size(); ++i) {
                const auto& [u, v] = points_[i];
                if (!finite(u) || !finite(v)) throw ModelError("table entries must be finite");
                if (v <= 0.0) throw ModelError("table values must be > 0");
                if (i > 0 && !(u > points_[i - 1].first))
                    throw ModelError("table breakpoints must be strictly increasing");
            }
            break;
        }
    }
}

bool CoeffFn::is_constant() const noexcept {
    if (kind_ == CoeffKind::Constant) return true;
    if (kind_ == CoeffKind::Affine) return b_ == 0.0;
    return std::all_of(points_.begin(), points_.end(),
                       [&](const auto& pt) { return pt.second == points_.front().second; });
}

double CoeffFn::operator()(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError(fmt::format("coefficient argument {} outside [0,1]", u));
    switch (kind_) {
        case CoeffKind::Constant:
            return a_;
        case CoeffKind::Affine:
            return a_ + b_ * u;
        case CoeffKind::Table: {
            auto it = std::upper_bound(points_.begin(), points_.end(), u,
                                       [](double x, const auto& pt) { return x < pt.first; });
            if (it == points_.end()) return points_.back().second;
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            if (u == lo.first) return lo.second;
            const double t = (u - lo.first) / (hi.first - lo.first);
            return lo.second + t * (hi.second - lo.second);
        }
    }
    return a_;
}

double CoeffFn::lipschitz() const noexcept {
    switch (kind_) {
        case CoeffKind::Constant:
            return 0.0;
        case CoeffKind::Affine:
            return std::abs(b_);
        case CoeffKind::Table: {
            double L = 0.0;
            for (std::size_t i = 1; i < points_.size(); ++i) {
                const double slope = (points_[i].second - points_[i - 1].second) /
                                     (points_[i].first - points_[i - 1].first);
                L = std::max(L, std::abs(slope));
            }
            return L;
        }
    }
    return 0.0;
}

double CoeffFn::min_value() const noexcept {
    switch (kind_) {
        case CoeffKind::Constant:
            return a_;
        case CoeffKind::Affine:
            return std::min(a_, a_ + b_);
        case CoeffKind::Table:
            return std::min_element(points_.begin(), points_.end(),
                                    [](const auto& x, const auto& y) { return x.second < y.second; })
                ->second;
    }
    return a_;
}

double CoeffFn::max_value() const noexcept {
    switch (kind_) {
        case CoeffKind::Constant:
            return a_;
        case CoeffKind::Affine:
            return std::max(a_, a_ + b_);
        case CoeffKind::Table:
            return std::max_element(points_.begin(), points_.end(),
                                    [](const auto& x, const auto& y) { return x.second < y.second; })
                ->second;
    }
    return a_;
}

std::vector<double> CoeffFn::kinks() const {
    std::vector<double> out;
    if (kind_ == CoeffKind::Table)
        for (std::size_t i = 1; i + 1 < points_.size(); ++i) out.push_back(points_[i].first);
    return out;
}

std::string CoeffFn::to_string() const {
    switch (kind_) {
        case CoeffKind::Constant:
            return fmt::format("constant {:.17g}", a_);
        case CoeffKind::Affine:
            return fmt::format("affine {:.17g} {:.17g}", a_, b_);
        case CoeffKind::Table: {
            std::string s = "table";
            for (const auto& [u, v] : points_) s += fmt::format(" {:.17g}:{:.17g}", u, v);
            return s;
        }
    }
    return {};
}

CoeffFn CoeffFn::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string tag;
    in >> tag;
    auto number = [](const std::string& tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw ModelError("bad number '" + tok + "' in coefficient");
        }
        if (used != tok.size()) throw ModelError("bad number '" + tok + "' in coefficient");
        return v;
    };
    std::vector<std::string> tokens;
    for (std::string tok; in >> tok;) tokens.push_back(tok);

    if (tag == "constant") {
        if (tokens.size() != 1) throw ModelError("constant takes one value");
        return constant(number(tokens[0]));
    }
    if (tag == "affine") {
        if (tokens.size() != 2) throw ModelError("affine takes intercept and slope");
        return affine(number(tokens[0]), number(tokens[1]));
    }
    if (tag == "table") {
        std::vector<std::pair<double, double>> pts;
        for (const auto& tok : tokens) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos) throw ModelError("table entries are u:value pairs, got '" + tok + "'");
            pts.emplace_back(number(tok.substr(0, colon)), number(tok.substr(colon + 1)));
        }
        return table(std::move(pts));
    }
    throw ModelError("unknown coefficient kind '" + tag + "'");
}

double evaluate(const CoeffFn& f, double u) { return f(u); }

double lipschitz_constant(const CoeffFn& f) { return f.lipschitz(); }

std::string to_string(CoeffArgument a) { return a == CoeffArgument::Radius ? "radius" : "radial"; }

CoeffArgument parse_coeff_argument(std::string_view s) {
    if (s == "radius") return CoeffArgument::Radius;
    if (s == "radial") return CoeffArgument::Radial;
    throw ModelError("coefficient argument must be 'radius' or 'radial'");
}

void BallModel::validate() const {
    if (n < 2) throw ModelError("dimension n must be >= 2");
    if (!(r > 0.0 && r <= 1.0)) throw ModelError("diffusion exponent r must lie in (0,1]");
}

double BallModel::coefficient_argument(double norm_sq) const noexcept {
    const double s = std::clamp(norm_sq, 0.0, 1.0);
    return argument == CoeffArgument::Radius ? std::sqrt(s) : 1.0 - s;
}

// d/du of f(1-u^2) is bounded by 2 L on [0, 1].
double BallModel::gamma_lipschitz_in_radius() const {
    return argument == CoeffArgument::Radius ? gamma.lipschitz() : 2.0 * gamma.lipschitz();
}

double BallModel::g_lipschitz_in_radius() const {
    return argument == CoeffArgument::Radius ? g.lipschitz() : 2.0 * g.lipschitz();
}

std::string BallModel::describe() const {
    return fmt::format("n={} r={:.17g} gamma=[{}] g=[{}] argument={}", n, r, gamma.to_string(), g.to_string(),
                       degdiff::to_string(argument));
}

double feasible_shell_depth(const std::function<double(double)>& margin, std::span<const double> kinks) {
    constexpr int kGrid = 10000;
    constexpr double kCap = 0.5;
    auto holds = [&](double eps) {
        for (int i = 0; i <= kGrid; ++i) {
            // right-open shell [0, eps)
            const double s = eps * static_cast<double>(i) / (kGrid + 1);
            if (!(margin(s) > 0.0)) return false;
        }
        for (double k : kinks)
            if (k < eps && !(margin(k) > 0.0)) return false;
        return true;
    };
    if (!(margin(0.0) > 0.0)) return 0.0;
    if (holds(kCap)) return kCap;
    double lo = 0.0, hi = kCap;
    for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (holds(mid) ? lo : hi) = mid;
    }
    // The grid only resolves the crossing to eps / kGrid; pin it down on margin itself.
    double prev = 0.0;
    for (int i = 1; i <= kGrid; ++i) {
        const double s = hi * static_cast<double>(i) / (kGrid + 1);
        if (margin(s) > 0.0) {
            prev = s;
            continue;
        }
        double a = prev, b = s;
        for (int it = 0; it < 80 && b - a > 1e-16; ++it) {
            const double mid = 0.5 * (a + b);
            (margin(mid) > 0.0 ? a : b) = mid;
        }
        return std::min(lo, b);
    }
    return lo;
}

double epsilon_for_p(const BallModel& model, double p) {
    const double b = model.boundary_argument();
    auto margin = [&](double s) {
        const double u = model.argument == CoeffArgument::Radius ? 1.0 - s : s;
        const double gam = model.gamma(u);
        return p - 1.0 + model.g(u) / (gam * gam);
    };
    if (!(margin(0.0) > 0.0)) {
        const double gb = model.gamma(b);
        throw InfeasibleError(fmt::format("p={} does not exceed 1 - g/gamma^2 = {} at the boundary", p,
                                          1.0 - model.g(b) / (gb * gb)));
    }
    std::vector<double> kinks;
    for (double k : model.gamma.kinks()) kinks.push_back(model.argument == CoeffArgument::Radius ? 1.0 - k : k);
    for (double k : model.g.kinks()) kinks.push_back(model.argument == CoeffArgument::Radius ? 1.0 - k : k);
    const double eps = feasible_shell_depth(margin, kinks);
    if (!(eps > 0.0)) throw InfeasibleError("no feasible shell for p");
    return eps;
}

}  // namespace degdiff
