#include "macy/ma.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace macy {

namespace {

double ipow(double base, int e) {
    double out = 1.0;
    for (int i = 0; i < e; ++i) out *= base;
    return out;
}

}  // namespace

double f1_hat(const RootSystem& rs, const Vec2& z) {
    double out = 1.0;
    for (const PositiveRoot& r : rs.positive_roots()) {
        out *= ipow(2.0 * std::abs(r(z)), r.mult);
    }
    return out;
}

double f2_hat(const RootSystem& rs, double c, const Vec2& z) {
    double out = c;
    for (const PositiveRoot& r : rs.positive_roots()) {
        out *= ipow(std::abs(std::sinh(2.0 * r(z))), r.mult);
    }
    return out;
}

RadialProfile solve_rank1(const RootSystem& rs, double c, double x_max, int n_nodes) {
    if (rs.rank() != 1) {
        throw std::invalid_argument("solve_rank1: root system must have rank 1");
    }
    if (!(c > 0.0) || !(x_max > 0.0)) {
        throw std::invalid_argument("solve_rank1: c and x_max must be positive");
    }
    if (n_nodes < 9) {
        throw std::invalid_argument("solve_rank1: need at least 9 nodes");
    }

    RadialProfile prof;
    prof.c_ = c;
    prof.x_max_ = x_max;
    prof.m1_ = 0;
    prof.m2_ = 0;
    for (const PositiveRoot& r : rs.positive_roots()) {
        if (std::abs(r.coeffs.x1 - 1.0) < 1e-12) {
            prof.m1_ = r.mult;
        } else {
            prof.m2_ = r.mult;
        }
    }

    const int m1 = prof.m1_;
    const int m2 = prof.m2_;
    const int k = m1 + m2 + 1;
    const double pref = static_cast<double>(k) * std::ldexp(c, -(m1 + 2 * m2));
    const auto w = [m1, m2](double t) {
        return ipow(std::sinh(2.0 * t), m1) * ipow(std::sinh(4.0 * t), m2);
    };

    const int n = n_nodes;
    const double h = x_max / static_cast<double>(n - 1);
    prof.xs_.resize(static_cast<std::size_t>(n));
    prof.rho_.resize(static_cast<std::size_t>(n));
    prof.drho_.resize(static_cast<std::size_t>(n));

    // March the cumulative integral I(x) = int_0^x w and with it both
    // rho'(x) = (pref * I)^{1/k} and rho(x); the inner evaluations of rho'
    // at quadrature points re-integrate w from the last node, so every
    // value is quadrature-exact rather than spline-interpolated.
    double big_i = 0.0;
    double rho = 0.0;
    prof.xs_[0] = 0.0;
    prof.rho_[0] = 0.0;
    prof.drho_[0] = 0.0;
    for (int i = 1; i < n; ++i) {
        const double x0 = h * static_cast<double>(i - 1);
        const double x1 = h * static_cast<double>(i);
        const double base = big_i;
        const auto dprime = [&](double t) {
            const double it = base + integrate_gl(w, x0, t, 1);
            return std::pow(pref * it, 1.0 / static_cast<double>(k));
        };
        rho += integrate_gl(dprime, x0, x1, 1);
        big_i = base + integrate_gl(w, x0, x1, 1);
        prof.xs_[static_cast<std::size_t>(i)] = x1;
        prof.rho_[static_cast<std::size_t>(i)] = rho;
        prof.drho_[static_cast<std::size_t>(i)] =
            std::pow(pref * big_i, 1.0 / static_cast<double>(k));
    }

    prof.build_splines();
    return prof;
}

void RadialProfile::build_splines() {
    const int n = static_cast<int>(xs_.size());
    const double h = x_max_ / static_cast<double>(n - 1);
    std::vector<double> second(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        second[static_cast<std::size_t>(i)] =
            i == 0 ? std::pow(c_, 1.0 / static_cast<double>(m1_ + m2_ + 1))
                   : 0.0;
    }
    // Fill the interior second-derivative nodes from the equation itself,
    // in log space so the x^{m1+m2} factors cannot underflow near zero.
    for (int i = 1; i < n; ++i) {
        const double x = xs_[static_cast<std::size_t>(i)];
        const double d = drho_[static_cast<std::size_t>(i)];
        double ln = std::log(c_) - static_cast<double>(m1_ + 2 * m2_) * std::log(2.0) -
                    static_cast<double>(m1_ + m2_) * std::log(d);
        if (m1_ > 0) ln += m1_ * std::log(std::sinh(2.0 * x));
        if (m2_ > 0) ln += m2_ * std::log(std::sinh(4.0 * x));
        second[static_cast<std::size_t>(i)] = std::exp(ln);
    }
    rho_spline_ = CubicHermite(0.0, h, rho_, drho_);
    drho_spline_ = CubicHermite(0.0, h, drho_, second);
}

double RadialProfile::value(double x) const { return rho_spline_.value(std::abs(x)); }

double RadialProfile::deriv(double x) const {
    const double d = drho_spline_.value(std::abs(x));
    return x < 0.0 ? -d : d;
}

double RadialProfile::second(double x) const {
    const double ax = std::abs(x);
    const int k = m1_ + m2_ + 1;
    if (ax < 1e-12) return std::pow(c_, 1.0 / static_cast<double>(k));
    const double d = drho_spline_.value(ax);
    double ln = std::log(c_) - static_cast<double>(m1_ + 2 * m2_) * std::log(2.0) -
                static_cast<double>(k - 1) * std::log(d);
    if (m1_ > 0) ln += m1_ * std::log(std::sinh(2.0 * ax));
    if (m2_ > 0) ln += m2_ * std::log(std::sinh(4.0 * ax));
    return std::exp(ln);
}

double equation_residual(const RootSystem& rs, const RadialProfile& prof, double x) {
    const Vec2 grad{prof.deriv(x), 0.0};
    return f1_hat(rs, grad) * prof.second(x) - f2_hat(rs, prof.c(), {x, 0.0});
}

C2Field separable_field(const RadialProfile& f, const RadialProfile& g) {
    return C2Field{
        [f, g](const Vec2& z) { return f.value(z.x1) + g.value(z.x2); },
        [f, g](const Vec2& z) { return Vec2{f.deriv(z.x1), g.deriv(z.x2)}; },
        [f, g](const Vec2& z) {
            return Mat2{f.second(z.x1), 0.0, 0.0, g.second(z.x2)};
        }};
}

double equation_residual(const RootSystem& rs, double c, const C2Field& rho,
                         const Vec2& z) {
    return f1_hat(rs, rho.grad(z)) * rho.hess(z).det() - f2_hat(rs, c, z);
}

void to_json(nlohmann::json& j, const RadialProfile& prof) {
    // store the exact node data, not interpolant samples, so a round trip
    // rebuilds bit-identical splines
    j = nlohmann::json{{"kind", "radial_profile"},
                       {"c", prof.c()},
                       {"x_max", prof.x_max()},
                       {"mult_lambda", prof.mult_lambda()},
                       {"mult_two_lambda", prof.mult_two_lambda()},
                       {"value", prof.rho_},
                       {"deriv", prof.drho_}};
}

RadialProfile profile_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "radial_profile") {
        throw std::invalid_argument("radial profile json: missing kind tag");
    }
    RadialProfile prof;
    prof.c_ = j.at("c").get<double>();
    prof.x_max_ = j.at("x_max").get<double>();
    prof.m1_ = j.at("mult_lambda").get<int>();
    prof.m2_ = j.at("mult_two_lambda").get<int>();
    prof.rho_ = j.at("value").get<std::vector<double>>();
    prof.drho_ = j.at("deriv").get<std::vector<double>>();
    if (!(prof.c_ > 0.0) || !(prof.x_max_ > 0.0) || prof.m1_ < 0 || prof.m2_ < 0 ||
        prof.rho_.size() != prof.drho_.size() || prof.rho_.size() < 9) {
        throw std::invalid_argument("radial profile json: inconsistent fields");
    }
    const std::size_t n = prof.rho_.size();
    prof.xs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        prof.xs_[i] = prof.x_max_ * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    prof.build_splines();
    return prof;
}

void profile_to_csv(const RadialProfile& prof, std::ostream& os) {
    os << "x,value,deriv,second\n";
    for (int i = 0; i < prof.n_nodes(); ++i) {
        const double x = prof.node(i);
        os << format_double(x) << "," << format_double(prof.value(x)) << ","
           << format_double(prof.deriv(x)) << "," << format_double(prof.second(x))
           << "\n";
    }
}

}  // namespace macy
