// Acceptance gate: one line per criterion, exit 0 only when all pass.
// Each criterion restates a contract of the library at its stated tolerance
// and time budget; nothing here tunes or retries.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "macy/convex.hpp"
#include "macy/kaehler.hpp"
#include "macy/ma.hpp"
#include "macy/rootsys.hpp"

using namespace macy;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

int g_failures = 0;

void report(int idx, bool ok, const char* name, const std::string& detail) {
    if (!ok) g_failures += 1;
    std::printf("%s  %d. %s (%s)\n", ok ? "PASS" : "FAIL", idx, name, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

RootSystem a1_unit() { return build_root_system(Family::a1, {{"lambda", 1}}); }

RootSystem bc1_example(int d, int n) {
    return build_root_system(Family::bc1,
                             {{"lambda", (d + 1) * n - d - 1}, {"2lambda", d}});
}

RootSystem rs_a1xa1() {
    return build_root_system(Family::a1xa1, {{"lambda1", 1}, {"lambda2", 1}});
}

C2Field field_sum(const C2Field& f, const C2Field& g) {
    C2Field out;
    out.value = [f, g](const Vec2& z) { return f.value(z) + g.value(z); };
    out.grad = [f, g](const Vec2& z) { return f.grad(z) + g.grad(z); };
    out.hess = [f, g](const Vec2& z) { return f.hess(z) + g.hess(z); };
    return out;
}

C2Field invariant_fixture(const RootSystem& rs) {
    const std::size_t ng = CoshSurrogate::parameter_groups(rs).size();
    const CoshSurrogate sigma(rs, std::vector<double>(ng, 0.7),
                              std::vector<double>(ng, 1.1));
    return field_sum(quadratic_field(Mat2::identity()), sigma.as_field());
}

std::vector<Vec2> chamber_sample(const RootSystem& rs, int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ur(0.3, 2.5);
    std::uniform_real_distribution<double> ua(0.07, 0.93);
    std::vector<Vec2> pts;
    for (int k = 0; k < count; ++k) {
        const double r = ur(rng);
        if (rs.rank() == 1) {
            pts.push_back({r, 0.0});
        } else {
            const double phi = ua(rng) * rs.theta();
            pts.push_back({r * std::cos(phi), r * std::sin(phi)});
        }
    }
    return pts;
}

/** Largest relative defect of the displayed second-order reduction, both
 *  derivatives taken by finite differences of the stored node values. */
double fd_equation_defect(const RadialProfile& prof, double lo, double hi) {
    const int m1 = prof.mult_lambda();
    const int m2 = prof.mult_two_lambda();
    const int n = prof.n_nodes();
    const double h = prof.node(1) - prof.node(0);
    double worst = 0.0;
    for (int i = 1; i + 1 < n; ++i) {
        const double x = prof.node(i);
        if (x < lo || x > hi) continue;
        const double vm = prof.value(prof.node(i - 1));
        const double v0 = prof.value(x);
        const double vp = prof.value(prof.node(i + 1));
        const double d1 = (vp - vm) / (2.0 * h);
        const double d2 = (vp - 2.0 * v0 + vm) / (h * h);
        const double lhs = std::ldexp(std::pow(d1, m1 + m2) * d2, m1 + 2 * m2);
        const double rhs = prof.c() * std::pow(std::sinh(2.0 * x), m1) *
                           std::pow(std::sinh(4.0 * x), m2);
        worst = std::max(worst, std::abs(lhs - rhs) / rhs);
    }
    return worst;
}

// 1. closed-form rank-1 profile and its induced metric
void criterion1() {
    Timer t;
    const RootSystem rs = a1_unit();
    const RadialProfile prof = solve_rank1(rs, 1.0, 5.0, 2501);
    double e_prof = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double x = 5.0 * i / 1000.0;
        e_prof = std::max(e_prof, std::abs(prof.deriv(x) - std::sinh(x)));
    }
    const C2Field rho = radial_field(prof);
    double e_metric = 0.0;
    for (const double x : {0.3, 0.8, 1.5, 2.4, 3.6, 4.5}) {
        const HermitianBlocks im = induced_metric(rs, rho, {x, 0.0});
        e_metric = std::max(e_metric, std::abs(im.a_block.a11 - 0.5 * std::cosh(x)));
        e_metric = std::max(e_metric,
                            std::abs(im.root_entries[0].value + 1.0 / std::cosh(x)));
    }
    const double dt = t.seconds();
    report(1, e_prof <= 1e-8 && e_metric <= 1e-8 && dt < 1.0,
           "rank-1 closed form and induced metric",
           fmt("profile err %.2e, metric err %.2e, %.2f s", e_prof, e_metric, dt));
}

// 2. quadrature profiles satisfy the displayed reduction by finite differences
void criterion2() {
    bool ok = true;
    std::string detail;
    for (const auto& [d, n] : {std::pair{1, 2}, std::pair{3, 2}, std::pair{7, 2}}) {
        Timer t;
        const RadialProfile prof = solve_rank1(bc1_example(d, n), 1.0, 4.5, 45001);
        const double defect = fd_equation_defect(prof, 0.1, 4.0);
        const double dt = t.seconds();
        ok = ok && defect <= 1e-6 && dt < 1.0;
        if (!detail.empty()) detail += "; ";
        detail += fmt("d=%.0f: %.2e, %.2f s", static_cast<double>(d), defect, dt);
    }
    report(2, ok, "second-order reduction residuals", detail);
}

// 3. subdifferential fixtures reproduce their stated sets
void criterion3() {
    const auto close = [](const Vec2& a, double x, double y) {
        return std::abs(a.x1 - x) <= 1e-12 && std::abs(a.x2 - y) <= 1e-12;
    };
    bool ok = true;
    const SubgradientSet s33 = ConvexFn::quad_plus_one().subgradient({1.0, 0.0});
    ok = ok && s33.is_singleton && s33.vertices.size() == 1 &&
         close(s33.vertices[0], 2.0, 0.0);
    const SubgradientSet s34 = ConvexFn::radial_kink().subgradient({1.0, 0.0});
    ok = ok && s34.vertices.size() == 2 && close(s34.vertices[0], 1.0, 0.0) &&
         close(s34.vertices[1], 2.0, 0.0);
    const SubgradientSet s35 = ConvexFn::l1_kink().subgradient({1.0, 0.0});
    ok = ok && s35.vertices.size() == 4 && close(s35.vertices[0], 1.0, -1.0) &&
         close(s35.vertices[1], 2.0, -2.0) && close(s35.vertices[2], 2.0, 2.0) &&
         close(s35.vertices[3], 1.0, 1.0);
    report(3, ok, "subdifferential fixtures",
           ok ? "singleton, segment and patch all exact" : "vertex mismatch");
}

// 4. weak-solution identity on the rank-1 closed form
void criterion4() {
    const double c = 1.0;
    const ConvexFn f = ConvexFn::eh_radial(c);
    const ScalarField f1{[](Vec2 y) { return 2.0 * std::abs(y.x1); }, std::nullopt};
    const ScalarField f2{[c](Vec2 x) { return c * std::sinh(2.0 * std::abs(x.x1)); },
                         std::nullopt};
    std::mt19937_64 rng(2024u);
    std::uniform_real_distribution<double> ud(0.1, 3.0);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double a = ud(rng), b = ud(rng);
        const BorelBox box{{std::min(a, b), 0.0}, {std::max(a, b), 0.0}};
        worst = std::max(worst, weighted_ma_identity_check(f, f1, f2, box).residual());
    }
    report(4, worst <= 1e-6, "weighted measure identity",
           fmt("worst residual %.2e over 20 boxes", worst));
}

// 5. separable product oracle for the rank-2 solver
void criterion5() {
    Timer t;
    const ProblemSpec spec{rs_a1xa1(), 16.0, 3.0, 128, 1e-6, 40};
    const Solution sol = solve_rank2(spec);
    double val_err = 0.0, grad_err = 0.0, val_scale = 0.0, grad_scale = 0.0;
    for (int i = 0; i < sol.grid.n(); ++i) {
        for (int j = 0; j < sol.grid.n(); ++j) {
            if (!sol.inner_node(i, j)) continue;
            const Vec2 z = sol.grid.node_z(i, j);
            const double oracle = 2.0 * (std::cosh(z.x1) + std::cosh(z.x2) - 2.0);
            const Vec2 og{2.0 * std::sinh(z.x1), 2.0 * std::sinh(z.x2)};
            val_err = std::max(val_err, std::abs(sol.value_at(i, j) - oracle));
            val_scale = std::max(val_scale, std::abs(oracle));
            const Vec2 g = sol.gradient_z(i, j);
            grad_err = std::max(grad_err, std::max(std::abs(g.x1 - og.x1),
                                                   std::abs(g.x2 - og.x2)));
            grad_scale = std::max(grad_scale, og.norm());
        }
    }
    const double rv = val_err / val_scale;
    const double rg = grad_err / grad_scale;
    const double dt = t.seconds();
    report(5, sol.converged && rv <= 1e-4 && rg <= 1e-4 && dt < 60.0,
           "separable tensor oracle at grid 128",
           fmt("value err %.2e, gradient err %.2e, %.1f s", rv, rg, dt));
}

// 6. rank-2 families: residual, chamber preservation, determinant constancy
void criterion6() {
    struct Case {
        Family fam;
        const char* tag;
        std::map<std::string, int> mult;
        double c;
    };
    const std::vector<Case> cases{
        {Family::a2, "a2", {{"lambda", 1}}, 32.0},
        {Family::b2, "b2", {{"lambda1", 1}, {"lambda2", 1}}, 64.0},
        {Family::g2, "g2", {{"lambda1", 1}, {"lambda2", 1}}, 256.0}};
    bool ok = true;
    std::string detail;
    for (const Case& cs : cases) {
        const RootSystem rs = build_root_system(cs.fam, cs.mult);
        double dev_prev = 0.0;
        for (const int grid_n : {64, 128}) {
            Timer t;
            const ProblemSpec spec{rs, cs.c, 3.0, grid_n, 1e-6, 40};
            const Solution sol = solve_rank2(spec);
            const ResidualGrid res = equation_residual(sol);
            const bool chamber = chamber_preserved(sol);
            const double dev = cy_constancy(sol).max_dev;
            const double dt = t.seconds();
            const bool case_ok = sol.converged &&
                                 res.max_inner <= 1e-3 * res.max_f2_inner &&
                                 chamber && dev <= 1e-2 && dt < 300.0;
            const bool refine_ok = grid_n == 64 || dev < dev_prev;
            ok = ok && case_ok && refine_ok;
            if (!detail.empty()) detail += "; ";
            detail += cs.tag;
            detail += fmt("/%.0f: dev %.1e, %.1f s", static_cast<double>(grid_n), dev, dt);
            dev_prev = dev;
        }
    }
    report(6, ok, "rank-2 families with unit multiplicities", detail);
}

// 7. determinant identity ratio and the diagonal halving
void criterion7() {
    std::vector<RootSystem> families{
        a1_unit(),
        bc1_example(3, 2),
        rs_a1xa1(),
        build_root_system(Family::a2, {{"lambda", 1}}),
        build_root_system(Family::b2, {{"lambda1", 1}, {"lambda2", 1}}),
        build_root_system(Family::g2, {{"lambda1", 1}, {"lambda2", 1}})};
    bool ok = true;
    double worst_spread = 0.0, worst_half = 0.0;
    for (const RootSystem& rs : families) {
        const C2Field rho = invariant_fixture(rs);
        const double expected = std::ldexp(1.0, rs.mult_sum());
        double lo = 1e300, hi = -1e300;
        for (const Vec2& z : chamber_sample(rs, 100, 5u)) {
            const DetIdentityReport rep = det_identity_report(rs, rho, z);
            lo = std::min(lo, rep.ratio);
            hi = std::max(hi, rep.ratio);
        }
        ok = ok && hi - lo <= 1e-10 &&
             std::abs(lo - expected) <= 1e-10 * expected;
        worst_spread = std::max(worst_spread, hi - lo);
        for (const Vec2& z : chamber_sample(rs, 20, 17u)) {
            const HermitianBlocks cb = complex_hessian(rs, rho, z);
            for (std::size_t k = 0; k < rs.positive_roots().size(); ++k) {
                const double ratio =
                    lemma31_diagonal(rs, rho, z, static_cast<int>(k)) /
                    cb.root_entries[k].value;
                worst_half = std::max(worst_half, std::abs(ratio - 0.5));
            }
        }
    }
    ok = ok && worst_half <= 1e-12;
    report(7, ok, "determinant identity chain",
           fmt("ratio spread %.2e, halving dev %.2e", worst_spread, worst_half));
}

// 8. property suites
void criterion8() {
    bool ok = true;
    std::string detail;

    // subgradient monotonicity over ten thousand random pairs
    {
        std::mt19937_64 rng(777u);
        std::uniform_real_distribution<double> dist(-0.95, 0.95);
        const ConvexFn fns[] = {ConvexFn::radial_kink(), ConvexFn::l1_kink(),
                                ConvexFn::quad_plus_one(), ConvexFn::sqnorm_half(2)};
        double worst = 0.0;
        int checked = 0;
        while (checked < 10000) {
            for (const ConvexFn& f : fns) {
                const Vec2 x{dist(rng), dist(rng)};
                const Vec2 y{dist(rng), dist(rng)};
                const SubgradientSet sx = f.subgradient(x);
                const SubgradientSet sy = f.subgradient(y);
                const Vec2 p = sx.vertices[checked % sx.vertices.size()];
                const Vec2 q = sy.vertices[(checked / 3) % sy.vertices.size()];
                worst = std::min(worst, (p - q).dot(x - y));
                ++checked;
            }
        }
        ok = ok && worst >= -1e-9;
        detail += fmt("monotonicity min %.1e", worst);
    }

    // generic Weyl orbit cardinalities
    {
        const Vec2 z{0.37, 0.19};
        const int want[] = {4, 6, 8, 12};
        const Family fams[] = {Family::a1xa1, Family::a2, Family::b2, Family::g2};
        const std::map<std::string, int> mults[] = {
            {{"lambda1", 1}, {"lambda2", 1}},
            {{"lambda", 1}},
            {{"lambda1", 1}, {"lambda2", 1}},
            {{"lambda1", 1}, {"lambda2", 1}}};
        bool cards = true;
        for (int k = 0; k < 4; ++k) {
            const RootSystem rs = build_root_system(fams[k], mults[k]);
            cards = cards &&
                    static_cast<int>(rs.weyl_orbit(z).size()) == want[k];
        }
        ok = ok && cards;
        detail += cards ? "; orbit sizes 4/6/8/12" : "; orbit size mismatch";
    }

    // invariant factor under the full group
    {
        double worst = 0.0;
        for (const Family fam : {Family::a1xa1, Family::a2, Family::b2, Family::g2}) {
            const RootSystem rs = build_root_system(
                fam, fam == Family::a2
                         ? std::map<std::string, int>{{"lambda", 1}}
                         : std::map<std::string, int>{{"lambda1", 1}, {"lambda2", 1}});
            const C2Field rho = invariant_fixture(rs);
            for (const Vec2& z : chamber_sample(rs, 10, 23u)) {
                const double base = d_operator(rs, rho, z);
                for (const Mat2& w : rs.weyl_elements()) {
                    worst = std::max(worst, std::abs(d_operator(rs, rho, w.apply(z)) -
                                                     base) /
                                                (1.0 + std::abs(base)));
                }
            }
        }
        ok = ok && worst <= 1e-10;
        detail += fmt("; invariance dev %.1e", worst);
    }

    // shape spectrum product identity
    {
        std::mt19937_64 rng(31u);
        std::uniform_real_distribution<double> uv(-1.5, 1.5);
        double worst = 0.0;
        for (const Family fam : {Family::a1xa1, Family::a2, Family::b2, Family::g2}) {
            const RootSystem rs = build_root_system(
                fam, fam == Family::a2
                         ? std::map<std::string, int>{{"lambda", 1}}
                         : std::map<std::string, int>{{"lambda1", 1}, {"lambda2", 1}});
            for (const Vec2& z : chamber_sample(rs, 10, 37u)) {
                const Vec2 v{uv(rng), uv(rng)};
                const ShapeSpectrum sp = shape_spectrum(rs, z, v);
                for (const ShapeSpectrum::Entry& e : sp.entries) {
                    const double lv =
                        rs.positive_roots()[static_cast<std::size_t>(e.root)](v);
                    worst = std::max(worst,
                                     std::abs(e.eigen_pd * e.eigen_p - lv * lv) /
                                         (1.0 + lv * lv));
                }
            }
        }
        ok = ok && worst <= 1e-12;
        detail += fmt("; spectrum dev %.1e", worst);
    }

    // discrete comparison principle on a 16 by 16 lattice
    {
        const int n = 16;
        const double h = 0.125;
        const StencilLattice lat = StencilLattice::box(n, n, h, 2);
        const auto solve_with = [&](double level) {
            std::vector<double> u(static_cast<std::size_t>(n) * n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const Vec2 xi{h * i - 0.9, h * j - 0.9};
                    u[static_cast<std::size_t>(i * n + j)] = 0.5 * xi.norm2();
                }
            }
            const std::vector<double> rhs(u.size(), level);
            monotone_ma_sweeps(lat, monotone_direction_pairs(false), rhs, u, 2000,
                               1e-14);
            newton_ma_solve(lat, rhs, u, 1e-12, 50);
            return u;
        };
        const std::vector<double> base = solve_with(1.0);
        const std::vector<double> higher = solve_with(2.0);
        bool comparison = true;
        double drop = 0.0;
        for (std::size_t f = 0; f < base.size(); ++f) {
            if (!lat.is_active[f]) continue;
            comparison = comparison && higher[f] <= base[f] + 1e-10;
            drop = std::max(drop, base[f] - higher[f]);
        }
        comparison = comparison && drop > 1e-3;
        ok = ok && comparison;
        detail += comparison ? "; comparison principle holds" : "; comparison violated";
    }

    report(8, ok, "property suites", detail);
}

}  // namespace

int main() {
    // stated runtime budgets are single-threaded
    setenv("MA_CY_THREADS", "1", 1);
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    if (g_failures == 0) {
        std::printf("acceptance: all 8 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d of 8 criteria FAILED\n", g_failures);
    return 1;
}
