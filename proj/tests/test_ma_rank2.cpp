#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "macy/ma.hpp"

using namespace macy;

namespace {

RootSystem rs_a1xa1() {
    return build_root_system(Family::a1xa1, {{"lambda1", 1}, {"lambda2", 1}});
}
RootSystem rs_a2() { return build_root_system(Family::a2, {{"lambda", 1}}); }
RootSystem rs_b2() {
    return build_root_system(Family::b2, {{"lambda1", 1}, {"lambda2", 1}});
}
RootSystem rs_g2() {
    return build_root_system(Family::g2, {{"lambda1", 1}, {"lambda2", 1}});
}

/** Shear of the wall-aligned lattice: 0 on square lattices, 1 on hexagonal. */
int family_shear(Family f) { return f == Family::a2 || f == Family::g2 ? 1 : 0; }

long long quad_form(int shear, int i, int j) {
    return static_cast<long long>(i) * i + static_cast<long long>(j) * j +
           static_cast<long long>(shear) * i * j;
}

/** Dirichlet problem on the full truncation disc, no Weyl reduction: the
 *  region is every lattice node with |Z| <= R, boundary data comes from the
 *  same fitted surrogate the sector solver uses. Only shear-0 families keep
 *  the 9-point stencil reflection-symmetric, so the exact comparison against
 *  the sector solver is run for those. */
struct FullDisc {
    StencilLattice lat;
    std::vector<double> values;
    int center = 0;

    FullDisc(const RootSystem& rs, double c, double radius, int grid_n, double tol,
             int max_iter) {
        const int shear = family_shear(rs.family());
        const int reach = 2;
        const int nf = 2 * grid_n - 1;
        center = grid_n - 1;
        lat.n1 = nf;
        lat.n2 = nf;
        lat.margin = reach;
        lat.h = radius / static_cast<double>(grid_n - 1);
        const int pn = nf + 2 * reach;
        lat.resolve.assign(static_cast<std::size_t>(pn) * pn, -1);
        const long long rim = static_cast<long long>(grid_n - 1) * (grid_n - 1);
        const auto in_disc = [&](int i, int j) {
            return quad_form(shear, i - center, j - center) <= rim;
        };
        for (int i = -reach; i < nf + reach; ++i) {
            for (int j = -reach; j < nf + reach; ++j) {
                if (i >= 0 && i < nf && j >= 0 && j < nf && in_disc(i, j)) {
                    lat.resolve[static_cast<std::size_t>((i + reach) * pn + j + reach)] =
                        i * nf + j;
                }
            }
        }
        lat.is_active.assign(static_cast<std::size_t>(nf) * nf, 0);
        values.assign(static_cast<std::size_t>(nf) * nf,
                      std::numeric_limits<double>::quiet_NaN());

        const Mat2 basis = SectorGrid(rs, radius, grid_n).basis();
        const CoshSurrogate sigma = fit_boundary_surrogate(rs, c, radius);
        for (int i = 0; i < nf; ++i) {
            for (int j = 0; j < nf; ++j) {
                if (!in_disc(i, j)) continue;
                bool closed = true;
                for (int di = -reach; di <= reach && closed; ++di) {
                    for (int dj = -reach; dj <= reach; ++dj) {
                        if (lat.at(i + di, j + dj) < 0) {
                            closed = false;
                            break;
                        }
                    }
                }
                if (closed) lat.is_active[static_cast<std::size_t>(i * nf + j)] = 1;
                const Vec2 z = basis.apply({lat.h * (i - center), lat.h * (j - center)});
                values[static_cast<std::size_t>(i * nf + j)] = sigma.value(z);
            }
        }

        // same outer dynamics as the sector solver, on the unreduced domain;
        // inner nodes here avoid every wall line crossing the disc
        const Mat2 inv_t = basis.inverse().transpose();
        const std::vector<DirPair> pairs = monotone_direction_pairs(false);
        const auto rel_residual = [&](const std::vector<double>& v) {
            double worst = 0.0, f2max = 0.0;
            for (int i = 0; i < nf; ++i) {
                for (int j = 0; j < nf; ++j) {
                    if (!lat.is_active[static_cast<std::size_t>(i * nf + j)]) continue;
                    const Vec2 z =
                        basis.apply({lat.h * (i - center), lat.h * (j - center)});
                    if (z.norm() > 0.5 * radius) continue;
                    bool near_wall = false;
                    for (const PositiveRoot& r : rs.positive_roots()) {
                        if (std::abs(r(z)) / r.coeffs.norm() < 2.0 * lat.h * (1.0 - 1e-12)) {
                            near_wall = true;
                        }
                    }
                    if (near_wall) continue;
                    const auto val = [&](int a, int b) {
                        return v[static_cast<std::size_t>(lat.at(a, b))];
                    };
                    const double hh = lat.h;
                    const Vec2 gxi{(val(i + 1, j) - val(i - 1, j)) / (2.0 * hh),
                                   (val(i, j + 1) - val(i, j - 1)) / (2.0 * hh)};
                    const double d11 =
                        (val(i + 1, j) - 2.0 * val(i, j) + val(i - 1, j)) / (hh * hh);
                    const double d22 =
                        (val(i, j + 1) - 2.0 * val(i, j) + val(i, j - 1)) / (hh * hh);
                    const double d12 = (val(i + 1, j + 1) + val(i - 1, j - 1) -
                                        val(i - 1, j + 1) - val(i + 1, j - 1)) /
                                       (4.0 * hh * hh);
                    const Mat2 hz = inv_t * Mat2{d11, d12, d12, d22} * inv_t.transpose();
                    const double res =
                        f1_hat(rs, inv_t.apply(gxi)) * hz.det() - f2_hat(rs, c, z);
                    worst = std::max(worst, std::abs(res));
                    f2max = std::max(f2max, f2_hat(rs, c, z));
                }
            }
            return worst / f2max;
        };
        // knobs must match the sector solve exactly: the two runs are
        // reflections of the same discrete iteration, so any difference in
        // tolerance or cap desynchronizes their stopping states
        outer_fixed_point(rs, c, lat, basis, center, center, pairs, rel_residual,
                          values, tol, max_iter);
    }

    double at(int di, int dj) const {
        return values[static_cast<std::size_t>((center + di) * lat.n1 + center + dj)];
    }
};

}  // namespace

TEST_CASE("monotone direction pairs are orthogonal") {
    for (bool wide : {false, true}) {
        const auto pairs = monotone_direction_pairs(wide);
        CHECK(pairs.size() == (wide ? 8u : 4u));
        for (const DirPair& p : pairs) {
            CHECK(p.a1 * p.b1 + p.a2 * p.b2 == 0);
            CHECK(p.a1 * p.a1 + p.a2 * p.a2 > 0);
        }
    }
}

TEST_CASE("monotone sweeps reproduce an axis-aligned quadratic exactly") {
    const int n = 20;
    const double h = 0.1;
    const StencilLattice lat = StencilLattice::box(n, n, h, 2);
    const auto exact = [&](int i, int j) {
        const double x = h * i - 1.0, y = h * j - 1.0;
        return x * x + 0.5 * y * y;  // det D^2 = 2
    };
    std::vector<double> u(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!lat.is_active[static_cast<std::size_t>(i * n + j)]) {
                u[static_cast<std::size_t>(i * n + j)] = exact(i, j);
            }
        }
    }
    const std::vector<double> rhs(u.size(), 2.0);
    const double delta =
        monotone_ma_sweeps(lat, monotone_direction_pairs(false), rhs, u, 4000, 1e-15);
    CHECK(delta <= 1e-12);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            CHECK(std::abs(u[static_cast<std::size_t>(i * n + j)] - exact(i, j)) <=
                  1e-9);
        }
    }
}

TEST_CASE("newton solve is exact on a quadratic with cross term") {
    const int n = 20;
    const double h = 0.1;
    const StencilLattice lat = StencilLattice::box(n, n, h, 2);
    const Mat2 m{2.0, 0.5, 0.5, 1.0};  // det 1.75
    const auto exact = [&](int i, int j) {
        const Vec2 xi{h * i - 1.0, h * j - 1.0};
        return 0.5 * xi.dot(m.apply(xi));
    };
    std::vector<double> u(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const bool active = lat.is_active[static_cast<std::size_t>(i * n + j)] != 0;
            // perturb the interior with a bump that vanishes on the Dirichlet
            // band, keeping the start strictly convex and kink free
            const double si = std::sin(M_PI * (i - 1) / static_cast<double>(n - 3));
            const double sj = std::sin(M_PI * (j - 1) / static_cast<double>(n - 3));
            u[static_cast<std::size_t>(i * n + j)] =
                exact(i, j) + (active ? 0.05 * si * sj : 0.0);
        }
    }
    const std::vector<double> rhs(u.size(), m.det());
    const NewtonReport rep = newton_ma_solve(lat, rhs, u, 1e-12, 50);
    CHECK(rep.ok);
    CHECK(rep.residual_inf <= 1e-12);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            CHECK(std::abs(u[static_cast<std::size_t>(i * n + j)] - exact(i, j)) <=
                  1e-9);
        }
    }
}

TEST_CASE("raising the right-hand side lowers the discrete solution") {
    const int n = 16;
    const double h = 0.125;
    const StencilLattice lat = StencilLattice::box(n, n, h, 2);
    const auto boundary = [&](int i, int j) {
        const Vec2 xi{h * i - 0.9, h * j - 0.9};
        return 0.5 * xi.norm2();
    };
    const auto solve_with = [&](double level) {
        std::vector<double> u(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) u[static_cast<std::size_t>(i * n + j)] = boundary(i, j);
        }
        const std::vector<double> rhs(u.size(), level);
        monotone_ma_sweeps(lat, monotone_direction_pairs(false), rhs, u, 2000, 1e-14);
        const NewtonReport rep = newton_ma_solve(lat, rhs, u, 1e-12, 50);
        REQUIRE(rep.ok);
        return u;
    };
    const std::vector<double> base = solve_with(1.0);
    const std::vector<double> higher = solve_with(2.0);
    const std::vector<double> lower = solve_with(0.5);
    double max_drop = 0.0;
    for (std::size_t f = 0; f < base.size(); ++f) {
        if (!lat.is_active[f]) continue;
        CHECK(higher[f] <= base[f] + 1e-10);
        CHECK(lower[f] >= base[f] - 1e-10);
        max_drop = std::max(max_drop, base[f] - higher[f]);
    }
    CHECK(max_drop > 1e-3);
}

TEST_CASE("sector grid geometry and reflection bookkeeping") {
    SUBCASE("a1xa1 quadrant") {
        const SectorGrid g(rs_a1xa1(), 2.0, 24);
        CHECK(g.det_basis() == 1.0);
        CHECK(g.resolve(3, 5) == g.flat(3, 5));
        CHECK(g.resolve(-3, 5) == g.flat(3, 5));
        CHECK(g.resolve(4, -2) == g.flat(4, 2));
        CHECK(g.resolve(-1, -1) == g.flat(1, 1));
        CHECK(g.resolve(40, 0) == -1);  // beyond the arc
        CHECK(g.node_class(0, 0) == SectorGrid::NodeClass::active);
    }
    SUBCASE("a2 sheared quadrant") {
        const SectorGrid g(rs_a2(), 2.0, 24);
        CHECK(g.det_basis() == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-15));
        CHECK(g.resolve(-2, 5) == g.flat(2, 3));
        CHECK(g.resolve(4, -2) == g.flat(2, 2));
        const Vec2 z = g.node_z(3, 4);
        CHECK(z.norm2() ==
              doctest::Approx(g.h() * g.h() * quad_form(1, 3, 4)).epsilon(1e-13));
    }
    SUBCASE("b2 half quadrant") {
        const SectorGrid g(rs_b2(), 2.0, 24);
        CHECK(g.resolve(3, 7) == g.flat(7, 3));
        CHECK(g.resolve(3, -2) == g.flat(3, 2));
        CHECK(g.node_class(5, 5) != SectorGrid::NodeClass::outside);
        CHECK(g.node_class(5, 6) == SectorGrid::NodeClass::outside);
    }
    SUBCASE("g2 sheared half quadrant") {
        const SectorGrid g(rs_g2(), 2.0, 24);
        CHECK(g.resolve(2, -3) == g.flat(2, 1));
        CHECK(g.resolve(-1, 0) == g.flat(1, 0));
        const Vec2 z = g.node_z(4, 2);
        CHECK(z.norm2() ==
              doctest::Approx(g.h() * g.h() * quad_form(1, 4, 2)).epsilon(1e-13));
        // the high wall of the chamber is the lattice diagonal
        const PositiveRoot& high = g.resolve(1, 1) >= 0
                                       ? rs_g2().positive_roots().back()
                                       : rs_g2().positive_roots().front();
        CHECK(std::abs(high(g.node_z(5, 5))) <= 1e-14);
    }
    SUBCASE("active nodes have fully resolvable stencils") {
        const SectorGrid g(rs_g2(), 2.0, 20);
        CHECK(!g.active_nodes().empty());
        for (int f : g.active_nodes()) {
            const int i = f / g.n(), j = f % g.n();
            for (int di = -g.reach(); di <= g.reach(); ++di) {
                for (int dj = -g.reach(); dj <= g.reach(); ++dj) {
                    CHECK(g.resolve(i + di, j + dj) >= 0);
                }
            }
        }
        const StencilLattice lat = g.lattice();
        CHECK(lat.at(2, -1) == g.resolve(2, -1));
        CHECK(lat.at(0, 0) == g.flat(0, 0));
    }
    SUBCASE("rejects rank-1 systems and bad sizes") {
        const RootSystem a1 = build_root_system(Family::a1, {{"lambda", 1}});
        CHECK_THROWS_AS(SectorGrid(a1, 2.0, 24), std::invalid_argument);
        CHECK_THROWS_AS(SectorGrid(rs_a2(), -1.0, 24), std::invalid_argument);
        CHECK_THROWS_AS(SectorGrid(rs_a2(), 2.0, 8), std::invalid_argument);
    }
}

TEST_CASE("outer rhs equals the analytic limit on an exact quadratic") {
    for (const RootSystem& rs : {rs_a1xa1(), rs_a2(), rs_g2()}) {
        const double c = 3.0;
        const SectorGrid grid(rs, 2.0, 24);
        const StencilLattice lat = grid.lattice();
        std::vector<double> u(static_cast<std::size_t>(grid.n()) * grid.n(), 0.0);
        for (int i = 0; i < grid.n(); ++i) {
            for (int j = 0; j < grid.n(); ++j) {
                if (grid.node_class(i, j) == SectorGrid::NodeClass::outside) continue;
                u[static_cast<std::size_t>(grid.flat(i, j))] =
                    0.5 * grid.node_z(i, j).norm2();
            }
        }
        const std::vector<double> g = outer_rhs(rs, c, lat, grid.basis(), 0, 0, u);
        const double det2 = grid.det_basis() * grid.det_basis();
        for (int i = 0; i < grid.n(); ++i) {
            for (int j = 0; j < grid.n(); ++j) {
                const std::size_t f = static_cast<std::size_t>(grid.flat(i, j));
                if (grid.node_class(i, j) != SectorGrid::NodeClass::active) {
                    CHECK(g[f] == 0.0);
                    continue;
                }
                // grad of |Z|^2/2 is Z, so every eta is exactly 1
                double expect = det2 * c;
                for (const PositiveRoot& r : rs.positive_roots()) {
                    const double t = r(grid.node_z(i, j));
                    const double phi =
                        std::abs(t) < 1e-9 ? 1.0 : std::sinh(2.0 * t) / (2.0 * t);
                    for (int e = 0; e < r.mult; ++e) expect *= phi;
                }
                CHECK(g[f] == doctest::Approx(expect).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("surrogate parameter groups follow orbit multiplicities") {
    CHECK(CoshSurrogate::parameter_groups(rs_a1xa1()).size() == 1);
    CHECK(CoshSurrogate::parameter_groups(rs_a2()).size() == 1);
    CHECK(CoshSurrogate::parameter_groups(rs_b2()).size() == 1);
    CHECK(CoshSurrogate::parameter_groups(rs_g2()).size() == 1);
    const RootSystem uneven =
        build_root_system(Family::a1xa1, {{"lambda1", 1}, {"lambda2", 2}});
    const auto groups = CoshSurrogate::parameter_groups(uneven);
    CHECK(groups.size() == 2);
    CHECK(groups[0].size() + groups[1].size() == 2);
    CHECK_THROWS_AS(CoshSurrogate(rs_a2(), {1.0, 2.0}, {1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("surrogate derivatives are consistent with its value") {
    const CoshSurrogate s(rs_g2(), {0.7}, {1.3});
    const Vec2 z{0.8, 0.3};
    const double eps = 1e-5;
    const double fd1 =
        (s.value({z.x1 + eps, z.x2}) - s.value({z.x1 - eps, z.x2})) / (2.0 * eps);
    const double fd2 =
        (s.value({z.x1, z.x2 + eps}) - s.value({z.x1, z.x2 - eps})) / (2.0 * eps);
    CHECK(s.grad(z).x1 == doctest::Approx(fd1).epsilon(1e-8));
    CHECK(s.grad(z).x2 == doctest::Approx(fd2).epsilon(1e-8));
    const double fd11 = (s.grad({z.x1 + eps, z.x2}).x1 - s.grad({z.x1 - eps, z.x2}).x1) /
                        (2.0 * eps);
    CHECK(s.hess(z).a11 == doctest::Approx(fd11).epsilon(1e-8));
    CHECK(s.hess(z).a12 == s.hess(z).a21);
    CHECK(s.value({0.0, 0.0}) == 0.0);
    const C2Field f = s.as_field();
    CHECK(f.value(z) == s.value(z));
}

TEST_CASE("boundary fit recovers the exact a1xa1 surrogate") {
    const CoshSurrogate s = fit_boundary_surrogate(rs_a1xa1(), 16.0, 3.0);
    REQUIRE(s.kappa().size() == 1);
    CHECK(s.kappa()[0] == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(s.alpha()[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("injected quadratic reproduces the pointwise density gap") {
    for (const RootSystem& rs : {rs_a1xa1(), rs_a2()}) {
        const ProblemSpec spec{rs, 2.0, 2.0, 24, 1e-6, 10};
        const C2Field quad{[](const Vec2& z) { return 0.5 * z.norm2(); },
                           [](const Vec2& z) { return z; },
                           [](const Vec2&) { return Mat2::identity(); }};
        const Solution sol = inject_solution(spec, quad);
        const ResidualGrid res = equation_residual(sol);
        for (int i = 0; i < sol.grid.n(); ++i) {
            for (int j = 0; j < sol.grid.n(); ++j) {
                if (sol.grid.node_class(i, j) != SectorGrid::NodeClass::active) continue;
                const Vec2 z = sol.grid.node_z(i, j);
                const double expect = f1_hat(rs, z) - f2_hat(rs, 2.0, z);
                CHECK(res.values[static_cast<std::size_t>(sol.grid.flat(i, j))] ==
                      doctest::Approx(expect).epsilon(1e-9));
            }
        }
        CHECK(res.max_inner <= res.max_interior);
        CHECK(res.max_f2_inner > 0.0);
    }
}

TEST_CASE("injected separable oracle leaves only discretization residual") {
    const RadialProfile f = solve_rank1(
        build_root_system(Family::a1, {{"lambda", 1}}), 4.0, 4.0, 2001);
    const ProblemSpec spec{rs_a1xa1(), 16.0, 2.5, 64, 1e-6, 10};
    const Solution sol = inject_solution(spec, separable_field(f, f));
    const ResidualGrid res = equation_residual(sol);
    CHECK(res.max_inner > 0.0);
    CHECK(res.max_inner <= 5e-3 * res.max_f2_inner);
}

TEST_CASE("a1xa1 solve matches the separable tensor oracle") {
    const ProblemSpec spec{rs_a1xa1(), 16.0, 2.5, 40, 1e-5, 30};
    const Solution sol = solve_rank2(spec);
    CHECK(sol.converged);
    CHECK(sol.final_residual <= 1e-5);
    CHECK(chamber_preserved(sol));

    double max_val_err = 0.0, max_grad_err = 0.0, val_scale = 0.0, grad_scale = 0.0;
    for (int i = 0; i < sol.grid.n(); ++i) {
        for (int j = 0; j < sol.grid.n(); ++j) {
            if (!sol.inner_node(i, j)) continue;
            const Vec2 z = sol.grid.node_z(i, j);
            const double oracle =
                2.0 * (std::cosh(z.x1) + std::cosh(z.x2) - 2.0);
            const Vec2 oracle_grad{2.0 * std::sinh(z.x1), 2.0 * std::sinh(z.x2)};
            max_val_err = std::max(max_val_err, std::abs(sol.value_at(i, j) - oracle));
            val_scale = std::max(val_scale, std::abs(oracle));
            const Vec2 g = sol.gradient_z(i, j);
            max_grad_err = std::max(
                max_grad_err, std::max(std::abs(g.x1 - oracle_grad.x1),
                                       std::abs(g.x2 - oracle_grad.x2)));
            grad_scale = std::max(grad_scale, oracle_grad.norm());
        }
    }
    REQUIRE(val_scale > 0.0);
    CHECK(max_val_err / val_scale <= 1e-2);
    CHECK(max_grad_err / grad_scale <= 1e-2);
}

TEST_CASE("sector solution agrees with the unreduced disc solve") {
    // shear-0 lattices: reflections are symmetries of the 9-point stencil,
    // so the reduced and unreduced discrete problems have the same solution
    struct Case {
        RootSystem rs;
        double c;
    };
    for (const Case& cs : {Case{rs_a1xa1(), 16.0}, Case{rs_b2(), 64.0}}) {
        const ProblemSpec spec{cs.rs, cs.c, 2.0, 17, 1e-9, 30};
        const Solution sol = solve_rank2(spec);
        const FullDisc full(cs.rs, cs.c, 2.0, 17, 1e-9, 30);
        double worst = 0.0;
        for (int i = 0; i < sol.grid.n(); ++i) {
            for (int j = 0; j < sol.grid.n(); ++j) {
                if (sol.grid.node_class(i, j) == SectorGrid::NodeClass::outside)
                    continue;
                const double expect = full.at(i, j) - full.at(0, 0);
                worst = std::max(worst, std::abs(sol.value_at(i, j) - expect));
                // the disc solve must itself be Weyl-symmetric: spot check
                // the low-wall reflection
                if (sol.grid.resolve(i, -j) >= 0) {
                    worst = std::max(worst, std::abs(full.at(i, j) - full.at(i, -j)));
                }
            }
        }
        CHECK(worst <= 1e-7);
    }
}

TEST_CASE("hexagonal sector solve stays near the unreduced disc solve") {
    // shear-1 reflections are not stencil symmetries, so the two solves
    // differ by wall discretization error only
    const ProblemSpec spec{rs_a2(), 32.0, 2.0, 21, 1e-8, 30};
    const Solution sol = solve_rank2(spec);
    const FullDisc full(rs_a2(), 32.0, 2.0, 21, 1e-8, 30);
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < sol.grid.n(); ++i) {
        for (int j = 0; j < sol.grid.n(); ++j) {
            if (sol.grid.node_class(i, j) == SectorGrid::NodeClass::outside) continue;
            const double expect = full.at(i, j) - full.at(0, 0);
            worst = std::max(worst, std::abs(sol.value_at(i, j) - expect));
            scale = std::max(scale, std::abs(expect));
        }
    }
    CHECK(worst <= 2e-2 * scale);
}

TEST_CASE("doubling c twice scales the solution by sqrt 2") {
    const ProblemSpec base{rs_a1xa1(), 16.0, 2.0, 32, 1e-7, 30};
    ProblemSpec scaled = base;
    scaled.c = 64.0;
    const Solution lo = solve_rank2(base);
    const Solution hi = solve_rank2(scaled);
    for (int i = 0; i < lo.grid.n(); ++i) {
        for (int j = 0; j < lo.grid.n(); ++j) {
            if (!lo.inner_node(i, j)) continue;
            if (std::abs(lo.value_at(i, j)) < 1e-2) continue;
            CHECK(hi.value_at(i, j) / lo.value_at(i, j) ==
                  doctest::Approx(std::sqrt(2.0)).epsilon(1e-5));
        }
    }
}

TEST_CASE("solution json and csv round trips") {
    const ProblemSpec spec{rs_b2(), 64.0, 1.5, 16, 1e-4, 20};
    const Solution sol = solve_rank2(spec);
    nlohmann::json j;
    to_json(j, sol);
    const Solution back = solution_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.spec.grid_n == spec.grid_n);
    CHECK(back.spec.c == spec.c);
    CHECK(back.iterations == sol.iterations);
    CHECK(back.converged == sol.converged);
    CHECK(back.final_residual == sol.final_residual);
    REQUIRE(back.values.size() == sol.values.size());
    for (std::size_t f = 0; f < sol.values.size(); ++f) {
        if (std::isfinite(sol.values[f])) {
            CHECK(back.values[f] == sol.values[f]);
        } else {
            CHECK(!std::isfinite(back.values[f]));
        }
    }

    std::ostringstream os;
    solution_to_csv(sol, os);
    const std::string text = os.str();
    CHECK(text.rfind("i,j,x1,x2,value,residual\n", 0) == 0);
    std::ostringstream again;
    solution_to_csv(sol, again);
    CHECK(again.str() == text);

    nlohmann::json bad = j;
    bad["kind"] = "profile";
    CHECK_THROWS_AS(solution_from_json(bad), std::invalid_argument);
    bad = j;
    bad["values"] = std::vector<double>{1.0};
    CHECK_THROWS_AS(solution_from_json(bad), std::invalid_argument);
    bad = j;
    bad["values"][static_cast<std::size_t>(sol.grid.flat(0, 0))] = nullptr;
    CHECK_THROWS_AS(solution_from_json(bad), std::invalid_argument);
}

TEST_CASE("problem spec validation rejects out-of-range fields") {
    const ProblemSpec good{rs_a2(), 32.0, 2.0, 24, 1e-6, 20};
    CHECK_NOTHROW(validate(good));
    ProblemSpec bad = good;
    bad.c = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = good;
    bad.radius = -1.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = good;
    bad.grid_n = 15;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = good;
    bad.tol = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = good;
    bad.max_iter = 0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    const RootSystem a1 = build_root_system(Family::a1, {{"lambda", 1}});
    CHECK_THROWS_AS(solve_rank2(ProblemSpec{a1, 1.0, 2.0, 24, 1e-6, 20}),
                    std::invalid_argument);
}
