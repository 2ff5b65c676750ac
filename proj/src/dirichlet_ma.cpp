#include "macy/ma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace macy {

StencilLattice StencilLattice::box(int n1, int n2, double h, int reach) {
    StencilLattice lat;
    lat.n1 = n1;
    lat.n2 = n2;
    lat.margin = reach;
    lat.h = h;
    const int p1 = n1 + 2 * reach;
    const int p2 = n2 + 2 * reach;
    lat.resolve.assign(static_cast<std::size_t>(p1) * p2, -1);
    lat.is_active.assign(static_cast<std::size_t>(n1) * n2, 0);
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
            lat.resolve[static_cast<std::size_t>((i + reach) * p2 + (j + reach))] =
                i * n2 + j;
            const bool interior = i >= reach && i < n1 - reach && j >= reach &&
                                  j < n2 - reach;
            lat.is_active[static_cast<std::size_t>(i * n2 + j)] = interior ? 1 : 0;
        }
    }
    return lat;
}

std::vector<DirPair> monotone_direction_pairs(bool wide) {
    std::vector<DirPair> pairs = {
        {1, 0, 0, 1}, {1, 1, 1, -1}, {2, 1, -1, 2}, {1, 2, -2, 1}};
    if (wide) {
        pairs.push_back({3, 1, -1, 3});
        pairs.push_back({1, 3, -3, 1});
        pairs.push_back({3, 2, -2, 3});
        pairs.push_back({2, 3, -3, 2});
    }
    return pairs;
}

namespace {

/** Solves (A - u)(B - u) = q for the smaller root, the value that keeps both
 *  second differences of the pair nonnegative. */
double pair_root(double a, double b, double q) {
    const double mid = 0.5 * (a + b);
    const double gap = 0.5 * (a - b);
    return mid - std::sqrt(gap * gap + q);
}

}  // namespace

double monotone_ma_sweeps(const StencilLattice& lat, const std::vector<DirPair>& pairs,
                          const std::vector<double>& rhs, std::vector<double>& u,
                          int max_sweeps, double tol) {
    const int n1 = lat.n1;
    const int n2 = lat.n2;
    const double h2 = lat.h * lat.h;

    struct PairGeom {
        DirPair d;
        double qa, qb;  // |a|^2 h^2 and |b|^2 h^2
    };
    std::vector<PairGeom> geom;
    geom.reserve(pairs.size());
    for (const DirPair& p : pairs) {
        geom.push_back({p, h2 * (p.a1 * p.a1 + p.a2 * p.a2),
                        h2 * (p.b1 * p.b1 + p.b2 * p.b2)});
    }

    double delta = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const bool forward = (sweep % 2) == 0;
        delta = 0.0;
        double umax = 1.0;
        for (int step = 0; step < n1 * n2; ++step) {
            const int flat = forward ? step : n1 * n2 - 1 - step;
            if (!lat.is_active[static_cast<std::size_t>(flat)]) continue;
            const int i = flat / n2;
            const int j = flat % n2;
            double best = std::numeric_limits<double>::infinity();
            for (const PairGeom& g : geom) {
                const int ap = lat.at(i + g.d.a1, j + g.d.a2);
                const int am = lat.at(i - g.d.a1, j - g.d.a2);
                const int bp = lat.at(i + g.d.b1, j + g.d.b2);
                const int bm = lat.at(i - g.d.b1, j - g.d.b2);
                const double a = 0.5 * (u[static_cast<std::size_t>(ap)] +
                                        u[static_cast<std::size_t>(am)]);
                const double b = 0.5 * (u[static_cast<std::size_t>(bp)] +
                                        u[static_cast<std::size_t>(bm)]);
                const double q = 0.25 * rhs[static_cast<std::size_t>(flat)] * g.qa * g.qb;
                best = std::min(best, pair_root(a, b, q));
            }
            const double old = u[static_cast<std::size_t>(flat)];
            u[static_cast<std::size_t>(flat)] = best;
            delta = std::max(delta, std::abs(best - old));
            umax = std::max(umax, std::abs(best));
        }
        if (delta <= tol * umax) break;
    }
    return delta;
}

namespace {

struct NinePoint {
    double d11, d22, d12;
    int e, w, n, s, ne, nw, se, sw;  // resolved flat value indices
};

NinePoint nine_point(const StencilLattice& lat, const std::vector<double>& u, int i,
                     int j) {
    NinePoint p;
    p.e = lat.at(i + 1, j);
    p.w = lat.at(i - 1, j);
    p.n = lat.at(i, j + 1);
    p.s = lat.at(i, j - 1);
    p.ne = lat.at(i + 1, j + 1);
    p.nw = lat.at(i - 1, j + 1);
    p.se = lat.at(i + 1, j - 1);
    p.sw = lat.at(i - 1, j - 1);
    const double h2 = lat.h * lat.h;
    const double uc = u[static_cast<std::size_t>(i * lat.n2 + j)];
    p.d11 = (u[static_cast<std::size_t>(p.e)] - 2.0 * uc +
             u[static_cast<std::size_t>(p.w)]) /
            h2;
    p.d22 = (u[static_cast<std::size_t>(p.n)] - 2.0 * uc +
             u[static_cast<std::size_t>(p.s)]) /
            h2;
    p.d12 = (u[static_cast<std::size_t>(p.ne)] + u[static_cast<std::size_t>(p.sw)] -
             u[static_cast<std::size_t>(p.nw)] - u[static_cast<std::size_t>(p.se)]) /
            (4.0 * h2);
    return p;
}

/** Axis and diagonal second differences stay nonnegative up to slack; the
 *  cone the damped Newton iteration is confined to. */
bool discretely_convex(const StencilLattice& lat, const std::vector<double>& u,
                       double slack) {
    for (int i = 0; i < lat.n1; ++i) {
        for (int j = 0; j < lat.n2; ++j) {
            if (!lat.is_active[static_cast<std::size_t>(i * lat.n2 + j)]) continue;
            const double uc = u[static_cast<std::size_t>(i * lat.n2 + j)];
            const int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
            for (const auto& d : dirs) {
                const int p = lat.at(i + d[0], j + d[1]);
                const int m = lat.at(i - d[0], j - d[1]);
                if (u[static_cast<std::size_t>(p)] + u[static_cast<std::size_t>(m)] -
                        2.0 * uc <
                    -slack) {
                    return false;
                }
            }
        }
    }
    return true;
}

}  // namespace

NewtonReport newton_ma_solve(const StencilLattice& lat, const std::vector<double>& rhs,
                             std::vector<double>& u, double tol, int max_newton) {
    const int n2 = lat.n2;
    std::vector<int> unknown_of(u.size(), -1);
    std::vector<int> flats;
    for (std::size_t f = 0; f < lat.is_active.size(); ++f) {
        if (lat.is_active[f]) {
            unknown_of[f] = static_cast<int>(flats.size());
            flats.push_back(static_cast<int>(f));
        }
    }
    const int m = static_cast<int>(flats.size());

    const auto normalized_residual = [&](const std::vector<double>& v,
                                         Eigen::VectorXd* out) {
        double worst = 0.0;
        for (int r = 0; r < m; ++r) {
            const int flat = flats[static_cast<std::size_t>(r)];
            const NinePoint p = nine_point(lat, v, flat / n2, flat % n2);
            const double res = p.d11 * p.d22 - p.d12 * p.d12 -
                               rhs[static_cast<std::size_t>(flat)];
            if (out) (*out)[r] = res;
            worst = std::max(worst,
                             std::abs(res) /
                                 (1.0 + std::abs(rhs[static_cast<std::size_t>(flat)])));
        }
        return worst;
    };

    NewtonReport rep;
    rep.residual_inf = normalized_residual(u, nullptr);
    if (rep.residual_inf <= tol) {
        rep.ok = true;
        return rep;
    }

    Eigen::SparseMatrix<double> jac(m, m);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analyzed = false;
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd res(m);
    std::vector<double> trial(u.size());

    for (int it = 0; it < max_newton; ++it) {
        trips.clear();
        const double h2 = lat.h * lat.h;
        for (int r = 0; r < m; ++r) {
            const int flat = flats[static_cast<std::size_t>(r)];
            const int i = flat / n2;
            const int j = flat % n2;
            const NinePoint p = nine_point(lat, u, i, j);
            res[r] = p.d11 * p.d22 - p.d12 * p.d12 - rhs[static_cast<std::size_t>(flat)];
            const auto add = [&](int value_idx, double coeff) {
                const int col = unknown_of[static_cast<std::size_t>(value_idx)];
                if (col >= 0) trips.emplace_back(r, col, coeff);
            };
            add(flat, -2.0 * (p.d11 + p.d22) / h2);
            add(p.e, p.d22 / h2);
            add(p.w, p.d22 / h2);
            add(p.n, p.d11 / h2);
            add(p.s, p.d11 / h2);
            add(p.ne, -p.d12 / (2.0 * h2));
            add(p.sw, -p.d12 / (2.0 * h2));
            add(p.nw, p.d12 / (2.0 * h2));
            add(p.se, p.d12 / (2.0 * h2));
        }
        jac.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed) {
            lu.analyzePattern(jac);
            analyzed = true;
        }
        lu.factorize(jac);
        if (lu.info() != Eigen::Success) {
            rep.iterations = it;
            rep.residual_inf = normalized_residual(u, nullptr);
            rep.ok = false;
            return rep;
        }
        const Eigen::VectorXd delta = lu.solve(-res);

        double umax = 1.0;
        for (std::size_t f = 0; f < u.size(); ++f) umax = std::max(umax, std::abs(u[f]));
        const double slack = 1e-11 * umax;

        // The operator is quadratic in u, so along the Newton direction the
        // residual is (1 - s) res + s^2 B(delta, delta). Damping until the
        // residual actually drops therefore always succeeds away from the
        // rounding floor, and it blocks the overshoot a convexity check alone
        // would wave through.
        const double res_old = rep.residual_inf;
        double step = 1.0;
        double trial_res = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int halving = 0; halving <= 24; ++halving) {
            trial = u;
            for (int r = 0; r < m; ++r) {
                trial[static_cast<std::size_t>(flats[static_cast<std::size_t>(r)])] +=
                    step * delta[r];
            }
            if (discretely_convex(lat, trial, slack)) {
                trial_res = normalized_residual(trial, nullptr);
                if (trial_res <= (1.0 - 0.25 * step) * res_old) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            // stagnation, typically the discrete rounding floor
            rep.iterations = it;
            rep.ok = rep.residual_inf <= tol;
            return rep;
        }
        u = trial;

        rep.iterations = it + 1;
        rep.residual_inf = trial_res;
        if (rep.residual_inf <= tol) {
            rep.ok = true;
            return rep;
        }
    }
    rep.ok = rep.residual_inf <= tol;
    return rep;
}

}  // namespace macy
