#include "macy/ma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace macy {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double ipow(double base, int e) {
    double out = 1.0;
    for (int i = 0; i < e; ++i) out *= base;
    return out;
}

/** sinh(2t) / (2t), continued across t = 0. */
double sinh_ratio(double t) {
    const double s = 2.0 * t;
    if (std::abs(s) < 1e-4) {
        const double s2 = s * s;
        return 1.0 + s2 / 6.0 + s2 * s2 / 120.0;
    }
    return std::sinh(s) / s;
}

struct LatticeShape {
    bool half_quadrant;
    int shear;
};

LatticeShape lattice_shape(Family family) {
    switch (family) {
        case Family::a1xa1:
            return {false, 0};
        case Family::a2:
            return {false, 1};
        case Family::b2:
            return {true, 0};
        case Family::g2:
            return {true, 1};
        default:
            throw std::invalid_argument("lattice_shape: rank-2 family required");
    }
}

std::pair<int, int> canonical_index(const LatticeShape& s, int i, int j) {
    for (int guard = 0; guard < 64; ++guard) {
        if (j < 0) {
            i += s.shear * j;
            j = -j;
            continue;
        }
        if (s.half_quadrant) {
            if (i < j) {
                std::swap(i, j);
                continue;
            }
        } else if (i < 0) {
            const int nj = j + s.shear * i;
            i = -i;
            j = nj;
            continue;
        }
        return {i, j};
    }
    throw std::logic_error("canonical_index: reflection loop did not terminate");
}

}  // namespace

// ------------------------------------------------------------- SectorGrid

SectorGrid::SectorGrid(const RootSystem& rs, double radius, int grid_n) {
    if (rs.rank() != 2) {
        throw std::invalid_argument("SectorGrid: rank-2 root system required");
    }
    if (!(radius > 0.0) || grid_n < 16) {
        throw std::invalid_argument("SectorGrid: radius must be positive, grid_n >= 16");
    }
    const LatticeShape shape = lattice_shape(rs.family());
    half_quadrant_ = shape.half_quadrant;
    shear_ = shape.shear;
    n_ = grid_n;
    radius_ = radius;
    h_ = radius / static_cast<double>(grid_n - 1);
    reach_ = grid_n <= 128 ? 2 : 3;
    t1_ = {1.0, 0.0};
    t2_ = shear_ == 1 ? Vec2{0.5, std::sqrt(3.0) / 2.0} : Vec2{0.0, 1.0};
    basis_ = {t1_.x1, t2_.x1, t1_.x2, t2_.x2};
    inv_basis_t_ = basis_.inverse().transpose();
    det_basis_ = basis_.det();

    const int m = reach_;
    const int pn = n_ + 2 * m;
    resolve_.assign(static_cast<std::size_t>(pn) * pn, -1);
    for (int i = -m; i < n_ + m; ++i) {
        for (int j = -m; j < n_ + m; ++j) {
            const auto [ci, cj] = canonical_index({half_quadrant_, shear_}, i, j);
            const int slot = (i + m) * pn + (j + m);
            resolve_[static_cast<std::size_t>(slot)] =
                in_region_index(ci, cj) ? flat(ci, cj) : -1;
        }
    }

    class_.assign(static_cast<std::size_t>(n_) * n_, NodeClass::outside);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
            if (!in_region_index(i, j)) continue;
            bool closed = true;
            for (int di = -m; di <= m && closed; ++di) {
                for (int dj = -m; dj <= m; ++dj) {
                    if (resolve(i + di, j + dj) < 0) {
                        closed = false;
                        break;
                    }
                }
            }
            class_[static_cast<std::size_t>(flat(i, j))] =
                closed ? NodeClass::active : NodeClass::dirichlet;
            if (closed) active_.push_back(flat(i, j));
        }
    }
}

bool SectorGrid::in_sector_index(int i, int j) const {
    return half_quadrant_ ? (j >= 0 && i >= j) : (i >= 0 && j >= 0);
}

bool SectorGrid::in_region_index(int i, int j) const {
    if (!in_sector_index(i, j)) return false;
    const long long q = static_cast<long long>(i) * i + static_cast<long long>(j) * j +
                        static_cast<long long>(shear_) * i * j;
    const long long rim = static_cast<long long>(n_ - 1) * (n_ - 1);
    return q <= rim;
}

int SectorGrid::resolve(int i, int j) const {
    const int m = reach_;
    const int pn = n_ + 2 * m;
    if (i < -m || i >= n_ + m || j < -m || j >= n_ + m) {
        // outside the cached band: canonicalize directly
        const auto [ci, cj] = canonical_index({half_quadrant_, shear_}, i, j);
        return in_region_index(ci, cj) ? flat(ci, cj) : -1;
    }
    return resolve_[static_cast<std::size_t>((i + m) * pn + (j + m))];
}

StencilLattice SectorGrid::lattice() const {
    StencilLattice lat;
    lat.n1 = n_;
    lat.n2 = n_;
    lat.margin = reach_;
    lat.h = h_;
    lat.resolve = resolve_;
    lat.is_active.assign(static_cast<std::size_t>(n_) * n_, 0);
    for (int f : active_) lat.is_active[static_cast<std::size_t>(f)] = 1;
    return lat;
}

// ----------------------------------------------------------- CoshSurrogate

CoshSurrogate::CoshSurrogate(const RootSystem& rs, std::vector<double> kappa,
                             std::vector<double> alpha)
    : kappa_(std::move(kappa)), alpha_(std::move(alpha)) {
    groups_ = parameter_groups(rs);
    if (kappa_.size() != groups_.size() || alpha_.size() != groups_.size()) {
        throw std::invalid_argument(
            "CoshSurrogate: one (kappa, alpha) pair per covector group required");
    }
    const auto& roots = rs.positive_roots();
    covectors_.reserve(roots.size());
    mults_.reserve(roots.size());
    for (const PositiveRoot& r : roots) {
        covectors_.push_back(r.coeffs);
        mults_.push_back(r.mult);
    }
    group_of_root_.assign(roots.size(), 0);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        for (int idx : groups_[g]) {
            group_of_root_[static_cast<std::size_t>(idx)] = static_cast<int>(g);
        }
    }
}

std::vector<std::vector<int>> CoshSurrogate::parameter_groups(const RootSystem& rs) {
    // one bucket per orbit, in first-seen order
    std::vector<std::string> labels;
    std::vector<std::vector<int>> buckets;
    std::vector<int> bucket_mult;
    const auto& roots = rs.positive_roots();
    for (std::size_t i = 0; i < roots.size(); ++i) {
        std::size_t b = 0;
        while (b < labels.size() && labels[b] != roots[i].orbit) ++b;
        if (b == labels.size()) {
            labels.push_back(roots[i].orbit);
            buckets.emplace_back();
            bucket_mult.push_back(roots[i].mult);
        }
        buckets[b].push_back(static_cast<int>(i));
    }
    // merge buckets of equal multiplicity: the arrangement mirror that swaps
    // the orbits then forces equal surrogate coefficients
    std::vector<std::vector<int>> groups;
    std::vector<int> group_mult;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        std::size_t g = 0;
        while (g < groups.size() && group_mult[g] != bucket_mult[b]) ++g;
        if (g == groups.size()) {
            groups.emplace_back();
            group_mult.push_back(bucket_mult[b]);
        }
        groups[g].insert(groups[g].end(), buckets[b].begin(), buckets[b].end());
    }
    return groups;
}

double CoshSurrogate::value(const Vec2& z) const {
    double out = 0.0;
    for (std::size_t r = 0; r < covectors_.size(); ++r) {
        const int g = group_of_root_[r];
        const double t = alpha_[static_cast<std::size_t>(g)] * covectors_[r].dot(z);
        out += kappa_[static_cast<std::size_t>(g)] * (std::cosh(t) - 1.0);
    }
    return out;
}

Vec2 CoshSurrogate::grad(const Vec2& z) const {
    Vec2 out{0.0, 0.0};
    for (std::size_t r = 0; r < covectors_.size(); ++r) {
        const int g = group_of_root_[r];
        const double a = alpha_[static_cast<std::size_t>(g)];
        const double s = kappa_[static_cast<std::size_t>(g)] * a *
                         std::sinh(a * covectors_[r].dot(z));
        out += covectors_[r] * s;
    }
    return out;
}

Mat2 CoshSurrogate::hess(const Vec2& z) const {
    Mat2 out = Mat2::zero();
    for (std::size_t r = 0; r < covectors_.size(); ++r) {
        const int g = group_of_root_[r];
        const double a = alpha_[static_cast<std::size_t>(g)];
        const double s = kappa_[static_cast<std::size_t>(g)] * a * a *
                         std::cosh(a * covectors_[r].dot(z));
        const Vec2& v = covectors_[r];
        out = out + Mat2{v.x1 * v.x1, v.x1 * v.x2, v.x2 * v.x1, v.x2 * v.x2}.scaled(s);
    }
    return out;
}

C2Field CoshSurrogate::as_field() const {
    const CoshSurrogate copy = *this;
    return C2Field{[copy](const Vec2& z) { return copy.value(z); },
                   [copy](const Vec2& z) { return copy.grad(z); },
                   [copy](const Vec2& z) { return copy.hess(z); }};
}

CoshSurrogate fit_boundary_surrogate(const RootSystem& rs, double c, double radius) {
    if (rs.rank() != 2) {
        throw std::invalid_argument("fit_boundary_surrogate: rank-2 system required");
    }
    const auto groups = CoshSurrogate::parameter_groups(rs);
    const std::size_t ng = groups.size();

    constexpr int kRadii = 8;
    constexpr int kAngles = 16;
    std::vector<Vec2> pts;
    pts.reserve(kRadii * kAngles);
    for (int jr = 0; jr < kRadii; ++jr) {
        const double r = radius * (static_cast<double>(jr) + 0.5) / kRadii;
        for (int k = 0; k < kAngles; ++k) {
            const double phi =
                rs.theta() * (static_cast<double>(k) + 0.5) / kAngles;
            pts.push_back({r * std::cos(phi), r * std::sin(phi)});
        }
    }

    const auto objective = [&](const std::vector<double>& p) {
        std::vector<double> kap(ng), alp(ng);
        for (std::size_t g = 0; g < ng; ++g) {
            kap[g] = std::exp(p[2 * g]);
            alp[g] = std::exp(p[2 * g + 1]);
        }
        const CoshSurrogate s(rs, kap, alp);
        double acc = 0.0;
        for (const Vec2& z : pts) {
            const double f2 = f2_hat(rs, c, z);
            const double lhs = f1_hat(rs, s.grad(z)) * s.hess(z).det();
            if (!(lhs > 0.0) || !(f2 > 0.0)) return 1e12;
            const double d = std::log(lhs / f2);
            acc += d * d;
        }
        return acc / static_cast<double>(pts.size());
    };

    // kappa scale borrowed from the initial-iterate formula; several alpha
    // starts because the residual is multimodal in the growth rate
    double kappa0 = std::sqrt(c) * std::pow(2.0, -0.5 * (rs.n_total() + rs.rank()));
    double mbar = 0.0;
    for (const PositiveRoot& r : rs.positive_roots()) {
        mbar = std::max(mbar, static_cast<double>(r.mult));
    }
    kappa0 *= std::max(mbar, 1.0);

    NelderMeadResult best;
    best.fx = std::numeric_limits<double>::infinity();
    for (const double alpha0 : {1.0, 1.5, 2.0}) {
        std::vector<double> x0;
        for (std::size_t g = 0; g < ng; ++g) {
            x0.push_back(std::log(kappa0));
            x0.push_back(std::log(alpha0));
        }
        const NelderMeadResult r = nelder_mead(objective, x0, 0.5, 1e-13, 4000);
        if (r.fx < best.fx) best = r;
    }

    std::vector<double> kap(ng), alp(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        kap[g] = std::exp(best.x[2 * g]);
        alp[g] = std::exp(best.x[2 * g + 1]);
    }
    return CoshSurrogate(rs, kap, alp);
}

// ------------------------------------------------------------- outer rhs

std::vector<double> outer_rhs(const RootSystem& rs, double c, const StencilLattice& lat,
                              const Mat2& basis, int origin_i, int origin_j,
                              const std::vector<double>& u) {
    const Mat2 inv_t = basis.inverse().transpose();
    const double det2 = basis.det() * basis.det();
    const double h = lat.h;
    const auto& roots = rs.positive_roots();

    std::vector<int> active;
    for (std::size_t f = 0; f < lat.is_active.size(); ++f) {
        if (lat.is_active[f]) active.push_back(static_cast<int>(f));
    }

    std::vector<double> out(u.size(), 0.0);
    parallel_for(active.size(), [&](std::size_t a) {
        const int flat = active[a];
        const int i = flat / lat.n2;
        const int j = flat % lat.n2;
        const auto val = [&](int bi, int bj) {
            return u[static_cast<std::size_t>(lat.at(bi, bj))];
        };
        const auto z_at = [&](int bi, int bj) {
            return basis.apply({h * static_cast<double>(bi - origin_i),
                                h * static_cast<double>(bj - origin_j)});
        };
        const auto grad_at = [&](int bi, int bj) {
            const Vec2 gxi{(val(bi + 1, bj) - val(bi - 1, bj)) / (2.0 * h),
                           (val(bi, bj + 1) - val(bi, bj - 1)) / (2.0 * h)};
            return inv_t.apply(gxi);
        };
        const Vec2 z = z_at(i, j);
        const Vec2 grad_z = grad_at(i, j);

        double prod = det2 * c;
        for (const PositiveRoot& r : roots) {
            const double t = r(z);
            const double rnorm = r.coeffs.norm();
            double eta;
            if (std::abs(t) >= 0.5 * h * rnorm) {
                eta = r(grad_z) / t;
            } else {
                // wall node for this root: the ratio is 0/0 here, but it is
                // even across the wall, so neighbors one step off the wall
                // carry it to O(h^2) without lagging an iterate; average over
                // every neighbor at the maximal wall distance, because that
                // tie set is reflection-closed and a scan-order pick is not
                double tb = 0.0;
                for (int di = -1; di <= 1; ++di) {
                    for (int dj = -1; dj <= 1; ++dj) {
                        tb = std::max(tb, std::abs(r(z_at(i + di, j + dj))));
                    }
                }
                if (tb >= 0.5 * h * rnorm) {
                    double acc = 0.0;
                    int cnt = 0;
                    for (int di = -1; di <= 1; ++di) {
                        for (int dj = -1; dj <= 1; ++dj) {
                            const double tn = r(z_at(i + di, j + dj));
                            if (std::abs(tn) >= (1.0 - 1e-9) * tb) {
                                acc += r(grad_at(i + di, j + dj)) / tn;
                                cnt += 1;
                            }
                        }
                    }
                    eta = acc / static_cast<double>(cnt);
                } else {
                    // all neighbors hug the wall too; fall back to the
                    // normal-normal second derivative of the lagged iterate
                    const double h2 = h * h;
                    const double uc = val(i, j);
                    const double d11 = (val(i + 1, j) - 2.0 * uc + val(i - 1, j)) / h2;
                    const double d22 = (val(i, j + 1) - 2.0 * uc + val(i, j - 1)) / h2;
                    const double d12 = (val(i + 1, j + 1) + val(i - 1, j - 1) -
                                        val(i - 1, j + 1) - val(i + 1, j - 1)) /
                                       (4.0 * h2);
                    const Mat2 hz = inv_t * Mat2{d11, d12, d12, d22} * inv_t.transpose();
                    const Vec2 nu = r.coeffs * (1.0 / rnorm);
                    eta = nu.dot(hz.apply(nu));
                }
            }
            eta = std::max(eta, 1e-8);
            prod *= ipow(sinh_ratio(t) / eta, r.mult);
        }
        out[static_cast<std::size_t>(flat)] = std::max(prod, 0.0);
    });
    return out;
}

OuterReport outer_fixed_point(const RootSystem& rs, double c, const StencilLattice& lat,
                              const Mat2& basis, int origin_i, int origin_j,
                              const std::vector<DirPair>& pairs,
                              const std::function<double(const std::vector<double>&)>&
                                  residual,
                              std::vector<double>& u, double tol, int max_iter) {
    std::vector<int> active;
    for (std::size_t f = 0; f < lat.is_active.size(); ++f) {
        if (lat.is_active[f]) active.push_back(static_cast<int>(f));
    }
    // step control watches only nodes whose ratio stencils stay clear of the
    // Dirichlet band: where a stencil reads band data, the induced rhs carries
    // that data's fixed error amplified by 1/h^2, so the node has no fixed
    // point to converge to and would veto every step
    std::vector<int> referee;
    for (const int f : active) {
        const int i = f / lat.n2;
        const int j = f % lat.n2;
        bool free_box = true;
        for (int di = -2; di <= 2 && free_box; ++di) {
            for (int dj = -2; dj <= 2; ++dj) {
                const int r = lat.at(i + di, j + dj);
                if (r < 0 || !lat.is_active[static_cast<std::size_t>(r)]) {
                    free_box = false;
                    break;
                }
            }
        }
        if (free_box) referee.push_back(f);
    }
    if (referee.empty()) referee = active;

    const auto dirichlet_solve = [&](const std::vector<double>& g,
                                     std::vector<double>& v) {
        NewtonReport nr = newton_ma_solve(lat, g, v, 1e-11, 50);
        if (!nr.ok) {
            monotone_ma_sweeps(lat, pairs, g, v, 300, 1e-6);
            newton_ma_solve(lat, g, v, 1e-11, 50);
        }
    };
    // self-consistency gap: how far the rhs an iterate induces sits from the
    // rhs it was solved with; zero exactly at the fixed point, so this is the
    // quantity the step control must drive down (the equation residual alone
    // plateaus at discretization noise and cannot referee slow drift)
    const auto log_gap = [&](const std::vector<double>& induced,
                             const std::vector<double>& used) {
        double d = 0.0;
        for (const int f : referee) {
            const double a = std::max(induced[static_cast<std::size_t>(f)], 1e-300);
            const double b = std::max(used[static_cast<std::size_t>(f)], 1e-300);
            d = std::max(d, std::abs(std::log(a / b)));
        }
        return d;
    };

    // bootstrap: monotone sweeps carry the start iterate into the basin of
    // the 9-point Newton solve for the first right-hand side
    std::vector<double> g_acc = outer_rhs(rs, c, lat, basis, origin_i, origin_j, u);
    monotone_ma_sweeps(lat, pairs, g_acc, u, 400, 1e-4);
    dirichlet_solve(g_acc, u);
    std::vector<double> g_new = outer_rhs(rs, c, lat, basis, origin_i, origin_j, u);
    double gap_acc = log_gap(g_new, g_acc);
    double rel_acc = residual(u);

    OuterReport rep{1, rel_acc, rel_acc <= tol};
    std::vector<double> u_acc = u;
    std::vector<double> best_u = u;
    double best_rel = rel_acc;

    double omega = 0.5;
    for (int attempt = 1; attempt < max_iter && !rep.converged; ++attempt) {
        std::vector<double> g_try(g_acc.size(), 0.0);
        for (const int f : active) {
            const double a = std::max(g_acc[static_cast<std::size_t>(f)], 1e-300);
            const double b = std::max(g_new[static_cast<std::size_t>(f)], 1e-300);
            g_try[static_cast<std::size_t>(f)] =
                std::exp((1.0 - omega) * std::log(a) + omega * std::log(b));
        }
        u = u_acc;
        dirichlet_solve(g_try, u);
        std::vector<double> g_next = outer_rhs(rs, c, lat, basis, origin_i, origin_j, u);
        const double gap_try = log_gap(g_next, g_try);

        // every attempt is a valid solve of its own Dirichlet problem, so a
        // rejected step can still be the best answer seen
        const double rel_try = residual(u);
        rep.solves += 1;
        if (rel_try < best_rel) {
            best_rel = rel_try;
            best_u = u;
        }
        if (rel_try <= tol) {
            rep.converged = true;
            break;
        }

        if (gap_try <= 0.999 * gap_acc || gap_try <= 1e-12) {
            omega = std::min(0.9, 1.3 * omega);
            u_acc = u;
            g_acc = std::move(g_try);
            g_new = std::move(g_next);
            gap_acc = gap_try;
        } else {
            omega *= 0.5;
            if (omega < 1.0 / 64.0) break;
        }
    }

    u = std::move(best_u);
    rep.residual = best_rel;
    return rep;
}

// ---------------------------------------------------------------- Solution

void validate(const ProblemSpec& spec) {
    if (!(spec.c > 0.0)) throw std::invalid_argument("ProblemSpec: c must be positive");
    if (!(spec.radius > 0.0)) {
        throw std::invalid_argument("ProblemSpec: radius must be positive");
    }
    if (spec.grid_n < 16) throw std::invalid_argument("ProblemSpec: grid_n must be >= 16");
    if (!(spec.tol > 0.0)) throw std::invalid_argument("ProblemSpec: tol must be positive");
    if (spec.max_iter < 1) {
        throw std::invalid_argument("ProblemSpec: max_iter must be >= 1");
    }
}

double Solution::value_at(int i, int j) const {
    return values[static_cast<std::size_t>(grid.flat(i, j))];
}

Vec2 Solution::gradient_z(int i, int j) const {
    const double h = grid.h();
    const int e = grid.resolve(i + 1, j);
    const int w = grid.resolve(i - 1, j);
    const int n = grid.resolve(i, j + 1);
    const int s = grid.resolve(i, j - 1);
    if (e < 0 || w < 0 || n < 0 || s < 0) return {kNan, kNan};
    const Vec2 gxi{(values[static_cast<std::size_t>(e)] -
                    values[static_cast<std::size_t>(w)]) /
                       (2.0 * h),
                   (values[static_cast<std::size_t>(n)] -
                    values[static_cast<std::size_t>(s)]) /
                       (2.0 * h)};
    return grid.inv_basis_t().apply(gxi);
}

Mat2 Solution::hessian_z(int i, int j) const {
    const double h2 = grid.h() * grid.h();
    const auto at = [&](int a, int b) {
        const int idx = grid.resolve(a, b);
        return idx < 0 ? kNan : values[static_cast<std::size_t>(idx)];
    };
    const double uc = at(i, j);
    const double d11 = (at(i + 1, j) - 2.0 * uc + at(i - 1, j)) / h2;
    const double d22 = (at(i, j + 1) - 2.0 * uc + at(i, j - 1)) / h2;
    const double d12 = (at(i + 1, j + 1) + at(i - 1, j - 1) - at(i - 1, j + 1) -
                        at(i + 1, j - 1)) /
                       (4.0 * h2);
    const Mat2 hxi{d11, d12, d12, d22};
    const Mat2 m = grid.inv_basis_t();
    return m * hxi * m.transpose();
}

bool Solution::inner_node(int i, int j) const {
    if (grid.node_class(i, j) != SectorGrid::NodeClass::active) return false;
    const Vec2 z = grid.node_z(i, j);
    const double half = 0.5 * grid.radius();
    if (z.norm2() > half * half * (1.0 + 1e-12)) return false;
    const auto& roots = spec.rs.positive_roots();
    const PositiveRoot& lo = roots.front();
    const PositiveRoot& hi = roots.back();
    const double margin = 2.0 * grid.h() * (1.0 - 1e-12);
    return lo(z) / lo.coeffs.norm() >= margin && hi(z) / hi.coeffs.norm() >= margin;
}

namespace {

double inner_relative_residual(const RootSystem& rs, double c, const Solution& sol) {
    double worst = 0.0;
    double f2max = 0.0;
    const int n = sol.grid.n();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!sol.inner_node(i, j)) continue;
            const Vec2 z = sol.grid.node_z(i, j);
            const double res = f1_hat(rs, sol.gradient_z(i, j)) * sol.hessian_z(i, j).det() -
                               f2_hat(rs, c, z);
            worst = std::max(worst, std::abs(res));
            f2max = std::max(f2max, f2_hat(rs, c, z));
        }
    }
    return worst / std::max(f2max, 1e-300);
}

}  // namespace

Solution solve_rank2(const ProblemSpec& spec) {
    validate(spec);
    if (spec.rs.rank() != 2) {
        throw std::invalid_argument("solve_rank2: rank-2 root system required");
    }
    const RootSystem& rs = spec.rs;
    SectorGrid grid(rs, spec.radius, spec.grid_n);
    const StencilLattice lat = grid.lattice();
    const int n = grid.n();
    const CoshSurrogate sigma = fit_boundary_surrogate(rs, spec.c, spec.radius);

    Solution sol{spec, grid, std::vector<double>(static_cast<std::size_t>(n) * n, kNan),
                 0, 0.0, false};

    // the surrogate doubles as the start iterate: it is strictly convex,
    // W-invariant, and joins the Dirichlet band without a jump that would
    // poison the lagged wall ratios
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (grid.node_class(i, j) == SectorGrid::NodeClass::outside) continue;
            sol.values[static_cast<std::size_t>(grid.flat(i, j))] =
                sigma.value(grid.node_z(i, j));
        }
    }

    const std::vector<DirPair> pairs = monotone_direction_pairs(n > 128);
    Solution probe = sol;
    const auto residual = [&](const std::vector<double>& v) {
        probe.values = v;
        return inner_relative_residual(rs, spec.c, probe);
    };
    const OuterReport rep =
        outer_fixed_point(rs, spec.c, lat, grid.basis(), 0, 0, pairs, residual,
                          sol.values, spec.tol, spec.max_iter);
    sol.iterations = rep.solves;
    sol.final_residual = rep.residual;
    sol.converged = rep.converged;

    // gauge: rho(0) = 0 exactly
    const double shift = sol.values[static_cast<std::size_t>(grid.flat(0, 0))];
    for (double& v : sol.values) {
        if (std::isfinite(v)) v -= shift;
    }
    return sol;
}

Solution inject_solution(const ProblemSpec& spec, const C2Field& rho) {
    validate(spec);
    SectorGrid grid(spec.rs, spec.radius, spec.grid_n);
    const int n = grid.n();
    Solution sol{spec, grid, std::vector<double>(static_cast<std::size_t>(n) * n, kNan),
                 0, 0.0, true};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (grid.node_class(i, j) == SectorGrid::NodeClass::outside) continue;
            sol.values[static_cast<std::size_t>(grid.flat(i, j))] =
                rho.value(grid.node_z(i, j));
        }
    }
    sol.final_residual = inner_relative_residual(spec.rs, spec.c, sol);
    return sol;
}

ResidualGrid equation_residual(const Solution& sol) {
    const RootSystem& rs = sol.spec.rs;
    const int n = sol.grid.n();
    ResidualGrid out;
    out.values.assign(static_cast<std::size_t>(n) * n, kNan);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (sol.grid.node_class(i, j) != SectorGrid::NodeClass::active) continue;
            const Vec2 z = sol.grid.node_z(i, j);
            const double f2 = f2_hat(rs, sol.spec.c, z);
            const double res =
                f1_hat(rs, sol.gradient_z(i, j)) * sol.hessian_z(i, j).det() - f2;
            out.values[static_cast<std::size_t>(sol.grid.flat(i, j))] = res;
            out.max_interior = std::max(out.max_interior, std::abs(res));
            if (sol.inner_node(i, j)) {
                out.max_inner = std::max(out.max_inner, std::abs(res));
                out.max_f2_inner = std::max(out.max_f2_inner, f2);
            }
        }
    }
    return out;
}

bool chamber_preserved(const Solution& sol) {
    const int n = sol.grid.n();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!sol.inner_node(i, j)) continue;
            const Vec2 g = sol.gradient_z(i, j);
            for (const PositiveRoot& r : sol.spec.rs.positive_roots()) {
                if (!(r(g) > 0.0)) return false;
            }
        }
    }
    return true;
}

// ------------------------------------------------------------ serialization

void to_json(nlohmann::json& j, const Solution& sol) {
    nlohmann::json rs_json;
    to_json(rs_json, sol.spec.rs);
    nlohmann::json values = nlohmann::json::array();
    for (double v : sol.values) {
        if (std::isfinite(v)) {
            values.push_back(v);
        } else {
            values.push_back(nullptr);
        }
    }
    j = nlohmann::json{{"kind", "sector_solution"},
                       {"root_system", rs_json},
                       {"c", sol.spec.c},
                       {"radius", sol.spec.radius},
                       {"grid_n", sol.spec.grid_n},
                       {"tol", sol.spec.tol},
                       {"max_iter", sol.spec.max_iter},
                       {"iterations", sol.iterations},
                       {"final_residual", sol.final_residual},
                       {"converged", sol.converged},
                       {"values", std::move(values)}};
}

Solution solution_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "sector_solution") {
        throw std::invalid_argument("solution json: missing kind tag");
    }
    const RootSystem rs = root_system_from_json(j.at("root_system"));
    ProblemSpec spec{rs,
                     j.at("c").get<double>(),
                     j.at("radius").get<double>(),
                     j.at("grid_n").get<int>(),
                     j.at("tol").get<double>(),
                     j.at("max_iter").get<int>()};
    validate(spec);
    SectorGrid grid(rs, spec.radius, spec.grid_n);
    const auto& jv = j.at("values");
    if (!jv.is_array() ||
        jv.size() != static_cast<std::size_t>(grid.n()) * grid.n()) {
        throw std::invalid_argument("solution json: values array has the wrong size");
    }
    std::vector<double> values;
    values.reserve(jv.size());
    for (const auto& entry : jv) {
        values.push_back(entry.is_null() ? kNan : entry.get<double>());
    }
    Solution sol{spec,
                 grid,
                 std::move(values),
                 j.at("iterations").get<int>(),
                 j.at("final_residual").get<double>(),
                 j.at("converged").get<bool>()};
    for (int i = 0; i < grid.n(); ++i) {
        for (int j2 = 0; j2 < grid.n(); ++j2) {
            const bool inside =
                grid.node_class(i, j2) != SectorGrid::NodeClass::outside;
            const bool finite = std::isfinite(sol.value_at(i, j2));
            if (inside != finite) {
                throw std::invalid_argument(
                    "solution json: value pattern does not match the region");
            }
        }
    }
    return sol;
}

void solution_to_csv(const Solution& sol, std::ostream& os) {
    const ResidualGrid res = equation_residual(sol);
    const int n = sol.grid.n();
    os << "i,j,x1,x2,value,residual\n";
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (sol.grid.node_class(i, j) == SectorGrid::NodeClass::outside) continue;
            const Vec2 z = sol.grid.node_z(i, j);
            os << i << "," << j << "," << format_double(z.x1) << ","
               << format_double(z.x2) << "," << format_double(sol.value_at(i, j))
               << ",";
            const double r = res.values[static_cast<std::size_t>(sol.grid.flat(i, j))];
            if (std::isfinite(r)) os << format_double(r);
            os << "\n";
        }
    }
}

}  // namespace macy
