#include "macy/convex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "macy/numerics.hpp"

namespace macy {

namespace {

constexpr double kPointTol = 1e-12;

double cross(const Vec2& a, const Vec2& b) { return a.x1 * b.x2 - a.x2 * b.x1; }

void dedup_points(std::vector<Vec2>& pts, double tol) {
    std::vector<Vec2> out;
    for (const Vec2& p : pts) {
        bool known = false;
        for (const Vec2& q : out)
            if (q.inf_dist(p) < tol) {
                known = true;
                break;
            }
        if (!known) out.push_back(p);
    }
    pts.swap(out);
}

/** Monotone-chain convex hull, counterclockwise, degenerate inputs allowed
 *  (returns the point or segment as is). */
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    dedup_points(pts, kPointTol);
    if (pts.size() <= 2) return pts;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x1 < b.x1 || (a.x1 == b.x1 && a.x2 < b.x2);
    });
    const std::size_t n = pts.size();
    std::vector<Vec2> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

SubgradientSet make_set(int rank, std::vector<Vec2> pts) {
    SubgradientSet s;
    s.rank = rank;
    if (rank == 1) {
        dedup_points(pts, kPointTol);
        std::sort(pts.begin(), pts.end(),
                  [](const Vec2& a, const Vec2& b) { return a.x1 < b.x1; });
        if (pts.size() > 2) pts = {pts.front(), pts.back()};
        s.vertices = std::move(pts);
    } else {
        s.vertices = convex_hull(std::move(pts));
    }
    s.is_singleton = s.vertices.size() == 1;
    return s;
}

bool point_in_convex_polygon(const std::vector<Vec2>& poly, const Vec2& p, double tol) {
    if (poly.empty()) return false;
    if (poly.size() == 1) return poly[0].inf_dist(p) <= tol;
    if (poly.size() == 2) {
        const Vec2 d = poly[1] - poly[0];
        const double len2 = d.norm2();
        if (len2 == 0.0) return poly[0].inf_dist(p) <= tol;
        const double t = (p - poly[0]).dot(d) / len2;
        if (t < -tol || t > 1.0 + tol) return false;
        const Vec2 proj = poly[0] + d * std::clamp(t, 0.0, 1.0);
        return (p - proj).norm() <= tol;
    }
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        // cross product scales with the edge length; normalize so tol is a distance
        if (cross(b - a, p - a) < -tol * (b - a).norm()) return false;
    }
    return true;
}

/** Occupancy grid in gradient space; covered-cell count times the cell area
 *  approximates the area of a union of convex sets. */
class GradientRaster {
  public:
    GradientRaster(const Vec2& lo, const Vec2& hi, double cell) : lo_(lo), cell_(cell) {
        nx_ = std::max(1, static_cast<int>(std::ceil((hi.x1 - lo.x1) / cell))) + 1;
        ny_ = std::max(1, static_cast<int>(std::ceil((hi.x2 - lo.x2) / cell))) + 1;
        covered_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), 0);
    }

    void mark_polytope(const std::vector<Vec2>& poly) {
        if (poly.empty()) return;
        Vec2 lo = poly[0], hi = poly[0];
        for (const Vec2& v : poly) {
            lo.x1 = std::min(lo.x1, v.x1);
            lo.x2 = std::min(lo.x2, v.x2);
            hi.x1 = std::max(hi.x1, v.x1);
            hi.x2 = std::max(hi.x2, v.x2);
        }
        const int i0 = std::clamp(cell_index(lo.x1 - lo_.x1), 0, nx_ - 1);
        const int i1 = std::clamp(cell_index(hi.x1 - lo_.x1) + 1, 0, nx_ - 1);
        const int j0 = std::clamp(cell_index(lo.x2 - lo_.x2), 0, ny_ - 1);
        const int j1 = std::clamp(cell_index(hi.x2 - lo_.x2) + 1, 0, ny_ - 1);
        const double tol = 0.51 * cell_;
        for (int i = i0; i <= i1; ++i) {
            for (int j = j0; j <= j1; ++j) {
                if (covered_[idx(i, j)]) continue;
                if (point_in_convex_polygon(poly, center(i, j), tol))
                    covered_[idx(i, j)] = 1;
            }
        }
    }

    double area() const {
        std::size_t n = 0;
        for (std::uint8_t c : covered_) n += c;
        return static_cast<double>(n) * cell_ * cell_;
    }

    template <class Fn>
    void for_each_covered(Fn&& fn) const {
        for (int i = 0; i < nx_; ++i)
            for (int j = 0; j < ny_; ++j)
                if (covered_[idx(i, j)]) fn(center(i, j), cell_ * cell_);
    }

  private:
    int cell_index(double offset) const { return static_cast<int>(std::floor(offset / cell_)); }
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(ny_) +
               static_cast<std::size_t>(j);
    }
    Vec2 center(int i, int j) const {
        return {lo_.x1 + (static_cast<double>(i) + 0.5) * cell_,
                lo_.x2 + (static_cast<double>(j) + 0.5) * cell_};
    }

    Vec2 lo_;
    double cell_;
    int nx_, ny_;
    std::vector<std::uint8_t> covered_;
};

void check_box(const BorelBox& box, int rank) {
    if (box.lo.x1 > box.hi.x1 || (rank == 2 && box.lo.x2 > box.hi.x2))
        throw std::invalid_argument("BorelBox: lower corner exceeds upper corner");
}

}  // namespace

double IdentityReport::residual() const { return std::abs(lhs - rhs); }

struct ConvexFn::Impl {
    int rank = 2;

    // grid representation
    bool grid = false;
    Vec2 origin;
    double h = 1.0;
    int nx = 0, ny = 0;
    std::vector<double> values;  // row i (x1 index) major, ny entries per row

    // fixture representation
    enum class MaKind { grid, smooth, kinky };
    MaKind ma_kind = MaKind::grid;
    std::function<double(const Vec2&)> val;
    std::function<SubgradientSet(const Vec2&)> sub;
    std::function<double(const Vec2&)> hess_det;  // smooth fixtures only

    double at(int i, int j) const {
        return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(ny) +
                      static_cast<std::size_t>(j)];
    }
};

namespace {

using Impl = ConvexFn::Impl;

void validate_grid_convexity(const Impl& g) {
    double vmax = 0.0;
    for (double v : g.values) vmax = std::max(vmax, std::abs(v));
    const double tol = -1e-9 * (1.0 + vmax);
    auto second = [&](int i, int j, int di, int dj) {
        return g.at(i + di, j + dj) - 2.0 * g.at(i, j) + g.at(i - di, j - dj);
    };
    if (g.rank == 1) {
        for (int i = 1; i + 1 < g.nx; ++i) {
            if (second(i, 0, 1, 0) < tol)
                throw std::invalid_argument(
                    "grid values are not discretely convex at index " + std::to_string(i));
        }
        return;
    }
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            const bool ix = i >= 1 && i + 1 < g.nx;
            const bool jy = j >= 1 && j + 1 < g.ny;
            if ((ix && second(i, j, 1, 0) < tol) || (jy && second(i, j, 0, 1) < tol) ||
                (ix && jy &&
                 (second(i, j, 1, 1) < tol || second(i, j, 1, -1) < tol)))
                throw std::invalid_argument("grid values are not discretely convex at node (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
}

/** Gradients of the two Freudenthal triangles of cell (i,j); the cell is cut
 *  along the (i,j) to (i+1,j+1) diagonal. */
Vec2 tri_gradient_lower(const Impl& g, int i, int j) {
    return {(g.at(i + 1, j) - g.at(i, j)) / g.h,
            (g.at(i + 1, j + 1) - g.at(i + 1, j)) / g.h};
}

Vec2 tri_gradient_upper(const Impl& g, int i, int j) {
    return {(g.at(i + 1, j + 1) - g.at(i, j + 1)) / g.h,
            (g.at(i, j + 1) - g.at(i, j)) / g.h};
}

bool point_in_unit_triangle(double u, double v, bool lower, double tol) {
    if (u < -tol || u > 1.0 + tol || v < -tol || v > 1.0 + tol) return false;
    return lower ? (v <= u + tol) : (v >= u - tol);
}

SubgradientSet grid2_subgradient(const Impl& g, const Vec2& x) {
    const double sx = (x.x1 - g.origin.x1) / g.h;
    const double sy = (x.x2 - g.origin.x2) / g.h;
    const double tol = 1e-9;
    if (sx < -tol || sx > static_cast<double>(g.nx - 1) + tol || sy < -tol ||
        sy > static_cast<double>(g.ny - 1) + tol)
        throw std::domain_error("subgradient: point lies outside the grid domain");

    std::vector<Vec2> grads;
    const int ci = static_cast<int>(std::floor(sx));
    const int cj = static_cast<int>(std::floor(sy));
    for (int i = ci - 1; i <= ci + 1; ++i) {
        if (i < 0 || i + 1 >= g.nx) continue;
        for (int j = cj - 1; j <= cj + 1; ++j) {
            if (j < 0 || j + 1 >= g.ny) continue;
            const double u = sx - static_cast<double>(i);
            const double v = sy - static_cast<double>(j);
            if (point_in_unit_triangle(u, v, true, tol))
                grads.push_back(tri_gradient_lower(g, i, j));
            if (point_in_unit_triangle(u, v, false, tol))
                grads.push_back(tri_gradient_upper(g, i, j));
        }
    }
    return make_set(2, std::move(grads));
}

SubgradientSet grid1_subgradient(const Impl& g, const Vec2& x) {
    const double s = (x.x1 - g.origin.x1) / g.h;
    const double tol = 1e-9;
    if (s < -tol || s > static_cast<double>(g.nx - 1) + tol)
        throw std::domain_error("subgradient: point lies outside the grid domain");
    auto slope = [&](int k) { return (g.at(k + 1, 0) - g.at(k, 0)) / g.h; };
    const int nearest = static_cast<int>(std::lround(s));
    if (std::abs(s - static_cast<double>(nearest)) <= tol) {
        // node query: interval of one-sided slopes (one-sided at the ends)
        std::vector<Vec2> pts;
        if (nearest > 0) pts.push_back({slope(nearest - 1), 0.0});
        if (nearest + 1 < g.nx) pts.push_back({slope(nearest), 0.0});
        return make_set(1, std::move(pts));
    }
    const int k = std::clamp(static_cast<int>(std::floor(s)), 0, g.nx - 2);
    return make_set(1, {{slope(k), 0.0}});
}

double grid_value(const Impl& g, const Vec2& x) {
    const double sx = (x.x1 - g.origin.x1) / g.h;
    if (g.rank == 1) {
        const int i = std::clamp(static_cast<int>(std::floor(sx)), 0, g.nx - 2);
        const double u = sx - static_cast<double>(i);
        return (1.0 - u) * g.at(i, 0) + u * g.at(i + 1, 0);
    }
    const double sy = (x.x2 - g.origin.x2) / g.h;
    const int i = std::clamp(static_cast<int>(std::floor(sx)), 0, g.nx - 2);
    const int j = std::clamp(static_cast<int>(std::floor(sy)), 0, g.ny - 2);
    const double u = sx - static_cast<double>(i);
    const double v = sy - static_cast<double>(j);
    if (v <= u)
        return g.at(i, j) + u * (g.at(i + 1, j) - g.at(i, j)) +
               v * (g.at(i + 1, j + 1) - g.at(i + 1, j));
    return g.at(i, j) + u * (g.at(i + 1, j + 1) - g.at(i, j + 1)) +
           v * (g.at(i, j + 1) - g.at(i, j));
}

std::vector<Vec2> disc_polygon(double radius) {
    std::vector<Vec2> pts;
    pts.reserve(SubgradientSet::kDiscVertexCount);
    for (int k = 0; k < SubgradientSet::kDiscVertexCount; ++k) {
        const double a =
            2.0 * std::numbers::pi * static_cast<double>(k) /
            static_cast<double>(SubgradientSet::kDiscVertexCount);
        pts.push_back({radius * std::cos(a), radius * std::sin(a)});
    }
    return pts;
}

std::shared_ptr<Impl> make_fixture(int rank, Impl::MaKind kind,
                                   std::function<double(const Vec2&)> val,
                                   std::function<SubgradientSet(const Vec2&)> sub,
                                   std::function<double(const Vec2&)> det = {}) {
    auto impl = std::make_shared<Impl>();
    impl->rank = rank;
    impl->grid = false;
    impl->ma_kind = kind;
    impl->val = std::move(val);
    impl->sub = std::move(sub);
    impl->hess_det = std::move(det);
    return impl;
}

}  // namespace

int ConvexFn::rank() const { return impl_->rank; }
bool ConvexFn::is_grid() const { return impl_->grid; }

double ConvexFn::value(const Vec2& x) const {
    return impl_->grid ? grid_value(*impl_, x) : impl_->val(x);
}

SubgradientSet ConvexFn::subgradient(const Vec2& x) const {
    if (!impl_->grid) return impl_->sub(x);
    return impl_->rank == 1 ? grid1_subgradient(*impl_, x) : grid2_subgradient(*impl_, x);
}

ConvexFn ConvexFn::from_grid1(double origin, double h, std::vector<double> values) {
    if (values.size() < 2)
        throw std::invalid_argument("from_grid1: need at least 2 values");
    if (!(h > 0.0)) throw std::invalid_argument("from_grid1: h must be positive");
    auto impl = std::make_shared<Impl>();
    impl->rank = 1;
    impl->grid = true;
    impl->origin = {origin, 0.0};
    impl->h = h;
    impl->nx = static_cast<int>(values.size());
    impl->ny = 1;
    impl->values = std::move(values);
    validate_grid_convexity(*impl);
    return ConvexFn(std::move(impl));
}

ConvexFn ConvexFn::from_grid2(Vec2 origin, double h, int nx, int ny,
                              std::vector<double> values) {
    if (nx < 2 || ny < 2)
        throw std::invalid_argument("from_grid2: need at least a 2x2 grid");
    if (!(h > 0.0)) throw std::invalid_argument("from_grid2: h must be positive");
    if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
        throw std::invalid_argument("from_grid2: value count does not match extents");
    auto impl = std::make_shared<Impl>();
    impl->rank = 2;
    impl->grid = true;
    impl->origin = origin;
    impl->h = h;
    impl->nx = nx;
    impl->ny = ny;
    impl->values = std::move(values);
    validate_grid_convexity(*impl);
    return ConvexFn(std::move(impl));
}

ConvexFn ConvexFn::quad_plus_one() {
    return ConvexFn(make_fixture(
        2, Impl::MaKind::smooth,
        [](const Vec2& x) { return x.x1 * x.x1 + x.x2 * x.x2 + 1.0; },
        [](const Vec2& x) { return make_set(2, {{2.0 * x.x1, 2.0 * x.x2}}); },
        [](const Vec2&) { return 4.0; }));
}

ConvexFn ConvexFn::sqnorm_half(int rank) {
    if (rank != 1 && rank != 2) throw std::invalid_argument("sqnorm_half: rank must be 1 or 2");
    return ConvexFn(make_fixture(
        rank, Impl::MaKind::smooth,
        [rank](const Vec2& x) {
            return 0.5 * (x.x1 * x.x1 + (rank == 2 ? x.x2 * x.x2 : 0.0));
        },
        [rank](const Vec2& x) {
            return make_set(rank, {{x.x1, rank == 2 ? x.x2 : 0.0}});
        },
        [](const Vec2&) { return 1.0; }));
}

ConvexFn ConvexFn::eh_radial(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("eh_radial: c must be positive");
    const double sc = std::sqrt(c);
    return ConvexFn(make_fixture(
        1, Impl::MaKind::smooth,
        [sc](const Vec2& x) { return sc * std::cosh(x.x1); },
        [sc](const Vec2& x) { return make_set(1, {{sc * std::sinh(x.x1), 0.0}}); },
        [sc](const Vec2& x) { return sc * std::cosh(x.x1); }));
}

ConvexFn ConvexFn::abs_norm(int rank) {
    if (rank == 1) {
        return ConvexFn(make_fixture(
            1, Impl::MaKind::kinky,
            [](const Vec2& x) { return std::abs(x.x1); },
            [](const Vec2& x) {
                if (std::abs(x.x1) <= kPointTol)
                    return make_set(1, {{-1.0, 0.0}, {1.0, 0.0}});
                return make_set(1, {{x.x1 > 0.0 ? 1.0 : -1.0, 0.0}});
            }));
    }
    if (rank != 2) throw std::invalid_argument("abs_norm: rank must be 1 or 2");
    return ConvexFn(make_fixture(
        2, Impl::MaKind::kinky, [](const Vec2& x) { return x.norm(); },
        [](const Vec2& x) {
            const double r = x.norm();
            if (r <= kPointTol) return make_set(2, disc_polygon(1.0));
            return make_set(2, {x * (1.0 / r)});
        }));
}

ConvexFn ConvexFn::radial_kink() {
    return ConvexFn(make_fixture(
        2, Impl::MaKind::kinky,
        [](const Vec2& x) { return std::max(x.norm() + 1.0, 2.0 * x.norm()); },
        [](const Vec2& x) {
            const double r = x.norm();
            if (r <= kPointTol) return make_set(2, disc_polygon(1.0));
            const Vec2 u = x * (1.0 / r);
            if (std::abs(r - 1.0) <= kPointTol) return make_set(2, {u, u * 2.0});
            return make_set(2, {u * (r < 1.0 ? 1.0 : 2.0)});
        }));
}

ConvexFn ConvexFn::l1_kink() {
    auto sub = [](const Vec2& x) {
        const double s = std::abs(x.x1) + std::abs(x.x2);
        double g0 = 1.0, g1 = 1.0;
        if (std::abs(s - 1.0) <= kPointTol) {
            g1 = 2.0;
        } else if (s > 1.0) {
            g0 = g1 = 2.0;
        }
        std::vector<Vec2> dirs;
        const bool z1 = std::abs(x.x1) <= kPointTol;
        const bool z2 = std::abs(x.x2) <= kPointTol;
        const double s1 = x.x1 >= 0.0 ? 1.0 : -1.0;
        const double s2 = x.x2 >= 0.0 ? 1.0 : -1.0;
        if (z1 && z2)
            dirs = {{1.0, 1.0}, {1.0, -1.0}, {-1.0, 1.0}, {-1.0, -1.0}};
        else if (z2)
            dirs = {{s1, -1.0}, {s1, 1.0}};
        else if (z1)
            dirs = {{-1.0, s2}, {1.0, s2}};
        else
            dirs = {{s1, s2}};
        std::vector<Vec2> pts;
        for (const Vec2& d : dirs) {
            pts.push_back(d * g0);
            pts.push_back(d * g1);
        }
        return make_set(2, std::move(pts));
    };
    return ConvexFn(make_fixture(
        2, Impl::MaKind::kinky,
        [](const Vec2& x) {
            const double s = std::abs(x.x1) + std::abs(x.x2);
            return std::max(s + 1.0, 2.0 * s);
        },
        sub));
}

ConvexFn ConvexFn::max_affine(std::vector<Vec2> slopes, std::vector<double> offsets) {
    if (slopes.empty() || slopes.size() != offsets.size())
        throw std::invalid_argument("max_affine: need matching, non-empty slopes and offsets");
    auto value = [slopes, offsets](const Vec2& x) {
        double m = -1e300;
        for (std::size_t k = 0; k < slopes.size(); ++k)
            m = std::max(m, slopes[k].dot(x) + offsets[k]);
        return m;
    };
    auto sub = [slopes, offsets, value](const Vec2& x) {
        const double m = value(x);
        std::vector<Vec2> active;
        for (std::size_t k = 0; k < slopes.size(); ++k)
            if (slopes[k].dot(x) + offsets[k] >= m - 1e-12 * (1.0 + std::abs(m)))
                active.push_back(slopes[k]);
        return make_set(2, std::move(active));
    };
    return ConvexFn(make_fixture(2, Impl::MaKind::kinky, value, sub));
}

namespace {

/** Collects the subgradient polytopes needed to cover the gradient image of
 *  the box: the per-node polytopes of a grid function, or a corner-and-center
 *  sweep with hull bridging for kinky fixtures. */
std::vector<std::vector<Vec2>> gradient_polytopes(const ConvexFn& f, const BorelBox& box) {
    const Impl& g = f.impl();
    std::vector<std::vector<Vec2>> polys;
    if (g.grid) {
        for (int i = 0; i < g.nx; ++i) {
            const double x1 = g.origin.x1 + g.h * static_cast<double>(i);
            if (x1 < box.lo.x1 - kPointTol || x1 > box.hi.x1 + kPointTol) continue;
            for (int j = 0; j < g.ny; ++j) {
                const double x2 = g.origin.x2 + g.h * static_cast<double>(j);
                if (x2 < box.lo.x2 - kPointTol || x2 > box.hi.x2 + kPointTol) continue;
                polys.push_back(f.subgradient({x1, x2}).vertices);
            }
        }
        return polys;
    }

    const int cells = 192;
    const double dx = (box.hi.x1 - box.lo.x1) / cells;
    const double dy = (box.hi.x2 - box.lo.x2) / cells;
    for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) {
            const double a = box.lo.x1 + dx * static_cast<double>(i);
            const double b = box.lo.x2 + dy * static_cast<double>(j);
            std::vector<Vec2> pts;
            for (const Vec2& q : {Vec2{a, b}, Vec2{a + dx, b}, Vec2{a, b + dy},
                                  Vec2{a + dx, b + dy}, Vec2{a + 0.5 * dx, b + 0.5 * dy}}) {
                SubgradientSet s = f.subgradient(q);
                if (s.vertices.size() > 8) polys.push_back(s.vertices);
                pts.insert(pts.end(), s.vertices.begin(), s.vertices.end());
            }
            polys.push_back(convex_hull(std::move(pts)));
        }
    }
    return polys;
}

GradientRaster build_raster(const std::vector<std::vector<Vec2>>& polys, double cell_hint) {
    Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
    for (const auto& poly : polys) {
        for (const Vec2& v : poly) {
            lo.x1 = std::min(lo.x1, v.x1);
            lo.x2 = std::min(lo.x2, v.x2);
            hi.x1 = std::max(hi.x1, v.x1);
            hi.x2 = std::max(hi.x2, v.x2);
        }
    }
    if (lo.x1 > hi.x1) {
        lo = {0.0, 0.0};
        hi = {1.0, 1.0};
    }
    double cell = cell_hint;
    if (!(cell > 0.0)) {
        const double extent = std::max({hi.x1 - lo.x1, hi.x2 - lo.x2, 1e-6});
        cell = extent / 800.0;
    }
    GradientRaster raster({lo.x1 - cell, lo.x2 - cell}, {hi.x1 + cell, hi.x2 + cell}, cell);
    for (const auto& poly : polys) raster.mark_polytope(poly);
    return raster;
}

double rank1_image_lo(const ConvexFn& f, double a) {
    const SubgradientSet s = f.subgradient({a, 0.0});
    return s.vertices.front().x1;
}

double rank1_image_hi(const ConvexFn& f, double b) {
    const SubgradientSet s = f.subgradient({b, 0.0});
    return s.vertices.back().x1;
}

void check_field_domain(const ScalarField& field, const Vec2& p, int rank) {
    if (!field.domain) return;
    const BorelBox& d = *field.domain;
    const bool inside = p.x1 >= d.lo.x1 - kPointTol && p.x1 <= d.hi.x1 + kPointTol &&
                        (rank == 1 ||
                         (p.x2 >= d.lo.x2 - kPointTol && p.x2 <= d.hi.x2 + kPointTol));
    if (!inside)
        throw std::domain_error(
            "weighted_ma_identity_check: quadrature point escapes the field's validity box");
}

int panels_for(double len) {
    return std::clamp(static_cast<int>(std::ceil(len / 0.2)), 1, 64);
}

int panels_for_1d(double len) {
    return std::clamp(static_cast<int>(std::ceil(len / 0.05)), 4, 400);
}

/** Rank-1 density integral.  W-invariant weights are even in x and may kink
 *  on the wall x = 0, so a straddling interval is integrated piecewise. */
double integrate_rank1(const std::function<double(double)>& g, double a, double b) {
    if (a < 0.0 && b > 0.0) {
        return integrate_gl(g, a, 0.0, panels_for_1d(-a)) +
               integrate_gl(g, 0.0, b, panels_for_1d(b));
    }
    return integrate_gl(g, a, b, panels_for_1d(b - a));
}

}  // namespace

double ma_measure(const ConvexFn& f, const BorelBox& box) {
    check_box(box, f.rank());
    const Impl& g = f.impl();

    if (f.rank() == 1) {
        // the gradient image of an interval is an interval
        const double lo = rank1_image_lo(f, box.lo.x1);
        const double hi = rank1_image_hi(f, box.hi.x1);
        return std::max(0.0, hi - lo);
    }

    if (!g.grid && g.ma_kind == Impl::MaKind::smooth) {
        return integrate_gl_2d([&](double x, double y) { return g.hess_det({x, y}); },
                               box.lo.x1, box.hi.x1, box.lo.x2, box.hi.x2,
                               panels_for(box.hi.x1 - box.lo.x1),
                               panels_for(box.hi.x2 - box.lo.x2));
    }

    const auto polys = gradient_polytopes(f, box);
    const double cell_hint = g.grid ? g.h / 4.0 : 0.0;
    return build_raster(polys, cell_hint).area();
}

IdentityReport weighted_ma_identity_check(const ConvexFn& f, const ScalarField& f1,
                                          const ScalarField& f2, const BorelBox& box) {
    check_box(box, f.rank());
    IdentityReport report;

    if (f.rank() == 1) {
        report.lhs = integrate_rank1(
            [&](double x) {
                check_field_domain(f2, {x, 0.0}, 1);
                return f2.eval({x, 0.0});
            },
            box.lo.x1, box.hi.x1);
        const double ilo = rank1_image_lo(f, box.lo.x1);
        const double ihi = rank1_image_hi(f, box.hi.x1);
        if (ihi <= ilo) {
            report.rhs = 0.0;
            return report;
        }
        report.rhs = integrate_rank1(
            [&](double y) {
                check_field_domain(f1, {y, 0.0}, 1);
                return f1.eval({y, 0.0});
            },
            ilo, ihi);
        return report;
    }

    report.lhs = integrate_gl_2d(
        [&](double x, double y) {
            check_field_domain(f2, {x, y}, 2);
            return f2.eval({x, y});
        },
        box.lo.x1, box.hi.x1, box.lo.x2, box.hi.x2,
        std::max(panels_for(box.hi.x1 - box.lo.x1), 4),
        std::max(panels_for(box.hi.x2 - box.lo.x2), 4));

    const Impl& g = f.impl();
    const auto polys = gradient_polytopes(f, box);
    const double cell_hint = g.grid ? g.h / 4.0 : 0.0;
    const GradientRaster raster = build_raster(polys, cell_hint);
    double rhs = 0.0;
    raster.for_each_covered([&](const Vec2& p, double cell_area) {
        check_field_domain(f1, p, 2);
        rhs += f1.eval(p) * cell_area;
    });
    report.rhs = rhs;
    return report;
}

namespace {

std::vector<double> parse_csv_doubles(const std::string& line, const char* what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        const std::string tok = line.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string("csv: bad number in ") + what + ": \"" +
                                        tok + "\"");
        }
        pos = comma + 1;
        if (comma == line.size()) break;
    }
    return out;
}

std::string expect_line(std::istream& is, const char* what) {
    std::string line;
    if (!std::getline(is, line))
        throw std::invalid_argument(std::string("csv: unexpected end of input, wanted ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::string expect_prefixed(std::istream& is, const std::string& prefix) {
    std::string line = expect_line(is, prefix.c_str());
    if (line.rfind(prefix + ",", 0) != 0 && line != prefix)
        throw std::invalid_argument("csv: expected line starting with \"" + prefix + "\"");
    return line.size() > prefix.size() ? line.substr(prefix.size() + 1) : std::string();
}

}  // namespace

void ConvexFn::to_csv(std::ostream& os) const {
    const Impl& g = *impl_;
    if (!g.grid)
        throw std::logic_error("to_csv: only grid-backed functions serialize");
    os << "r," << g.rank << "\n";
    if (g.rank == 1)
        os << "origin," << format_double(g.origin.x1) << "\n";
    else
        os << "origin," << format_double(g.origin.x1) << "," << format_double(g.origin.x2)
           << "\n";
    os << "h," << format_double(g.h) << "\n";
    if (g.rank == 1)
        os << "extents," << g.nx << "\n";
    else
        os << "extents," << g.nx << "," << g.ny << "\n";
    os << "values\n";
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            if (j) os << ",";
            os << format_double(g.at(i, j));
        }
        os << "\n";
    }
}

ConvexFn ConvexFn::from_csv(std::istream& is) {
    const auto r_fields = parse_csv_doubles(expect_prefixed(is, "r"), "r");
    if (r_fields.size() != 1 || (r_fields[0] != 1.0 && r_fields[0] != 2.0))
        throw std::invalid_argument("csv: r must be 1 or 2");
    const int rank = static_cast<int>(r_fields[0]);

    const auto origin = parse_csv_doubles(expect_prefixed(is, "origin"), "origin");
    if (origin.size() != static_cast<std::size_t>(rank))
        throw std::invalid_argument("csv: origin arity does not match r");
    const auto h_fields = parse_csv_doubles(expect_prefixed(is, "h"), "h");
    if (h_fields.size() != 1) throw std::invalid_argument("csv: h must be a single number");
    const auto extents = parse_csv_doubles(expect_prefixed(is, "extents"), "extents");
    if (extents.size() != static_cast<std::size_t>(rank))
        throw std::invalid_argument("csv: extents arity does not match r");

    if (expect_line(is, "values") != "values")
        throw std::invalid_argument("csv: expected the \"values\" marker line");

    const int nx = static_cast<int>(extents[0]);
    const int ny = rank == 2 ? static_cast<int>(extents[1]) : 1;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
    for (int i = 0; i < nx; ++i) {
        const auto row = parse_csv_doubles(expect_line(is, "value row"), "values");
        if (row.size() != static_cast<std::size_t>(ny))
            throw std::invalid_argument("csv: value row " + std::to_string(i) +
                                        " has the wrong width");
        values.insert(values.end(), row.begin(), row.end());
    }
    if (rank == 1) return from_grid1(origin[0], h_fields[0], std::move(values));
    return from_grid2({origin[0], origin[1]}, h_fields[0], nx, ny, std::move(values));
}

nlohmann::json ConvexFn::to_json() const {
    const Impl& g = *impl_;
    if (!g.grid)
        throw std::logic_error("to_json: only grid-backed functions serialize");
    nlohmann::json j;
    j["r"] = g.rank;
    j["origin"] = g.rank == 1 ? nlohmann::json::array({g.origin.x1})
                              : nlohmann::json::array({g.origin.x1, g.origin.x2});
    j["h"] = g.h;
    j["extents"] = g.rank == 1 ? nlohmann::json::array({g.nx})
                               : nlohmann::json::array({g.nx, g.ny});
    j["values"] = g.values;
    return j;
}

ConvexFn ConvexFn::from_json(const nlohmann::json& j) {
    const int rank = j.at("r").get<int>();
    const auto origin = j.at("origin").get<std::vector<double>>();
    const double h = j.at("h").get<double>();
    const auto extents = j.at("extents").get<std::vector<int>>();
    auto values = j.at("values").get<std::vector<double>>();
    if (rank == 1) {
        if (origin.size() != 1 || extents.size() != 1 ||
            values.size() != static_cast<std::size_t>(extents[0]))
            throw std::invalid_argument("json: inconsistent rank-1 grid description");
        return from_grid1(origin[0], h, std::move(values));
    }
    if (rank != 2 || origin.size() != 2 || extents.size() != 2)
        throw std::invalid_argument("json: inconsistent grid description");
    return from_grid2({origin[0], origin[1]}, h, extents[0], extents[1], std::move(values));
}

}  // namespace macy
