#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macy/geometry.hpp"

namespace macy {

/** Closed axis-aligned box. Rank-1 boxes use the x1 bounds only. */
struct BorelBox {
    Vec2 lo;
    Vec2 hi;
};

/** Subdifferential at a point: a compact convex polytope given by its
 *  vertices. Rank-1 sets are intervals (vertices sorted by x1); rank-2 sets
 *  are convex polygons in counterclockwise order. Sets that are genuinely
 *  round (a norm at its apex) are reported as fine polygonal approximations
 *  with kDiscVertexCount vertices. */
struct SubgradientSet {
    int rank = 2;
    std::vector<Vec2> vertices;
    bool is_singleton = false;

    static constexpr int kDiscVertexCount = 256;
};

/** Weight function for the measure identity. When a validity box is given,
 *  quadrature nodes escaping it raise std::domain_error instead of being
 *  clipped silently. */
struct ScalarField {
    std::function<double(Vec2)> eval;
    std::optional<BorelBox> domain;
};

struct IdentityReport {
    double lhs = 0.0;  // integral of F2 over the box
    double rhs = 0.0;  // integral of F1 over the gradient image of the box
    double residual() const;
};

/** Convex function on a rank-1 or rank-2 flat space. Two representations:
 *  values on a uniform grid (extended piecewise linearly on the Freudenthal
 *  triangulation) or one of the closed-form fixtures. Grid construction
 *  validates discrete convexity along axes and diagonals and throws
 *  std::invalid_argument on failure. */
class ConvexFn {
  public:
    int rank() const;
    bool is_grid() const;
    double value(const Vec2& x) const;

    /** Full subdifferential. Interior smooth points give singletons; kinks
     *  give the vertex list of the supporting-slope polytope. Queries outside
     *  the grid domain throw std::domain_error. */
    SubgradientSet subgradient(const Vec2& x) const;

    static ConvexFn from_grid1(double origin, double h, std::vector<double> values);
    static ConvexFn from_grid2(Vec2 origin, double h, int nx, int ny,
                               std::vector<double> values);

    // closed-form fixtures
    static ConvexFn quad_plus_one();           // x1^2 + x2^2 + 1
    static ConvexFn radial_kink();             // |x|+1 inside the unit circle, 2|x| outside
    static ConvexFn l1_kink();                 // |x1|+|x2|+1 inside the unit diamond, doubled outside
    static ConvexFn sqnorm_half(int rank);     // |x|^2 / 2
    static ConvexFn abs_norm(int rank);        // |x|
    static ConvexFn eh_radial(double c);       // rank 1: sqrt(c) cosh(x1)
    static ConvexFn max_affine(std::vector<Vec2> slopes, std::vector<double> offsets);

    // serialization, grid representation only (fixtures are code, not data)
    void to_csv(std::ostream& os) const;
    static ConvexFn from_csv(std::istream& is);
    nlohmann::json to_json() const;
    static ConvexFn from_json(const nlohmann::json& j);

    struct Impl;
    explicit ConvexFn(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    const Impl& impl() const { return *impl_; }

  private:
    std::shared_ptr<const Impl> impl_;
};

/** Monge-Ampere measure of the box: the Lebesgue volume of the subgradient
 *  image. Grid functions and kinky fixtures are rasterized in gradient space
 *  (resolution h/4 for grids); smooth fixtures integrate the Hessian
 *  determinant with Gauss-Legendre panels. */
double ma_measure(const ConvexFn& f, const BorelBox& box);

/** Both sides of the weak-solution identity
 *      integral_B F2 dx  =  integral_{grad f (B)} F1 dp
 *  Rank-1 gradient images are intervals and integrate with quadrature
 *  accuracy; rank-2 images go through the gradient-space raster. */
IdentityReport weighted_ma_identity_check(const ConvexFn& f, const ScalarField& f1,
                                          const ScalarField& f2, const BorelBox& box);

}  // namespace macy
