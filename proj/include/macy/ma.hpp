#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "macy/geometry.hpp"
#include "macy/numerics.hpp"
#include "macy/rootsys.hpp"

namespace macy {

// --------------------------------------------------------------- densities

/** F1(Z) = prod over positive roots of 2^m |lambda(Z)|^m. Vanishes on walls. */
double f1_hat(const RootSystem& rs, const Vec2& z);

/** F2(Z) = c * prod over positive roots of |sinh 2 lambda(Z)|^m. */
double f2_hat(const RootSystem& rs, double c, const Vec2& z);

// ---------------------------------------------------------------- rank one

/** Even radial potential profile, gauge rho(0) = 0, rho'(0) = 0. Built by
 *  cumulative quadrature of the closed-form first derivative
 *      rho'(x) = (k 2^{-s} c int_0^x sinh^{m1}(2t) sinh^{m2}(4t) dt)^{1/k}
 *  with k = m1 + m2 + 1 and s = m1 + 2 m2; the second derivative is read
 *  back from the equation itself, so the profile satisfies it identically
 *  up to interpolation error. */
class RadialProfile {
  public:
    double x_max() const { return x_max_; }
    double c() const { return c_; }
    int n_nodes() const { return static_cast<int>(xs_.size()); }
    double node(int i) const { return xs_.at(static_cast<std::size_t>(i)); }

    double value(double x) const;
    double deriv(double x) const;
    double second(double x) const;

    int mult_lambda() const { return m1_; }
    int mult_two_lambda() const { return m2_; }

    friend RadialProfile solve_rank1(const RootSystem&, double, double, int);
    friend RadialProfile profile_from_json(const nlohmann::json&);
    friend void to_json(nlohmann::json&, const RadialProfile&);

  private:
    RadialProfile() = default;
    void build_splines();

    double c_ = 1.0;
    double x_max_ = 1.0;
    int m1_ = 1;
    int m2_ = 0;
    std::vector<double> xs_;
    std::vector<double> rho_;
    std::vector<double> drho_;
    CubicHermite rho_spline_;
    CubicHermite drho_spline_;
};

/** Integrates the rank-one reduction on [0, x_max] with n_nodes >= 9 sample
 *  nodes. Throws std::invalid_argument for rank-2 systems or bad arguments. */
RadialProfile solve_rank1(const RootSystem& rs, double c, double x_max, int n_nodes);

/** Pointwise residual F1(rho'(x)) rho''(x) - F2(x) of the rank-one equation,
 *  evaluated through the profile's own interpolants. */
double equation_residual(const RootSystem& rs, const RadialProfile& prof, double x);

void to_json(nlohmann::json& j, const RadialProfile& prof);
RadialProfile profile_from_json(const nlohmann::json& j);
void profile_to_csv(const RadialProfile& prof, std::ostream& os);

// ------------------------------------------------------- analytic two-rank

/** Twice differentiable trial potential given in closed form; used for
 *  boundary surrogates, separable oracles, and residual cross-checks. */
struct C2Field {
    std::function<double(const Vec2&)> value;
    std::function<Vec2(const Vec2&)> grad;
    std::function<Mat2(const Vec2&)> hess;
};

/** rho(Z) = f(x1) + g(x2), the a1xa1 tensor construction. */
C2Field separable_field(const RadialProfile& f, const RadialProfile& g);

/** Pointwise residual F1(grad rho) det Hess rho - F2 for a closed-form rho. */
double equation_residual(const RootSystem& rs, double c, const C2Field& rho,
                         const Vec2& z);

/** W-invariant sum of cosh terms, one (kappa, alpha) pair per covector group:
 *  sigma(Z) = sum_g kappa_g sum_{lambda in g} cosh(alpha_g lambda(Z)), with
 *  the gauge constant removed so sigma(0) = 0. */
class CoshSurrogate {
  public:
    CoshSurrogate(const RootSystem& rs, std::vector<double> kappa,
                  std::vector<double> alpha);

    /** Covector groups: orbits, merged when their multiplicities agree (the
     *  mirror symmetry of the arrangement then forces equal coefficients). */
    static std::vector<std::vector<int>> parameter_groups(const RootSystem& rs);

    double value(const Vec2& z) const;
    Vec2 grad(const Vec2& z) const;
    Mat2 hess(const Vec2& z) const;
    C2Field as_field() const;

    const std::vector<double>& kappa() const { return kappa_; }
    const std::vector<double>& alpha() const { return alpha_; }

  private:
    std::vector<Vec2> covectors_;
    std::vector<int> mults_;
    std::vector<int> group_of_root_;
    std::vector<std::vector<int>> groups_;
    std::vector<double> kappa_;
    std::vector<double> alpha_;
};

/** Fits (kappa, alpha) per group by minimizing the mean squared log of the
 *  equation ratio F1(grad) det Hess / F2 over a radius-angle sample of the
 *  sector. The log form keeps the wall zeros of both sides cancelled, so the
 *  objective stays bounded up to the walls, and it penalizes over- and
 *  undershoot symmetrically. */
CoshSurrogate fit_boundary_surrogate(const RootSystem& rs, double c, double radius);

// ------------------------------------------------- low-level Dirichlet core

/** Index lattice with ghost resolution shared by the two inner solvers.
 *  resolve maps a padded index box (margin extra rings on every side) to a
 *  flat value index or -1; is_active marks the unknowns among those values.
 *  A node that is itself a value slot resolves to flat index i * n2 + j, so
 *  the solvers can recover (i, j) from the value index. Values at non-active
 *  resolvable nodes are Dirichlet data. */
struct StencilLattice {
    int n1 = 0, n2 = 0;
    int margin = 0;
    double h = 1.0;
    std::vector<int> resolve;
    std::vector<unsigned char> is_active;

    int at(int i, int j) const {
        return resolve[static_cast<std::size_t>((i + margin) * (n2 + 2 * margin) +
                                                (j + margin))];
    }
    static StencilLattice box(int n1, int n2, double h, int reach);
};

struct DirPair {
    int a1, a2, b1, b2;  // orthogonal integer directions (a1,a2) and (b1,b2)
};

/** Direction pairs of the monotone determinant stencil; wide = true adds the
 *  step-3 pairs used above 128 nodes per axis. */
std::vector<DirPair> monotone_direction_pairs(bool wide);

/** Gauss-Seidel sweeps on the monotone min-over-pairs discretization of
 *  det D^2 u = rhs. Updates active nodes in place, alternating sweep
 *  direction, and returns the last sweep's max update. */
double monotone_ma_sweeps(const StencilLattice& lat, const std::vector<DirPair>& pairs,
                          const std::vector<double>& rhs, std::vector<double>& u,
                          int max_sweeps, double tol);

struct NewtonReport {
    int iterations = 0;
    double residual_inf = 0.0;
    bool ok = false;
};

/** Damped Newton iteration on the 9-point discretization
 *  D11 u D22 u - D12 u^2 = rhs; steps are halved until the iterate keeps
 *  nonnegative second differences along axes and diagonals. Convergence is
 *  measured on the residual normalized by 1 + |rhs| per node. */
NewtonReport newton_ma_solve(const StencilLattice& lat, const std::vector<double>& rhs,
                             std::vector<double>& u, double tol, int max_newton);

// ---------------------------------------------------------------- rank two

struct ProblemSpec {
    RootSystem rs;
    double c = 1.0;
    double radius = 4.0;
    int grid_n = 64;
    double tol = 1e-6;
    int max_iter = 40;
};

/** Throws std::invalid_argument when a field is out of range. */
void validate(const ProblemSpec& spec);

/** Uniform grid in lattice coordinates Z = h (i t1 + j t2), where the unit
 *  columns t1, t2 run along the two chamber walls. On this lattice every
 *  Weyl reflection is an integer map on indices, so values requested across
 *  a wall resolve to exact in-sector nodes (no interpolation at walls). */
class SectorGrid {
  public:
    enum class NodeClass : unsigned char { outside, dirichlet, active };

    SectorGrid(const RootSystem& rs, double radius, int grid_n);

    int n() const { return n_; }
    double h() const { return h_; }
    double radius() const { return radius_; }
    int reach() const { return reach_; }
    const Mat2& basis() const { return basis_; }         // columns t1, t2
    const Mat2& inv_basis_t() const { return inv_basis_t_; }
    double det_basis() const { return det_basis_; }

    int flat(int i, int j) const { return i * n_ + j; }
    Vec2 node_z(int i, int j) const {
        return {h_ * (i * t1_.x1 + j * t2_.x1), h_ * (i * t1_.x2 + j * t2_.x2)};
    }

    NodeClass node_class(int i, int j) const {
        return class_[static_cast<std::size_t>(flat(i, j))];
    }

    /** Canonical in-region node index for an arbitrary lattice index pair
     *  (reflections applied in exact integer arithmetic), or -1 when the
     *  canonical point lies beyond the truncation arc. */
    int resolve(int i, int j) const;

    const std::vector<int>& active_nodes() const { return active_; }

    /** View of the grid for the Dirichlet solver core. */
    StencilLattice lattice() const;

  private:
    bool in_sector_index(int i, int j) const;
    bool in_region_index(int i, int j) const;

    int n_ = 0;
    double h_ = 0.0;
    double radius_ = 0.0;
    int reach_ = 2;
    bool half_quadrant_ = false;  // sector {i >= j >= 0} (b2, g2)
    int shear_ = 0;               // low-wall reflection (i, j) -> (i + shear j, -j)
    Vec2 t1_, t2_;
    Mat2 basis_, inv_basis_t_;
    double det_basis_ = 1.0;
    std::vector<NodeClass> class_;
    std::vector<int> resolve_;    // padded index box, margin = reach
    std::vector<int> active_;
};

struct Solution {
    ProblemSpec spec;
    SectorGrid grid;
    std::vector<double> values;   // flat n*n, quiet NaN outside the region
    int iterations = 0;
    double final_residual = 0.0;  // relative inner-region equation residual
    bool converged = false;

    double value_at(int i, int j) const;
    /** Centered lattice gradient mapped back to flat coordinates. */
    Vec2 gradient_z(int i, int j) const;
    /** Centered 9-point lattice Hessian mapped back to flat coordinates. */
    Mat2 hessian_z(int i, int j) const;
    /** Active node with full stencil support, |Z| <= R/2, and distance to
     *  both walls at least 2h: the region acceptance statements quantify
     *  over. */
    bool inner_node(int i, int j) const;
};

/** Damped-Newton / monotone-sweep fixed point for the rank-two equation.
 *  Returns the best iterate with converged = false instead of throwing when
 *  the outer loop does not reach spec.tol within spec.max_iter. */
Solution solve_rank2(const ProblemSpec& spec);

/** Builds the grid geometry of spec and samples a closed-form potential on
 *  it, for residual calibration and metric checks on known fields. */
Solution inject_solution(const ProblemSpec& spec, const C2Field& rho);

struct ResidualGrid {
    std::vector<double> values;   // flat n*n, NaN off the interior
    double max_interior = 0.0;    // max |residual| over interior nodes
    double max_inner = 0.0;       // same, restricted to inner_node
    double max_f2_inner = 0.0;    // max F2 over inner nodes, for scaling
};

/** Pointwise lhs - rhs of the weighted determinant equation at interior
 *  nodes, from centered differences and the scheme determinant. */
ResidualGrid equation_residual(const Solution& sol);

/** True when every inner node has lambda(grad rho) > 0 for all positive
 *  roots, the discrete form of gradient chamber preservation. */
bool chamber_preserved(const Solution& sol);

void to_json(nlohmann::json& j, const Solution& sol);
Solution solution_from_json(const nlohmann::json& j);
void solution_to_csv(const Solution& sol, std::ostream& os);

/** Lagged right-hand side of the outer fixed point, in lattice coordinates:
 *  g = det(T)^2 F2(Z) / F1(grad rho) with the wall factors taken as ratio
 *  limits. Z = h T (i - origin_i, j - origin_j); entries are filled at
 *  active nodes and zero elsewhere. Shared by solve_rank2 and the tests
 *  that re-solve on unreduced domains. */
std::vector<double> outer_rhs(const RootSystem& rs, double c, const StencilLattice& lat,
                              const Mat2& basis, int origin_i, int origin_j,
                              const std::vector<double>& u);

struct OuterReport {
    int solves = 0;        // accepted Dirichlet solves
    double residual = 0.0; // residual measure of the returned iterate
    bool converged = false;
};

/** Drives the outer fixed point on an arbitrary stencil: the right-hand side
 *  is blended geometrically toward the one induced by the current iterate,
 *  the Dirichlet problem is re-solved, and the blend weight adapts to the
 *  self-consistency gap ||log(induced/used)||_inf over nodes clear of the
 *  Dirichlet band (grow on decrease, shrink and retry otherwise). Plain
 *  relaxation is required here because the bare map overshoots: each root
 *  ratio feeds back with negative gain, and the gains compound across roots
 *  into a sustained two-cycle. The supplied residual measure decides early
 *  exit and which iterate is best. u carries the start iterate, which also
 *  supplies the Dirichlet data, and receives the best iterate found. */
OuterReport outer_fixed_point(const RootSystem& rs, double c, const StencilLattice& lat,
                              const Mat2& basis, int origin_i, int origin_j,
                              const std::vector<DirPair>& pairs,
                              const std::function<double(const std::vector<double>&)>&
                                  residual,
                              std::vector<double>& u, double tol, int max_iter);

}  // namespace macy
