#pragma once

#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "macy/geometry.hpp"
#include "macy/ma.hpp"
#include "macy/rootsys.hpp"

namespace macy {

// ------------------------------------------------------- potential carriers

/** rho(Z) = A Z . Z / 2 for symmetric A; the simplest interior fixture. */
C2Field quadratic_field(const Mat2& a);

/** Radial potential rho(Z) = prof(|Z|). The even profile with rho'(0) = 0
 *  makes the origin a removable singularity, filled by the limit values. */
C2Field radial_field(const RadialProfile& prof);

/** W-invariant view of a grid solution: evaluation reflects Z into the
 *  chamber, rounds to the nearest lattice node, differentiates there with
 *  the solver's centered stencils, and maps the results back through the
 *  reflection. Points that snap outside the solved stencil support throw
 *  std::domain_error. */
C2Field grid_field(const Solution& sol);

// ------------------------------------------------------------ metric blocks

/** Block data of a Hermitian form in the adapted frame: an r x r block on
 *  the flat directions plus one scalar per positive root, each repeated with
 *  the root's multiplicity. */
struct HermitianBlocks {
    struct RootEntry {
        int root = 0;      // index into positive_roots()
        double value = 0;
        int mult = 1;
    };

    int rank = 1;          // rows of a_block actually used
    int n_total = 0;       // rank + sum of multiplicities
    Mat2 a_block;
    std::vector<RootEntry> root_entries;

    /** Determinant of the full block-diagonal form, multiplicities included. */
    double det() const;
};

/** Euclidean Hessian data of the real metric restricted to the flat, split
 *  into the rank block, the per-root scalars, and the mixed terms. */
struct RealHessian {
    Mat2 a_block;                      // Hessian of rho at Z, flat coordinates
    std::vector<double> root_scalars;  // -lambda(grad rho)/tanh(lambda(Z))
    double mixed_check = 0.0;          // flat/root cross terms, identically zero
};

/** Rank-block and root-scalar components of the real Hessian form at Z.
 *  Z is reflected into the chamber first; wall points (where some
 *  tanh(lambda(Z)) vanishes) throw std::domain_error. */
RealHessian real_hessian_components(const RootSystem& rs, const C2Field& rho,
                                    const Vec2& z);

/** Complex Hessian blocks at Z: a_block = (1/4) Hess rho, root entries
 *  -lambda(grad rho)/sinh(2 lambda(Z)). Chamber-interior Z only. */
HermitianBlocks complex_hessian(const RootSystem& rs, const C2Field& rho,
                                const Vec2& z);

/** Induced real metric blocks at Z: a_block = (1/2) Hess rho, root entries
 *  -2 lambda(grad rho)/sinh(2 lambda(Z)); entrywise twice complex_hessian,
 *  computed independently from its own formula. */
HermitianBlocks induced_metric(const RootSystem& rs, const C2Field& rho,
                               const Vec2& z);

/** W-invariant determinant factor
 *      (-1)^(n-r) prod (2 lambda(grad rho) / sinh(2 lambda(Z)))^m.
 *  Evaluated verbatim at the given Z, without reflecting into the chamber,
 *  so the invariance is a measurable property rather than a tautology.
 *  Z on a wall (some lambda(Z) = 0) throws std::domain_error. */
double d_operator(const RootSystem& rs, const C2Field& rho, const Vec2& z);

/** Two evaluations of the complex-Hessian determinant: directly from the
 *  blocks (lhs) and through the factored form 4^(-n) det(Hess rho) times the
 *  invariant product (rhs). Their ratio is constant in Z; the value 2^(n-r)
 *  reflects this implementation's normalization of the factored form and is
 *  reported rather than forced to one. */
struct DetIdentityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

DetIdentityReport det_identity_report(const RootSystem& rs, const C2Field& rho,
                                      const Vec2& z);

/** Constancy of |det complex_hessian|: max relative deviation from the mean
 *  over the sample, and the mean itself. Zero deviation is the Ricci-flat
 *  (Calabi-Yau) condition. */
struct CyReport {
    double max_dev = 0.0;
    double mean_det = 0.0;
};

CyReport cy_constancy(const RootSystem& rs, const C2Field& rho,
                      const std::vector<Vec2>& pts);

/** Grid overload over the inner nodes of a solution. Differentiates with
 *  fourth-order stencils: the solver's own second-order stencils satisfy the
 *  discrete equation identically at its fixed point, so only a higher-order
 *  reading exposes the genuine O(h^2) defect that refinement shrinks. */
CyReport cy_constancy(const Solution& sol);

// ----------------------------------------------------------- orbit geometry

/** Principal-orbit shape operator eigenvalues in the root directions for a
 *  normal vector v: -lambda(v)/tanh(lambda(Z)) on the flat-side block and
 *  -lambda(v) tanh(lambda(Z)) on the compact-side block. */
struct ShapeSpectrum {
    struct Entry {
        int root = 0;
        double eigen_pd = 0.0;
        double eigen_p = 0.0;
        int mult = 1;
    };
    std::vector<Entry> entries;
};

/** Requires lambda(Z) != 0 for every positive root; throws std::domain_error
 *  on wall points. v is any flat vector, not necessarily in the chamber. */
ShapeSpectrum shape_spectrum(const RootSystem& rs, const Vec2& z, const Vec2& v);

/** Diagonal second-fundamental-form combination for one root:
 *      (1/4) (-lambda(grad rho)/tanh(lambda(Z)) + tanh(lambda(Z)) lambda(grad rho)),
 *  assembled term by term as stated. Callers compare it against the
 *  complex_hessian root entry; the tracked constant ratio is 1/2. */
double lemma31_diagonal(const RootSystem& rs, const C2Field& rho, const Vec2& z,
                        int root_index);

// ---------------------------------------------------------------- reporting

/** Per-point metric evaluation table: complex blocks, both determinant
 *  evaluations with their ratio, the invariant factor, and the deviation of
 *  |det| from the sample mean. */
nlohmann::json metric_report(const RootSystem& rs, const C2Field& rho,
                             const std::vector<Vec2>& pts);

void metric_report_csv(const RootSystem& rs, const C2Field& rho,
                       const std::vector<Vec2>& pts, std::ostream& os);

}  // namespace macy
