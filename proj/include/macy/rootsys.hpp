#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "macy/geometry.hpp"

namespace macy {

/** Restricted root system families of rank 1 and 2 handled by the solver.
 *  The rank-2 families are determined by the angle theta between the two
 *  chamber walls: pi/2 (a1xa1), pi/3 (a2), pi/4 (b2), pi/6 (g2). */
enum class Family { a1, bc1, a1xa1, a2, b2, g2 };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

/** Positive restricted root: a covector on the flat rank-space together with
 *  its multiplicity and the label of its Weyl orbit. The pairing with a point
 *  Z is the Euclidean dot product of coeffs with Z. */
struct PositiveRoot {
    Vec2 coeffs;
    int mult = 1;
    std::string orbit;

    double operator()(const Vec2& z) const { return coeffs.dot(z); }
};

struct ChamberLocation {
    enum class Kind { interior, wall, exterior };
    Kind kind = Kind::exterior;
    int wall_root = -1;  // index into positive_roots when kind == wall
};

struct CanonicalPoint {
    Vec2 point;
    int element = 0;  // index of the Weyl element that was applied
};

/** Immutable root system: positive roots with multiplicities, the Weyl group
 *  as matrices acting on the rank-space, and chamber bookkeeping. Build via
 *  build_root_system; the constructor is internal to keep invariants. */
class RootSystem {
  public:
    Family family() const { return family_; }
    int rank() const { return rank_; }
    double theta() const { return theta_; }
    const std::vector<PositiveRoot>& positive_roots() const { return roots_; }
    const std::vector<Mat2>& weyl_elements() const { return group_; }

    /** Total real dimension n = rank + sum of multiplicities. */
    int n_total() const { return n_total_; }
    int mult_sum() const { return n_total_ - rank_; }

    double lambda(int root_index, const Vec2& z) const {
        return roots_.at(static_cast<std::size_t>(root_index))(z);
    }

    /** Multiplicity keyed by orbit label, as passed to build_root_system. */
    std::map<std::string, int> multiplicities() const;

    /** interior iff every positive root pairs > tol; wall reports the first
     *  root within tol of zero while no root is below -tol; exterior else. */
    ChamberLocation classify(const Vec2& z, double tol = 1e-12) const;

    /** Applies the Weyl element with the smallest index that lands z in the
     *  closed chamber. Chamber points map by the identity, so the operation
     *  is idempotent. */
    CanonicalPoint reflect_into_chamber(const Vec2& z) const;

    /** Orbit of z under the Weyl group, deduplicated to tol, in the order
     *  the group elements are stored. */
    std::vector<Vec2> weyl_orbit(const Vec2& z, double tol = 1e-12) const;

    friend RootSystem build_root_system(Family, const std::map<std::string, int>&);

  private:
    RootSystem() = default;

    Family family_ = Family::a1;
    int rank_ = 1;
    double theta_ = 0.0;
    int n_total_ = 0;
    std::vector<PositiveRoot> roots_;
    std::vector<Mat2> group_;
};

/** Builds the root system for a family. The multiplicity map must carry
 *  exactly the orbit labels of the family: "lambda" (a1), "lambda"/"2lambda"
 *  (bc1), "lambda" (a2, single orbit), "lambda1"/"lambda2" (a1xa1, b2, g2).
 *  Throws std::invalid_argument on unknown labels or non-positive entries. */
RootSystem build_root_system(Family family, const std::map<std::string, int>& mult);

void to_json(nlohmann::json& j, const RootSystem& rs);
RootSystem root_system_from_json(const nlohmann::json& j);

}  // namespace macy
