#include "macy/rootsys.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace macy {

namespace {

constexpr double kDedupTol = 1e-12;
constexpr std::size_t kMaxGroupSize = 64;

double family_theta(Family f) {
    switch (f) {
        case Family::a1xa1: return std::numbers::pi / 2.0;
        case Family::a2: return std::numbers::pi / 3.0;
        case Family::b2: return std::numbers::pi / 4.0;
        case Family::g2: return std::numbers::pi / 6.0;
        default: return 0.0;
    }
}

int require_mult(const std::map<std::string, int>& mult, const std::string& key,
                 Family f) {
    auto it = mult.find(key);
    if (it == mult.end())
        throw std::invalid_argument("build_root_system: family " + family_name(f) +
                                    " needs multiplicity \"" + key + "\"");
    if (it->second <= 0)
        throw std::invalid_argument("build_root_system: multiplicity \"" + key +
                                    "\" must be a positive integer");
    return it->second;
}

void reject_extra_keys(const std::map<std::string, int>& mult,
                       const std::vector<std::string>& allowed, Family f) {
    for (const auto& [key, value] : mult) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::invalid_argument("build_root_system: family " +
                                        family_name(f) +
                                        " does not have an orbit \"" + key + "\"");
    }
}

/** Dihedral closure of the two generating wall reflections, breadth first.
 *  Index 0 is the identity; order of discovery is deterministic. */
std::vector<Mat2> close_group(const std::vector<Mat2>& generators) {
    std::vector<Mat2> group{Mat2::identity()};
    for (std::size_t scan = 0; scan < group.size(); ++scan) {
        for (const Mat2& g : generators) {
            Mat2 cand = snap_unit(g * group[scan]);
            bool known = false;
            for (const Mat2& e : group) {
                if (e.inf_dist(cand) < kDedupTol) {
                    known = true;
                    break;
                }
            }
            if (!known) group.push_back(cand);
            if (group.size() > kMaxGroupSize)
                throw std::runtime_error("close_group: reflection closure did not terminate");
        }
    }
    return group;
}

/** Orbit of a covector under the group; covectors transform by the same
 *  orthogonal matrices as points. Signs are not identified here. */
std::vector<Vec2> covector_orbit(const std::vector<Mat2>& group, const Vec2& alpha) {
    std::vector<Vec2> orbit;
    for (const Mat2& w : group) {
        Vec2 c = w.apply(alpha);
        bool known = false;
        for (const Vec2& e : orbit) {
            if (e.inf_dist(c) < kDedupTol) {
                known = true;
                break;
            }
        }
        if (!known) orbit.push_back(c);
    }
    return orbit;
}

bool contains_point(const std::vector<Vec2>& pts, const Vec2& p, double tol) {
    for (const Vec2& q : pts)
        if (q.inf_dist(p) < tol) return true;
    return false;
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::a1: return "a1";
        case Family::bc1: return "bc1";
        case Family::a1xa1: return "a1xa1";
        case Family::a2: return "a2";
        case Family::b2: return "b2";
        case Family::g2: return "g2";
    }
    throw std::logic_error("family_name: unreachable");
}

Family family_from_name(const std::string& name) {
    if (name == "a1") return Family::a1;
    if (name == "bc1") return Family::bc1;
    if (name == "a1xa1") return Family::a1xa1;
    if (name == "a2") return Family::a2;
    if (name == "b2") return Family::b2;
    if (name == "g2") return Family::g2;
    throw std::invalid_argument("unknown root system family \"" + name + "\"");
}

RootSystem build_root_system(Family family, const std::map<std::string, int>& mult) {
    RootSystem rs;
    rs.family_ = family;

    if (family == Family::a1 || family == Family::bc1) {
        rs.rank_ = 1;
        rs.theta_ = 0.0;
        rs.group_ = {Mat2::identity(), Mat2{-1.0, 0.0, 0.0, 1.0}};
        if (family == Family::a1) {
            reject_extra_keys(mult, {"lambda"}, family);
            rs.roots_.push_back({{1.0, 0.0}, require_mult(mult, "lambda", family), "lambda"});
        } else {
            reject_extra_keys(mult, {"lambda", "2lambda"}, family);
            rs.roots_.push_back({{1.0, 0.0}, require_mult(mult, "lambda", family), "lambda"});
            rs.roots_.push_back({{2.0, 0.0}, require_mult(mult, "2lambda", family), "2lambda"});
        }
    } else {
        rs.rank_ = 2;
        rs.theta_ = family_theta(family);
        const Mat2 s1 = snap_unit(reflection_matrix(0.0));
        const Mat2 s2 = snap_unit(reflection_matrix(rs.theta_));
        rs.group_ = close_group({s1, s2});

        // fundamental covectors of the theta parametrization:
        // lambda1(Z) = x2, lambda2(Z) = x1 sin(theta) - x2 cos(theta)
        const Vec2 lam1{0.0, 1.0};
        const Vec2 lam2{snap_unit(std::sin(rs.theta_)), snap_unit(-std::cos(rs.theta_))};
        const std::vector<Vec2> orbit1 = covector_orbit(rs.group_, lam1);
        const std::vector<Vec2> orbit2 = covector_orbit(rs.group_, lam2);
        const bool single_orbit = contains_point(orbit1, lam2, kDedupTol);

        std::map<std::string, int> mults_by_orbit;
        if (single_orbit) {
            reject_extra_keys(mult, {"lambda"}, family);
            mults_by_orbit["lambda"] = require_mult(mult, "lambda", family);
        } else {
            reject_extra_keys(mult, {"lambda1", "lambda2"}, family);
            mults_by_orbit["lambda1"] = require_mult(mult, "lambda1", family);
            mults_by_orbit["lambda2"] = require_mult(mult, "lambda2", family);
        }

        // positive roots pair positively with any interior chamber point
        const Vec2 probe{std::cos(rs.theta_ / 2.0), std::sin(rs.theta_ / 2.0)};
        std::vector<Vec2> positives;
        for (const std::vector<Vec2>* orbit : {&orbit1, &orbit2}) {
            for (const Vec2& c : *orbit) {
                const Vec2 pos = c.dot(probe) > 0.0 ? c : -c;
                if (!contains_point(positives, pos, kDedupTol)) positives.push_back(pos);
            }
        }
        std::stable_sort(positives.begin(), positives.end(),
                         [](const Vec2& a, const Vec2& b) {
                             return std::atan2(a.x2, a.x1) > std::atan2(b.x2, b.x1);
                         });

        for (const Vec2& c : positives) {
            std::string orbit_label;
            if (single_orbit) {
                orbit_label = "lambda";
            } else if (contains_point(orbit1, c, kDedupTol) ||
                       contains_point(orbit1, -c, kDedupTol)) {
                orbit_label = "lambda1";
            } else {
                orbit_label = "lambda2";
            }
            rs.roots_.push_back({c, mults_by_orbit.at(orbit_label), orbit_label});
        }
    }

    rs.n_total_ = rs.rank_;
    for (const PositiveRoot& r : rs.roots_) rs.n_total_ += r.mult;
    return rs;
}

std::map<std::string, int> RootSystem::multiplicities() const {
    std::map<std::string, int> m;
    for (const PositiveRoot& r : roots_) m[r.orbit] = r.mult;
    return m;
}

ChamberLocation RootSystem::classify(const Vec2& z, double tol) const {
    bool interior = true;
    int wall = -1;
    for (std::size_t i = 0; i < roots_.size(); ++i) {
        const double v = roots_[i](z);
        if (v < -tol) return {ChamberLocation::Kind::exterior, -1};
        if (v <= tol) {
            interior = false;
            if (wall < 0) wall = static_cast<int>(i);
        }
    }
    if (interior) return {ChamberLocation::Kind::interior, -1};
    return {ChamberLocation::Kind::wall, wall};
}

CanonicalPoint RootSystem::reflect_into_chamber(const Vec2& z) const {
    int best = -1;
    double best_min = -1e300;
    for (std::size_t w = 0; w < group_.size(); ++w) {
        const Vec2 p = group_[w].apply(z);
        double mn = 1e300;
        for (const PositiveRoot& r : roots_) mn = std::min(mn, r(p));
        if (mn >= -1e-12) return {p, static_cast<int>(w)};
        if (mn > best_min) {
            best_min = mn;
            best = static_cast<int>(w);
        }
    }
    // roundoff can leave every image a hair outside; take the least-negative one
    return {group_[static_cast<std::size_t>(best)].apply(z), best};
}

std::vector<Vec2> RootSystem::weyl_orbit(const Vec2& z, double tol) const {
    std::vector<Vec2> orbit;
    for (const Mat2& w : group_) {
        const Vec2 p = w.apply(z);
        if (!contains_point(orbit, p, tol)) orbit.push_back(p);
    }
    return orbit;
}

void to_json(nlohmann::json& j, const RootSystem& rs) {
    j = nlohmann::json::object();
    j["family"] = family_name(rs.family());
    j["theta"] = rs.theta();
    nlohmann::json roots = nlohmann::json::array();
    for (const PositiveRoot& r : rs.positive_roots()) {
        roots.push_back({{"coeffs", {r.coeffs.x1, r.coeffs.x2}},
                         {"mult", r.mult},
                         {"orbit", r.orbit}});
    }
    j["roots"] = std::move(roots);
}

RootSystem root_system_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family") || !j.contains("roots"))
        throw std::invalid_argument("root system json needs \"family\" and \"roots\"");
    const Family family = family_from_name(j.at("family").get<std::string>());

    std::map<std::string, int> mult;
    for (const auto& r : j.at("roots")) {
        const std::string orbit = r.at("orbit").get<std::string>();
        const int m = r.at("mult").get<int>();
        auto it = mult.find(orbit);
        if (it == mult.end())
            mult[orbit] = m;
        else if (it->second != m)
            throw std::invalid_argument("root system json: orbit \"" + orbit +
                                        "\" has inconsistent multiplicities");
    }

    RootSystem rs = build_root_system(family, mult);

    if (j.contains("theta") &&
        std::abs(j.at("theta").get<double>() - rs.theta()) > 1e-9)
        throw std::invalid_argument("root system json: theta does not match family");

    // stored covectors must reproduce the canonical construction
    const auto& built = rs.positive_roots();
    const auto& stored = j.at("roots");
    if (stored.size() != built.size())
        throw std::invalid_argument("root system json: wrong number of positive roots");
    for (const auto& r : stored) {
        const auto& c = r.at("coeffs");
        const Vec2 v{c.at(0).get<double>(), c.at(1).get<double>()};
        bool found = false;
        for (const PositiveRoot& b : built) {
            if (b.coeffs.inf_dist(v) < 1e-12) {
                found = true;
                break;
            }
        }
        if (!found)
            throw std::invalid_argument("root system json: covector does not belong to the family");
    }
    return rs;
}

}  // namespace macy
