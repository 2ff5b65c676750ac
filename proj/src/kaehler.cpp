#include "macy/kaehler.hpp"

#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>

#include "macy/numerics.hpp"

namespace macy {

namespace {

/** Canonical chamber representative, rejected when it sits on a wall (the
 *  root-block denominators vanish there). */
Vec2 chamber_interior_point(const RootSystem& rs, const Vec2& z, const char* who) {
    const Vec2 p = rs.reflect_into_chamber(z).point;
    if (rs.classify(p).kind != ChamberLocation::Kind::interior) {
        throw std::domain_error(std::string(who) + ": point lies on a chamber wall");
    }
    return p;
}

void require_off_walls(const RootSystem& rs, const Vec2& z, const char* who) {
    for (const PositiveRoot& r : rs.positive_roots()) {
        if (std::abs(r(z)) <= 1e-12 * (1.0 + z.norm() * r.coeffs.norm())) {
            throw std::domain_error(std::string(who) + ": point lies on a chamber wall");
        }
    }
}

double mult_power(double base, int mult) {
    double p = 1.0;
    for (int k = 0; k < mult; ++k) p *= base;
    return p;
}

}  // namespace

// ------------------------------------------------------- potential carriers

C2Field quadratic_field(const Mat2& a) {
    const Mat2 s{a.a11, 0.5 * (a.a12 + a.a21), 0.5 * (a.a12 + a.a21), a.a22};
    C2Field f;
    f.value = [s](const Vec2& z) { return 0.5 * z.dot(s.apply(z)); };
    f.grad = [s](const Vec2& z) { return s.apply(z); };
    f.hess = [s](const Vec2&) { return s; };
    return f;
}

C2Field radial_field(const RadialProfile& prof) {
    auto p = std::make_shared<const RadialProfile>(prof);
    C2Field f;
    f.value = [p](const Vec2& z) { return p->value(z.norm()); };
    f.grad = [p](const Vec2& z) {
        const double r = z.norm();
        if (r < 1e-12) return Vec2{0.0, 0.0};
        return z * (p->deriv(r) / r);
    };
    f.hess = [p](const Vec2& z) {
        const double r = z.norm();
        const double along = p->second(r);
        if (r < 1e-12) return Mat2{along, 0.0, 0.0, along};
        const double across = p->deriv(r) / r;
        const double n1 = z.x1 / r, n2 = z.x2 / r;
        const double d = along - across;
        return Mat2{across + d * n1 * n1, d * n1 * n2, d * n1 * n2,
                    across + d * n2 * n2};
    };
    return f;
}

C2Field grid_field(const Solution& sol) {
    auto s = std::make_shared<const Solution>(sol);
    // snap to the canonical node and keep the reflection that got there, so
    // derivatives transform back covariantly
    const auto snap = [s](const Vec2& z) {
        const CanonicalPoint cp = s->spec.rs.reflect_into_chamber(z);
        const Mat2& w = s->spec.rs.weyl_elements()[static_cast<std::size_t>(cp.element)];
        const Vec2 xi = s->grid.basis().inverse().apply(cp.point);
        const int i = static_cast<int>(std::lround(xi.x1 / s->grid.h()));
        const int j = static_cast<int>(std::lround(xi.x2 / s->grid.h()));
        if (i < 0 || j < 0 || i >= s->grid.n() || j >= s->grid.n() ||
            s->grid.node_class(i, j) != SectorGrid::NodeClass::active) {
            throw std::domain_error("grid_field: point snaps outside the solved region");
        }
        return std::tuple<int, int, Mat2>{i, j, w};
    };
    C2Field f;
    f.value = [s, snap](const Vec2& z) {
        const auto [i, j, w] = snap(z);
        return s->value_at(i, j);
    };
    f.grad = [s, snap](const Vec2& z) {
        const auto [i, j, w] = snap(z);
        return w.transpose().apply(s->gradient_z(i, j));
    };
    f.hess = [s, snap](const Vec2& z) {
        const auto [i, j, w] = snap(z);
        return w.transpose() * s->hessian_z(i, j) * w;
    };
    return f;
}

// ------------------------------------------------------------ metric blocks

double HermitianBlocks::det() const {
    double d = rank == 1 ? a_block.a11 : a_block.det();
    for (const RootEntry& e : root_entries) d *= mult_power(e.value, e.mult);
    return d;
}

RealHessian real_hessian_components(const RootSystem& rs, const C2Field& rho,
                                    const Vec2& z) {
    const Vec2 p = chamber_interior_point(rs, z, "real_hessian_components");
    RealHessian out;
    out.a_block = rho.hess(p);
    const Vec2 g = rho.grad(p);
    for (const PositiveRoot& r : rs.positive_roots()) {
        out.root_scalars.push_back(-r(g) / std::tanh(r(p)));
    }
    return out;
}

namespace {

HermitianBlocks scaled_blocks(const RootSystem& rs, const C2Field& rho, const Vec2& p,
                              double a_scale, double entry_scale) {
    HermitianBlocks out;
    out.rank = rs.rank();
    out.n_total = rs.n_total();
    out.a_block = rho.hess(p).scaled(a_scale);
    const Vec2 g = rho.grad(p);
    const auto& roots = rs.positive_roots();
    for (std::size_t k = 0; k < roots.size(); ++k) {
        const double v = entry_scale * roots[k](g) / std::sinh(2.0 * roots[k](p));
        out.root_entries.push_back({static_cast<int>(k), v, roots[k].mult});
    }
    return out;
}

}  // namespace

HermitianBlocks complex_hessian(const RootSystem& rs, const C2Field& rho,
                                const Vec2& z) {
    const Vec2 p = chamber_interior_point(rs, z, "complex_hessian");
    return scaled_blocks(rs, rho, p, 0.25, -1.0);
}

HermitianBlocks induced_metric(const RootSystem& rs, const C2Field& rho,
                               const Vec2& z) {
    const Vec2 p = chamber_interior_point(rs, z, "induced_metric");
    return scaled_blocks(rs, rho, p, 0.5, -2.0);
}

double d_operator(const RootSystem& rs, const C2Field& rho, const Vec2& z) {
    require_off_walls(rs, z, "d_operator");
    const Vec2 g = rho.grad(z);
    double prod = rs.mult_sum() % 2 == 0 ? 1.0 : -1.0;
    for (const PositiveRoot& r : rs.positive_roots()) {
        prod *= mult_power(2.0 * r(g) / std::sinh(2.0 * r(z)), r.mult);
    }
    return prod;
}

DetIdentityReport det_identity_report(const RootSystem& rs, const C2Field& rho,
                                      const Vec2& z) {
    const Vec2 p = chamber_interior_point(rs, z, "det_identity_report");
    DetIdentityReport rep;
    rep.lhs = complex_hessian(rs, rho, p).det();
    const Mat2 hess = rho.hess(p);
    const double hess_det = rs.rank() == 1 ? hess.a11 : hess.det();
    rep.rhs = std::ldexp(hess_det, -2 * rs.n_total()) * d_operator(rs, rho, p);
    rep.ratio = rep.lhs / rep.rhs;
    return rep;
}

CyReport cy_constancy(const RootSystem& rs, const C2Field& rho,
                      const std::vector<Vec2>& pts) {
    if (pts.empty()) throw std::invalid_argument("cy_constancy: need at least one point");
    std::vector<double> dets;
    dets.reserve(pts.size());
    for (const Vec2& z : pts) {
        dets.push_back(std::abs(complex_hessian(rs, rho, z).det()));
    }
    CyReport rep;
    for (const double d : dets) rep.mean_det += d;
    rep.mean_det /= static_cast<double>(dets.size());
    const double scale = std::max(rep.mean_det, 1e-300);
    for (const double d : dets) {
        rep.max_dev = std::max(rep.max_dev, std::abs(d - rep.mean_det) / scale);
    }
    return rep;
}

CyReport cy_constancy(const Solution& sol) {
    const RootSystem& rs = sol.spec.rs;
    const SectorGrid& grid = sol.grid;
    const int n = grid.n();
    const double h = grid.h();
    const Mat2 m = grid.inv_basis_t();
    const auto val = [&](int i, int j) {
        return sol.values[static_cast<std::size_t>(grid.resolve(i, j))];
    };
    // fourth-order differences along lattice axes; the cross term composes
    // the first-difference weights in both directions
    const auto d1 = [&](const std::function<double(int)>& f) {
        return (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h);
    };
    const auto d2 = [&](const std::function<double(int)>& f) {
        return (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) /
               (12.0 * h * h);
    };
    static constexpr int offs[] = {-2, -1, 1, 2};
    static constexpr double wts[] = {1.0, -8.0, 8.0, -1.0};

    std::vector<double> dets;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!sol.inner_node(i, j)) continue;
            const Vec2 gxi{d1([&](int k) { return val(i + k, j); }),
                           d1([&](int k) { return val(i, j + k); })};
            const double d11 = d2([&](int k) { return val(i + k, j); });
            const double d22 = d2([&](int k) { return val(i, j + k); });
            double d12 = 0.0;
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    d12 += wts[a] * wts[b] * val(i + offs[a], j + offs[b]);
                }
            }
            d12 /= 144.0 * h * h;
            const Mat2 hz = m * Mat2{d11, d12, d12, d22} * m.transpose();
            const Vec2 g = m.apply(gxi);
            const Vec2 z = grid.node_z(i, j);
            double det = rs.rank() == 1 ? 0.25 * hz.a11 : hz.scaled(0.25).det();
            for (const PositiveRoot& r : rs.positive_roots()) {
                det *= mult_power(-r(g) / std::sinh(2.0 * r(z)), r.mult);
            }
            dets.push_back(std::abs(det));
        }
    }
    if (dets.empty()) throw std::invalid_argument("cy_constancy: no inner nodes");
    CyReport rep;
    for (const double d : dets) rep.mean_det += d;
    rep.mean_det /= static_cast<double>(dets.size());
    const double scale = std::max(rep.mean_det, 1e-300);
    for (const double d : dets) {
        rep.max_dev = std::max(rep.max_dev, std::abs(d - rep.mean_det) / scale);
    }
    return rep;
}

// ----------------------------------------------------------- orbit geometry

ShapeSpectrum shape_spectrum(const RootSystem& rs, const Vec2& z, const Vec2& v) {
    require_off_walls(rs, z, "shape_spectrum");
    ShapeSpectrum out;
    const auto& roots = rs.positive_roots();
    for (std::size_t k = 0; k < roots.size(); ++k) {
        const double t = std::tanh(roots[k](z));
        const double lv = roots[k](v);
        out.entries.push_back({static_cast<int>(k), -lv / t, -lv * t, roots[k].mult});
    }
    return out;
}

double lemma31_diagonal(const RootSystem& rs, const C2Field& rho, const Vec2& z,
                        int root_index) {
    const Vec2 p = chamber_interior_point(rs, z, "lemma31_diagonal");
    const PositiveRoot& r =
        rs.positive_roots().at(static_cast<std::size_t>(root_index));
    const double a = r(rho.grad(p));
    const double t = std::tanh(r(p));
    return 0.25 * (-a / t + t * a);
}

// ---------------------------------------------------------------- reporting

nlohmann::json metric_report(const RootSystem& rs, const C2Field& rho,
                             const std::vector<Vec2>& pts) {
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> dets;
    for (const Vec2& z : pts) {
        const HermitianBlocks b = complex_hessian(rs, rho, z);
        const DetIdentityReport rep = det_identity_report(rs, rho, z);
        nlohmann::json row;
        row["z"] = {z.x1, z.x2};
        if (b.rank == 1) {
            row["a_block"] = {{b.a_block.a11}};
        } else {
            row["a_block"] = {{b.a_block.a11, b.a_block.a12},
                              {b.a_block.a21, b.a_block.a22}};
        }
        nlohmann::json entries = nlohmann::json::array();
        for (const HermitianBlocks::RootEntry& e : b.root_entries) {
            entries.push_back({{"root", e.root}, {"value", e.value}, {"mult", e.mult}});
        }
        row["root_entries"] = std::move(entries);
        row["det_lhs"] = rep.lhs;
        row["det_rhs"] = rep.rhs;
        row["ratio"] = rep.ratio;
        row["d_op"] = d_operator(rs, rho, rs.reflect_into_chamber(z).point);
        rows.push_back(std::move(row));
        dets.push_back(std::abs(rep.lhs));
    }
    double mean = 0.0;
    for (const double d : dets) mean += d;
    if (!dets.empty()) mean /= static_cast<double>(dets.size());
    const double scale = std::max(mean, 1e-300);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        rows[k]["cy_dev"] = std::abs(dets[k] - mean) / scale;
    }
    nlohmann::json j;
    j["mean_det"] = mean;
    j["points"] = std::move(rows);
    return j;
}

void metric_report_csv(const RootSystem& rs, const C2Field& rho,
                       const std::vector<Vec2>& pts, std::ostream& os) {
    const nlohmann::json j = metric_report(rs, rho, pts);
    os << "z1,z2,det_lhs,det_rhs,ratio,d_op,cy_dev\n";
    for (const nlohmann::json& row : j.at("points")) {
        os << format_double(row.at("z").at(0).get<double>()) << ','
           << format_double(row.at("z").at(1).get<double>()) << ','
           << format_double(row.at("det_lhs").get<double>()) << ','
           << format_double(row.at("det_rhs").get<double>()) << ','
           << format_double(row.at("ratio").get<double>()) << ','
           << format_double(row.at("d_op").get<double>()) << ','
           << format_double(row.at("cy_dev").get<double>()) << '\n';
    }
}

}  // namespace macy
