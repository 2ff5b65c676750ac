#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "macy/convex.hpp"
#include "macy/kaehler.hpp"
#include "macy/ma.hpp"
#include "macy/rootsys.hpp"

using namespace macy;
using nlohmann::json;

namespace {

/** Bad input from config files or flags. Exit code 1, as opposed to exit
 *  code 2 for runs that parse fine but fail numerically. */
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is the 1-based offset of the offending character; turn it
        // into a line number so the message points into the file
        std::size_t line = 1;
        const std::size_t stop = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') line += 1;
        }
        throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    out << text;
    if (!out) throw ConfigError(path + ": write failed");
}

RootSystem root_system_from_config(const json& cfg) {
    if (!cfg.contains("root_system")) {
        throw ConfigError("config: missing \"root_system\" block");
    }
    const json& block = cfg.at("root_system");
    std::map<std::string, int> mult;
    for (const auto& [key, val] : block.at("multiplicities").items()) {
        mult[key] = val.get<int>();
    }
    return build_root_system(family_from_name(block.at("family").get<std::string>()),
                             mult);
}

struct SolverBlock {
    double c = 0.0;
    double radius = 0.0;
    int grid_n = 0;
    double tol = 1e-6;
    int max_iter = 40;
};

SolverBlock solver_from_config(const json& cfg) {
    if (!cfg.contains("solver")) {
        throw ConfigError("config: missing \"solver\" block");
    }
    const json& block = cfg.at("solver");
    SolverBlock sb;
    sb.c = block.at("c").get<double>();
    sb.radius = block.at("radius").get<double>();
    sb.grid_n = block.at("grid_n").get<int>();
    sb.tol = block.value("tol", sb.tol);
    sb.max_iter = block.value("max_iter", sb.max_iter);
    return sb;
}

std::string output_format(const json& cfg) {
    const std::string fmt =
        cfg.contains("output") ? cfg.at("output").value("format", "json") : "json";
    if (fmt != "json" && fmt != "csv") {
        throw ConfigError("config: output.format must be \"json\" or \"csv\"");
    }
    return fmt;
}

/** Chamber-interior sample for profile-based checks: points on the positive
 *  axis, clear of the origin and of the truncation radius. */
std::vector<Vec2> axis_sample(double x_max, int count) {
    std::vector<Vec2> pts;
    const double lo = 0.05 * x_max;
    const double hi = 0.75 * x_max;
    for (int k = 0; k < count; ++k) {
        pts.push_back({lo + (hi - lo) * k / (count - 1.0), 0.0});
    }
    return pts;
}

int cmd_solve(const std::string& config_path) {
    const json cfg = load_json_file(config_path);
    const RootSystem rs = root_system_from_config(cfg);
    const SolverBlock sb = solver_from_config(cfg);
    const std::string fmt = output_format(cfg);
    const std::string path = cfg.contains("output")
                                 ? cfg.at("output").value("solution", "")
                                 : std::string();
    if (path.empty()) {
        throw ConfigError("config: missing output.solution path");
    }

    json artifact;
    json status{{"kind", "solve_report"}, {"solution", path}};
    bool converged = true;
    if (rs.rank() == 1) {
        const RadialProfile prof = solve_rank1(rs, sb.c, sb.radius, sb.grid_n);
        if (fmt == "csv") {
            std::ostringstream os;
            profile_to_csv(prof, os);
            write_text_file(path, os.str());
        } else {
            artifact = prof;
            write_text_file(path, artifact.dump(2) + "\n");
        }
        status["converged"] = true;
    } else {
        const ProblemSpec spec{rs, sb.c, sb.radius, sb.grid_n, sb.tol, sb.max_iter};
        const Solution sol = solve_rank2(spec);
        if (fmt == "csv") {
            std::ostringstream os;
            solution_to_csv(sol, os);
            write_text_file(path, os.str());
        } else {
            artifact = sol;
            write_text_file(path, artifact.dump(2) + "\n");
        }
        converged = sol.converged;
        status["converged"] = sol.converged;
        status["iterations"] = sol.iterations;
        status["final_residual"] = sol.final_residual;
    }
    std::cout << status.dump() << "\n";
    return converged ? 0 : 2;
}

struct CheckRow {
    std::string name;
    double value = 0.0;
    double tol = 0.0;
    bool pass = false;
};

int cmd_verify(const std::string& config_path, const std::string& solution_path) {
    const json cfg = load_json_file(config_path);
    const json art = load_json_file(solution_path);
    const std::string kind = art.value("kind", "");

    std::vector<std::string> checks{"residual", "cy", "chamber", "det_ratio"};
    json tols;
    if (cfg.contains("verify")) {
        const json& vb = cfg.at("verify");
        if (vb.contains("checks")) {
            checks = vb.at("checks").get<std::vector<std::string>>();
        }
        tols = vb.value("tolerances", json::object());
    }
    const double tol_res = tols.value("residual", 1e-3);
    const double tol_cy = tols.value("cy_dev", 1e-2);
    const double tol_det = tols.value("det_ratio", 1e-8);

    // measurements shared by both artifact kinds
    double rel_residual = 0.0;
    double cy_dev = 0.0;
    bool chamber_ok = true;
    double det_dev = 0.0;

    if (kind == "radial_profile") {
        const RootSystem rs = root_system_from_config(cfg);
        if (rs.rank() != 1) {
            throw ConfigError("verify: profile artifact needs a rank-one root system");
        }
        const RadialProfile prof = profile_from_json(art);
        const C2Field rho = radial_field(prof);
        const std::vector<Vec2> pts = axis_sample(prof.x_max(), 33);
        double worst = 0.0, scale = 0.0;
        for (const Vec2& z : pts) {
            worst = std::max(worst, std::abs(equation_residual(rs, prof, z.x1)));
            scale = std::max(scale, f2_hat(rs, prof.c(), z));
            chamber_ok = chamber_ok && prof.deriv(z.x1) > 0.0;
        }
        rel_residual = worst / std::max(scale, 1e-300);
        cy_dev = cy_constancy(rs, rho, pts).max_dev;
        const double expected = std::ldexp(1.0, rs.mult_sum());
        for (const Vec2& z : pts) {
            const DetIdentityReport rep = det_identity_report(rs, rho, z);
            det_dev = std::max(det_dev, std::abs(rep.ratio - expected) / expected);
        }
    } else if (kind == "sector_solution") {
        const Solution sol = solution_from_json(art);
        const ResidualGrid res = equation_residual(sol);
        rel_residual = res.max_inner / std::max(res.max_f2_inner, 1e-300);
        cy_dev = cy_constancy(sol).max_dev;
        chamber_ok = chamber_preserved(sol);
        const C2Field rho = grid_field(sol);
        const RootSystem& rs = sol.spec.rs;
        const double expected = std::ldexp(1.0, rs.mult_sum());
        int taken = 0;
        for (int i = 0; i < sol.grid.n() && taken < 40; i += 3) {
            for (int j = 0; j < sol.grid.n() && taken < 40; j += 3) {
                if (!sol.inner_node(i, j)) continue;
                const DetIdentityReport rep =
                    det_identity_report(rs, rho, sol.grid.node_z(i, j));
                det_dev = std::max(det_dev, std::abs(rep.ratio - expected) / expected);
                taken += 1;
            }
        }
    } else {
        throw ConfigError(solution_path + ": unknown artifact kind \"" + kind + "\"");
    }

    std::vector<CheckRow> rows;
    for (const std::string& name : checks) {
        CheckRow row;
        row.name = name;
        if (name == "residual") {
            row.value = rel_residual;
            row.tol = tol_res;
            row.pass = rel_residual <= tol_res;
        } else if (name == "cy") {
            row.value = cy_dev;
            row.tol = tol_cy;
            row.pass = cy_dev <= tol_cy;
        } else if (name == "chamber") {
            row.value = chamber_ok ? 1.0 : 0.0;
            row.tol = 1.0;
            row.pass = chamber_ok;
        } else if (name == "det_ratio") {
            row.value = det_dev;
            row.tol = tol_det;
            row.pass = det_dev <= tol_det;
        } else {
            throw ConfigError("config: unknown verify check \"" + name + "\"");
        }
        rows.push_back(row);
    }

    bool all_pass = true;
    json jchecks = json::object();
    for (const CheckRow& row : rows) {
        jchecks[row.name] = {{"value", row.value}, {"tol", row.tol}, {"pass", row.pass}};
        all_pass = all_pass && row.pass;
    }
    const json report{{"kind", "verify_report"},
                      {"solution", solution_path},
                      {"checks", jchecks},
                      {"pass", all_pass}};
    const std::string report_path =
        cfg.contains("output") ? cfg.at("output").value("report", "") : std::string();
    if (!report_path.empty()) {
        write_text_file(report_path, report.dump(2) + "\n");
    }
    std::cout << report.dump() << "\n";
    return all_pass ? 0 : 2;
}

int cmd_subgradient(const std::string& fixture, const std::string& point) {
    ConvexFn f = [&fixture] {
        if (fixture == "ex33") return ConvexFn::quad_plus_one();
        if (fixture == "ex34") return ConvexFn::radial_kink();
        if (fixture == "ex35") return ConvexFn::l1_kink();
        throw ConfigError("unknown fixture \"" + fixture +
                          "\" (expected ex33, ex34 or ex35)");
    }();
    Vec2 x;
    if (std::sscanf(point.c_str(), "%lf,%lf", &x.x1, &x.x2) != 2) {
        throw ConfigError("--point expects two comma-separated numbers, got \"" +
                          point + "\"");
    }
    const SubgradientSet set = f.subgradient(x);
    json verts = json::array();
    for (const Vec2& v : set.vertices) verts.push_back({v.x1, v.x2});
    const json out{{"kind", "subgradient"},
                   {"fixture", fixture},
                   {"point", {x.x1, x.x2}},
                   {"is_singleton", set.is_singleton},
                   {"vertices", verts}};
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_export(const std::string& solution_path, const std::string& format,
               const std::string& out_path) {
    if (format != "csv" && format != "json") {
        throw ConfigError("--format must be csv or json");
    }
    const json art = load_json_file(solution_path);
    const std::string kind = art.value("kind", "");
    std::ostringstream os;
    if (kind == "radial_profile") {
        const RadialProfile prof = profile_from_json(art);
        if (format == "csv") {
            profile_to_csv(prof, os);
        } else {
            const json j = prof;
            os << j.dump(2) << "\n";
        }
    } else if (kind == "sector_solution") {
        const Solution sol = solution_from_json(art);
        if (format == "csv") {
            solution_to_csv(sol, os);
        } else {
            json j;
            to_json(j, sol);
            os << j.dump(2) << "\n";
        }
    } else {
        throw ConfigError(solution_path + ": unknown artifact kind \"" + kind + "\"");
    }
    if (out_path.empty()) {
        std::cout << os.str();
    } else {
        write_text_file(out_path, os.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Weyl-invariant Monge-Ampere solver for Ricci-flat metrics on "
        "complexified symmetric spaces. MA_CY_THREADS caps worker threads."};
    app.require_subcommand(1);

    std::string config_path, solution_path, fixture, point, format, out_path;

    CLI::App* solve = app.add_subcommand(
        "solve", "solve the equation from a config and write the solution artifact");
    solve->add_option("--config", config_path, "JSON config path")->required();

    CLI::App* verify = app.add_subcommand(
        "verify", "run residual and metric-identity checks on a solution artifact");
    verify->add_option("--config", config_path, "JSON config path")->required();
    verify->add_option("--solution", solution_path, "solution artifact path")
        ->required();

    CLI::App* subgrad = app.add_subcommand(
        "subgradient", "print the subdifferential of a built-in convex fixture");
    subgrad->add_option("--fixture", fixture, "ex33, ex34 or ex35")->required();
    subgrad->add_option("--point", point, "evaluation point as x,y")->required();

    CLI::App* exp = app.add_subcommand(
        "export", "re-emit a solution artifact as csv or json");
    exp->add_option("--solution", solution_path, "solution artifact path")->required();
    exp->add_option("--format", format, "csv or json")->required();
    exp->add_option("--out", out_path, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (solve->parsed()) return cmd_solve(config_path);
        if (verify->parsed()) return cmd_verify(config_path, solution_path);
        if (subgrad->parsed()) return cmd_subgradient(fixture, point);
        if (exp->parsed()) return cmd_export(solution_path, format, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
