#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "qdlab/field_io.hpp"
#include "qdlab/parallel.hpp"
#include "qdlab/report.hpp"

namespace fs = std::filesystem;
using namespace qdlab;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Timer {
    const char* label;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    explicit Timer(const char* l) : label(l) {}
    ~Timer() {
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "[time] %s: %.2fs\n", label, s);
    }
};

const Json& member(const Json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key))
        throw ConfigError("missing config entry: " + path);
    return j.at(key);
}

template <class T>
T get_req(const Json& j, const std::string& key, const std::string& path) {
    try {
        return member(j, key, path).get<T>();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad value at: " + path);
    }
}

template <class T>
T get_or(const Json& j, const std::string& key, T def, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError("bad value at: " + path);
    }
}

int config_dimension(const Json& cfg) {
    int n = get_req<int>(cfg, "dimension", "dimension");
    if (n != 2 && n != 3) throw ConfigError("dimension must be 2 or 3");
    return n;
}

Grid config_grid(const Json& cfg, int n) {
    const Json& g = member(cfg, "grid", "grid");
    double h = get_req<double>(g, "h", "grid.h");
    auto half = get_req<std::vector<double>>(g, "half", "grid.half");
    if (h <= 0 || static_cast<int>(half.size()) != n)
        throw ConfigError("grid.half must list one extent per axis and grid.h must be positive");
    std::array<double, 3> hv{0, 0, 0};
    for (int d = 0; d < n; ++d) hv[d] = half[d];
    return Grid::centered(n, h, hv);
}

MeasureSpec config_measure(const Json& cfg, const Grid& base, int n) {
    const Json& m = member(cfg, "measure", "measure");
    std::string kind = get_req<std::string>(m, "kind", "measure.kind");
    if (kind == "ellipse_focal") {
        if (n != 2) throw ConfigError("measure.kind ellipse_focal needs dimension 2");
        double a = get_req<double>(m, "a", "measure.a");
        double b = get_req<double>(m, "b", "measure.b");
        return ellipse_focal_measure(base, a, b);
    }
    if (kind == "const_disk") {
        double v = get_req<double>(m, "value", "measure.value");
        double r = get_req<double>(m, "radius", "measure.radius");
        return const_disk_measure(base, v, r);
    }
    if (kind == "point") {
        double mass = get_req<double>(m, "mass", "measure.mass");
        return center_point_measure(n, base, mass);
    }
    if (kind == "table") {
        auto vals = get_req<std::vector<double>>(m, "values", "measure.values");
        if (static_cast<std::int64_t>(vals.size()) != base.size())
            throw ConfigError("measure.values length must match the base grid size");
        ScalarField f(base);
        for (std::int64_t id = 0; id < base.size(); ++id) f.at(id) = vals[id];
        MeasureSpec spec = make_density_measure(n, base, f);
        if (m.contains("points")) {
            for (size_t k = 0; k < m.at("points").size(); ++k) {
                const Json& p = m.at("points").at(k);
                auto x = get_req<std::vector<double>>(p, "x", "measure.points.x");
                if (static_cast<int>(x.size()) != n)
                    throw ConfigError("measure.points.x must have one entry per axis");
                PointMass pm;
                for (int d = 0; d < n; ++d) pm.x[d] = x[d];
                pm.mass = get_req<double>(p, "mass", "measure.points.mass");
                spec.points.push_back(pm);
            }
            spec.validate();
        }
        return spec;
    }
    throw ConfigError("unknown measure.kind: " + kind);
}

SolverConfig config_solver(const Json& cfg) {
    SolverConfig sc;
    if (!cfg.contains("solver")) return sc;
    const Json& s = cfg.at("solver");
    sc.relax = get_or(s, "relax", sc.relax, "solver.relax");
    sc.tol = get_or(s, "tol", sc.tol, "solver.tol");
    sc.max_sweeps = get_or(s, "max_sweeps", sc.max_sweeps, "solver.max_sweeps");
    sc.margin_cells = get_or(s, "margin_cells", sc.margin_cells, "solver.margin_cells");
    sc.max_grow = get_or(s, "max_grow", sc.max_grow, "solver.max_grow");
    sc.grow_fraction = get_or(s, "grow_fraction", sc.grow_fraction, "solver.grow_fraction");
    sc.check_every = get_or(s, "check_every", sc.check_every, "solver.check_every");
    if (sc.relax <= 0 || sc.relax >= 2) throw ConfigError("solver.relax must lie in (0, 2)");
    return sc;
}

Vec config_shift(const Json& cfg, int n) {
    Vec s = Vec::Zero();
    if (!cfg.contains("shift")) return s;
    auto v = get_req<std::vector<double>>(cfg, "shift", "shift");
    if (static_cast<int>(v.size()) != n) throw ConfigError("shift must have one entry per axis");
    for (int d = 0; d < n; ++d) s[d] = v[d];
    if (std::abs(s[n - 1]) > 1e-12) throw ConfigError("shift must lie on the base hyperplane");
    return s;
}

struct Pipeline {
    Json cfg;
    std::string hash;
    fs::path out;
    int n = 2;
};

PotentialSolution run_solve(const Pipeline& p) {
    Timer t("solve");
    Grid grid = config_grid(p.cfg, p.n);
    MeasureSpec mu = config_measure(p.cfg, grid.base_grid(), p.n);
    return solve_partial_balayage(mu, grid, config_solver(p.cfg));
}

void write_graph_csv(const fs::path& path, const DomainGraph& graph, const std::string& hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << std::setprecision(17);
    out << "# config_hash=" << hash << "\n";
    out << "x0,x1,g,f\n";
    const Grid& b = graph.base;
    for (std::int64_t id = 0; id < b.size(); ++id) {
        if (!graph.in_d[id]) continue;
        auto c = b.unflat(id);
        out << b.coord(0, c[0]) << "," << (b.dim() > 1 ? b.coord(1, c[1]) : 0.0) << ","
            << graph.g.at(id) << "," << graph.f.at(id) << "\n";
    }
}

int cmd_solve(const Pipeline& p) {
    PotentialSolution sol = run_solve(p);
    write_field((p.out / "u.qdf").string(), sol.u, "u");
    Json body;
    body["solution"] = to_json(sol);
    body["complementarity"] = complementarity_residual(sol);
    write_json_report((p.out / "solve.json").string(), body, p.hash);
    if (!sol.converged) {
        std::fprintf(stderr, "solver did not converge: residual %.3e after %ld sweeps\n",
                     sol.final_residual, sol.sweeps);
        return 3;
    }
    return 0;
}

int cmd_extract(const Pipeline& p) {
    PotentialSolution sol = run_solve(p);
    if (!sol.converged) return 3;
    DomainGraph graph = extract_domain(sol);
    Json body;
    body["solution"] = to_json(sol);
    body["graph"] = to_json(graph);
    body["residuals"] = to_json(residual_report(sol, graph));
    write_json_report((p.out / "graph.json").string(), body, p.hash);
    write_graph_csv(p.out / "graph.csv", graph, p.hash);
    return 0;
}

std::unique_ptr<SurfaceModel> config_surface(const Pipeline& p, PotentialSolution* sol_out) {
    std::string kind = "graph";
    if (p.cfg.contains("surface"))
        kind = get_or<std::string>(p.cfg.at("surface"), "kind", "graph", "surface.kind");
    int bd = p.n - 1;
    if (kind == "hemisphere") {
        double R = get_req<double>(p.cfg.at("surface"), "R", "surface.R");
        return std::make_unique<HemisphereShape>(R, bd);
    }
    if (kind == "ellipse_arch") {
        double a = get_req<double>(p.cfg.at("surface"), "a", "surface.a");
        double b = get_req<double>(p.cfg.at("surface"), "b", "surface.b");
        return std::make_unique<EllipseArchShape>(a, b, bd);
    }
    if (kind == "tall_cap") return std::make_unique<TallCapShape>(bd);
    if (kind != "graph") throw ConfigError("unknown surface.kind: " + kind);
    PotentialSolution sol = run_solve(p);
    if (!sol.converged) throw std::runtime_error("solver did not converge");
    auto gs = std::make_unique<GraphSurface>(extract_domain(sol));
    if (sol_out) *sol_out = std::move(sol);
    return gs;
}

CriteriaOptions config_criteria(const Json& cfg) {
    CriteriaOptions o;
    if (!cfg.contains("criteria")) return o;
    const Json& c = cfg.at("criteria");
    o.samples = get_or(c, "samples", o.samples, "criteria.samples");
    o.pair_samples = get_or(c, "pair_samples", o.pair_samples, "criteria.pair_samples");
    o.probes = get_or(c, "probes", o.probes, "criteria.probes");
    o.tol = get_or(c, "tol", o.tol, "criteria.tol");
    o.margin = get_or(c, "margin", o.margin, "criteria.margin");
    o.seed = get_or(c, "seed", o.seed, "criteria.seed");
    return o;
}

int cmd_check(const Pipeline& p) {
    auto surface = config_surface(p, nullptr);
    CriteriaReport rep;
    {
        Timer t("criteria");
        rep = equivalence_report(*surface, config_criteria(p.cfg));
    }
    Json body;
    body["criteria"] = to_json(rep);
    write_json_report((p.out / "criteria.json").string(), body, p.hash);
    write_csv_criteria((p.out / "criteria.csv").string(), rep, p.hash);
    if (!rep.all_pass) {
        std::string ids;
        for (const auto& v : rep.verdicts)
            if (!v.pass) ids += (ids.empty() ? "" : ", ") + v.id;
        std::fprintf(stderr, "criteria failed: %s\n", ids.c_str());
        return 4;
    }
    return 0;
}

struct SchwarzRun {
    PotentialSolution sol;
    DomainGraph graph;
    SchwarzState state;
};

SchwarzRun run_schwarz(const Pipeline& p) {
    SchwarzRun r;
    r.sol = run_solve(p);
    if (!r.sol.converged) throw std::runtime_error("solver did not converge");
    r.graph = extract_domain(r.sol);
    Timer t("schwarz state");
    r.state = build_schwarz_state(r.sol, config_shift(p.cfg, p.n));
    return r;
}

int cmd_schwarz(const Pipeline& p) {
    SchwarzRun r = run_schwarz(p);
    double h = 0;
    for (int d = 0; d < p.n; ++d) h = std::max(h, r.sol.grid.spacing(d));

    CrResidual cr = cr_residual(r.state);
    Json body;
    body["solution"] = to_json(r.sol);
    body["cr"] = to_json(cr);
    body["tangency"] = to_json(boundary_tangency_check(r.state, r.graph));
    body["hessian"] = to_json(hessian_checks(r.state, r.graph));
    {
        Eigen::MatrixXd I = hessian_integrals(r.sol, r.graph);
        Json m = Json::array();
        for (int a = 0; a < I.rows(); ++a) {
            Json row = Json::array();
            for (int b = 0; b < I.cols(); ++b) row.push_back(I(a, b));
            m.push_back(row);
        }
        body["hessian_integrals"] = m;
    }
    body["tube_mass"] = to_json(tube_mass_check(r.sol, r.graph));
    if (p.n == 2) body["schwarz_function"] = to_json(schwarz_function_2d(r.state, r.graph));

    double bar = 10 * h;
    if (p.cfg.contains("tolerances"))
        bar = get_or(p.cfg.at("tolerances"), "schwarz_residual_max", bar,
                     "tolerances.schwarz_residual_max");
    body["residual_bar"] = bar;
    write_json_report((p.out / "schwarz.json").string(), body, p.hash);
    if (cr.components_clean.max > bar) {
        std::fprintf(stderr, "schwarz residual %.3e exceeds bar %.3e\n",
                     cr.components_clean.max, bar);
        return 5;
    }
    return 0;
}

GammaOptions config_gamma(const Json& cfg) {
    GammaOptions o;
    if (!cfg.contains("gamma")) return o;
    const Json& g = cfg.at("gamma");
    o.rmin_cells = get_or(g, "rmin_cells", o.rmin_cells, "gamma.rmin_cells");
    o.ladder = get_or(g, "ladder", o.ladder, "gamma.ladder");
    o.starts = get_or(g, "starts", o.starts, "gamma.starts");
    o.trace_tol = get_or(g, "trace_tol", o.trace_tol, "gamma.trace_tol");
    o.cluster_cells = get_or(g, "cluster_cells", o.cluster_cells, "gamma.cluster_cells");
    return o;
}

int cmd_gamma(const Pipeline& p) {
    SchwarzRun r = run_schwarz(p);
    GammaTrace trace;
    {
        Timer t("gamma trace");
        trace = trace_gamma(r.state, r.graph, config_gamma(p.cfg));
    }
    Json body;
    body["gamma"] = to_json(trace);
    if (p.n == 2) body["nearest_point"] = to_json(nearest_point_check_2d(r.state, r.graph, &trace));
    write_json_report((p.out / "gamma.json").string(), body, p.hash);
    write_csv_gamma((p.out / "gamma.csv").string(), trace, p.hash);
    return 0;
}

int cmd_degree(const Pipeline& p) {
    SchwarzRun r = run_schwarz(p);
    std::vector<double> ts;
    if (p.cfg.contains("degree"))
        ts = get_or(p.cfg.at("degree"), "t_samples", ts, "degree.t_samples");
    DegreeResult res;
    {
        Timer t("degree scan");
        res = degree_scan(r.state, r.graph, ts);
    }
    Json body;
    body["degree"] = to_json(res);
    write_json_report((p.out / "degree.json").string(), body, p.hash);
    write_csv_mesh((p.out / "mesh.csv").string(), build_boundary_mesh(r.state, r.graph, 1), p.hash);
    bool conclusive = res.agree;
    for (size_t k = 0; k < res.conclusive.size(); ++k)
        if (!res.conclusive[k]) conclusive = false;
    if (!conclusive) {
        std::fprintf(stderr, "degree scan inconclusive or methods disagree\n");
        return 6;
    }
    return 0;
}

int cmd_spherebal(const Pipeline& p) {
    Grid grid = config_grid(p.cfg, p.n);
    MeasureSpec mu = config_measure(p.cfg, grid.base_grid(), p.n);
    const Json& sb = member(p.cfg, "spherebal", "spherebal");
    double R = get_req<double>(sb, "R", "spherebal.R");
    Vec center = Vec::Zero();
    if (sb.contains("center")) {
        auto c = get_req<std::vector<double>>(sb, "center", "spherebal.center");
        if (static_cast<int>(c.size()) != p.n)
            throw ConfigError("spherebal.center must have one entry per axis");
        for (int d = 0; d < p.n; ++d) center[d] = c[d];
    }
    SphereBalOptions opt;
    opt.n_theta = get_or(sb, "n_theta", opt.n_theta, "spherebal.n_theta");
    opt.n_phi = get_or(sb, "n_phi", opt.n_phi, "spherebal.n_phi");

    try {
        Timer t("sphere balayage");
        SphereDensity d = poisson_balayage_density(mu, center, R, opt);
        HemisphereConvexity conv = hemisphere_potential_convexity(mu, center, R);
        Json body;
        body["sphere_density"] = to_json(d);
        body["hemisphere_convexity"] = to_json(conv);
        body["mass_error"] =
            std::abs(d.quadrature_mass - d.measure_mass) / std::max(d.measure_mass, 1e-300);
        write_json_report((p.out / "spherebal.json").string(), body, p.hash);
        write_csv_sphere((p.out / "spherebal.csv").string(), d, p.hash);
    } catch (const std::runtime_error& e) {
        if (std::string(e.what()).find("support touches") != std::string::npos) {
            std::fprintf(stderr, "%s\n", e.what());
            return 7;
        }
        throw;
    }
    return 0;
}

int cmd_verify(const fs::path& out) {
    std::vector<std::pair<std::string, std::string>> hashes;
    if (!fs::is_directory(out)) {
        std::fprintf(stderr, "verify: no output directory %s\n", out.string().c_str());
        return 1;
    }
    for (const auto& e : fs::directory_iterator(out)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        if (ext != ".json" && ext != ".csv") continue;
        try {
            hashes.emplace_back(e.path().filename().string(), read_report_hash(e.path().string()));
        } catch (const std::exception&) {
            std::fprintf(stderr, "verify: %s carries no hash, skipped\n",
                         e.path().filename().string().c_str());
        }
    }
    std::sort(hashes.begin(), hashes.end());
    bool ok = true;
    for (const auto& [name, h] : hashes) {
        std::printf("%s %s\n", h.c_str(), name.c_str());
        if (h != hashes.front().second) ok = false;
    }
    if (hashes.empty()) {
        std::printf("verify: no reports found\n");
        return 0;
    }
    if (!ok) {
        std::fprintf(stderr, "verify: config hash mismatch across reports\n");
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quadrature-domain laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads = 0;
    double tol = -1;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_dir, "output directory (default $QDLAB_OUT or .)");
    app.add_option("--threads", threads, "worker threads (default: hardware)");
    app.add_option("--tol", tol, "override solver tolerance");

    auto* c_solve = app.add_subcommand("solve", "run the obstacle-problem solver");
    auto* c_extract = app.add_subcommand("extract", "solve and extract the boundary graph");
    auto* c_check = app.add_subcommand("check", "run the ten equivalence criteria");
    auto* c_schwarz = app.add_subcommand("schwarz", "build fields and residual checks");
    auto* c_gamma = app.add_subcommand("gamma", "trace the antiparallel-gradient arc");
    auto* c_degree = app.add_subcommand("degree", "boundary and preimage degree scan");
    auto* c_spherebal = app.add_subcommand("spherebal", "classical balayage onto a sphere");
    auto* c_verify = app.add_subcommand("verify", "check report hashes in the output dir");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) set_thread_count(threads);

    if (out_dir.empty()) {
        const char* env = std::getenv("QDLAB_OUT");
        out_dir = env ? env : ".";
    }

    try {
        fs::create_directories(out_dir);
        if (app.got_subcommand(c_verify)) return cmd_verify(out_dir);

        if (config_path.empty()) throw ConfigError("--config is required");
        Pipeline p;
        try {
            p.cfg = read_json_file(config_path);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        if (!p.cfg.is_object()) throw ConfigError("config root must be a JSON object");
        if (tol > 0) p.cfg["solver"]["tol"] = tol;
        p.n = config_dimension(p.cfg);
        config_grid(p.cfg, p.n);
        p.hash = config_hash(p.cfg);
        p.out = out_dir;

        if (app.got_subcommand(c_solve)) return cmd_solve(p);
        if (app.got_subcommand(c_extract)) return cmd_extract(p);
        if (app.got_subcommand(c_check)) return cmd_check(p);
        if (app.got_subcommand(c_schwarz)) return cmd_schwarz(p);
        if (app.got_subcommand(c_gamma)) return cmd_gamma(p);
        if (app.got_subcommand(c_degree)) return cmd_degree(p);
        if (app.got_subcommand(c_spherebal)) return cmd_spherebal(p);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        std::string msg = e.what();
        if (msg.find("invalid JSON") != std::string::npos) return 2;
        if (msg.find("did not converge") != std::string::npos) return 3;
        return 1;
    }
    return 0;
}
