#include "qdlab/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace qdlab {

namespace {

Json grid_json(const Grid& g) {
    Json j;
    j["dim"] = g.dim();
    Json dims = Json::array(), h = Json::array(), org = Json::array();
    for (int d = 0; d < g.dim(); ++d) {
        dims.push_back(g.dims(d));
        h.push_back(g.spacing(d));
        org.push_back(g.origin(d));
    }
    j["dims"] = dims;
    j["spacing"] = h;
    j["origin"] = org;
    return j;
}

Json vec_json(const Vec& v, int dim) {
    Json j = Json::array();
    for (int d = 0; d < dim; ++d) j.push_back(v[d]);
    return j;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << std::setprecision(17);
    return out;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const Json& config) {
    std::uint64_t h = fnv1a64(config.dump());
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

Json to_json(const ResidualReport& r) {
    return Json{{"interior_max", r.interior_max},
                {"interior_mean", r.interior_mean},
                {"boundary_u_max", r.boundary_u_max},
                {"boundary_grad_max", r.boundary_grad_max},
                {"volume", r.volume},
                {"mass_defect", r.mass_defect},
                {"interior_nodes", r.interior_nodes}};
}

Json to_json(const PotentialSolution& sol) {
    Json j;
    j["grid"] = grid_json(sol.grid);
    j["eps_height"] = sol.eps_height;
    j["tol"] = sol.tol;
    j["final_residual"] = sol.final_residual;
    j["sweeps"] = sol.sweeps;
    j["grows"] = sol.grows;
    j["converged"] = sol.converged;
    j["measure_mass"] = sol.measure.total_mass();
    return j;
}

Json to_json(const DomainGraph& graph) {
    Json j;
    j["base"] = grid_json(graph.base);
    std::int64_t cols = 0;
    double gmax = 0, fmax = 0;
    for (std::int64_t id = 0; id < graph.base.size(); ++id) {
        if (graph.in_d[id]) ++cols;
        gmax = std::max(gmax, graph.g.at(id));
        fmax = std::max(fmax, graph.f.at(id));
    }
    j["columns_in_d"] = cols;
    j["g_max"] = gmax;
    j["f_max"] = fmax;
    j["connected"] = graph.connected;
    j["eps_height"] = graph.eps_height;
    j["monotonicity_flags"] = graph.monotonicity_flags;
    return j;
}

Json to_json(const CriterionVerdict& v) {
    Json j;
    j["id"] = v.id;
    j["pass"] = v.pass;
    j["margin"] = v.margin;
    if (v.witness.size() > 0) {
        Json w = Json::array();
        for (int d = 0; d < v.witness.size(); ++d) w.push_back(v.witness[d]);
        j["witness"] = w;
    }
    if (!v.note.empty()) j["note"] = v.note;
    return j;
}

Json to_json(const CriteriaReport& r) {
    Json j;
    Json vs = Json::array();
    for (const auto& v : r.verdicts) vs.push_back(to_json(v));
    j["verdicts"] = vs;
    j["equivalent"] = r.equivalent;
    j["all_pass"] = r.all_pass;
    j["margin_signs_consistent"] = r.margin_signs_consistent;
    j["tol"] = r.tol;
    j["sample_margin"] = r.sample_margin;
    j["samples_used"] = r.samples_used;
    return j;
}

Json to_json(const FieldStats& s) {
    return Json{{"max", s.max}, {"mean", s.mean}, {"nodes", s.nodes}};
}

Json to_json(const CrResidual& r) {
    Json j;
    j["components_all"] = to_json(r.components_all);
    j["components_clean"] = to_json(r.components_clean);
    j["lap_rho_all"] = to_json(r.lap_rho_all);
    j["lap_rho_clean"] = to_json(r.lap_rho_clean);
    j["lap_omega_all"] = to_json(r.lap_omega_all);
    j["lap_omega_clean"] = to_json(r.lap_omega_clean);
    j["div_sigma_clean"] = to_json(r.div_sigma_clean);
    j["algebraic_clean"] = to_json(r.algebraic_clean);
    j["div_omega_clean"] = to_json(r.div_omega_clean);
    j["curl_match_clean"] = to_json(r.curl_match_clean);
    j["omega_radial"] = to_json(r.omega_radial);
    j["omega_phi_density"] = to_json(r.omega_phi_density);
    j["h"] = r.h;
    return j;
}

Json to_json(const TangencyReport& r) {
    return Json{{"max_normal_frac", r.max_normal_frac},
                {"max_projection_err", r.max_projection_err},
                {"samples", r.samples}};
}

Json to_json(const GammaTrace& t) {
    Json j;
    j["empty"] = t.empty;
    j["branched"] = t.branched;
    j["degenerate_radial"] = t.degenerate_radial;
    if (!t.reason.empty()) j["reason"] = t.reason;
    j["certificate"] = t.certificate;
    j["points"] = static_cast<std::int64_t>(t.points.size());
    j["radii"] = t.radii;
    j["residuals"] = t.residuals;
    Json pts = Json::array();
    for (const auto& p : t.points) pts.push_back(vec_json(p, 3));
    j["trace"] = pts;
    j["start_direction"] = vec_json(t.start_direction, 3);
    j["start_alignment"] = t.start_alignment;
    j["endpoint"] = vec_json(t.endpoint, 3);
    j["reached_boundary"] = t.reached_boundary;
    j["max_tangent_angle"] = t.max_tangent_angle;
    return j;
}

Json to_json(const HessianReport& r) {
    return Json{{"tr_max_err", r.tr_max_err},
                {"offsets", r.offsets},
                {"proj_err", r.proj_err},
                {"hn_err", r.hn_err},
                {"hx_err", r.hx_err},
                {"slope", r.slope},
                {"interior_identity_err", r.interior_identity_err}};
}

Json to_json(const TubeMass& t) {
    return Json{{"volume", t.volume}, {"half_mass", t.half_mass}, {"defect", t.defect}};
}

Json to_json(const PreimageResult& r) {
    Json j;
    j["degree"] = r.degree;
    j["roots"] = r.roots;
    j["conclusive"] = r.conclusive;
    if (std::isfinite(r.min_gap)) j["min_gap"] = r.min_gap;
    if (!r.note.empty()) j["note"] = r.note;
    Json pts = Json::array();
    for (const auto& p : r.root_points) pts.push_back(vec_json(p, 3));
    j["root_points"] = pts;
    if (r.target.size() > 0) {
        Json t = Json::array();
        for (int d = 0; d < r.target.size(); ++d) t.push_back(r.target[d]);
        j["target"] = t;
    }
    return j;
}

Json to_json(const DegreeResult& r) {
    Json j;
    j["t_samples"] = r.t_samples;
    j["boundary_degrees"] = r.boundary_degrees;
    j["preimage_degrees"] = r.preimage_degrees;
    j["residuals"] = r.residuals;
    std::vector<int> conc;
    for (bool b : r.conclusive) conc.push_back(b ? 1 : 0);
    j["conclusive"] = conc;
    j["agree"] = r.agree;
    j["t_lo"] = r.t_lo;
    j["t_hi"] = r.t_hi;
    j["mesh_mismatch"] = r.mesh_mismatch;
    j["min_density"] = r.min_density;
    return j;
}

Json to_json(const SchwarzFunctionChecks& c) {
    return Json{{"boundary_err", c.boundary_err},
                {"density_err", c.density_err},
                {"density_err_all", c.density_err_all},
                {"sigma_err", c.sigma_err},
                {"cr_err", c.cr_err}};
}

Json to_json(const NearestPointReport& r) {
    Json j;
    j["r0"] = r.r0;
    j["clusters"] = r.clusters;
    j["nearest"] = std::vector<double>{r.nearest[0], r.nearest[1]};
    j["unique"] = r.unique;
    j["degenerate"] = r.degenerate;
    j["matches_gamma"] = r.matches_gamma;
    j["gamma_gap"] = r.gamma_gap;
    return j;
}

Json to_json(const SphereDensity& d) {
    Json j;
    j["ambient_dim"] = d.ambient_dim;
    j["center"] = vec_json(d.center, d.ambient_dim);
    j["radius"] = d.radius;
    j["n_theta"] = static_cast<std::int64_t>(d.theta.size());
    j["n_phi"] = static_cast<std::int64_t>(d.phi.size());
    j["quadrature_mass"] = d.quadrature_mass;
    j["measure_mass"] = d.measure_mass;
    double bmin = 0, bmax = 0;
    if (d.beta.size() > 0) {
        bmin = d.beta.minCoeff();
        bmax = d.beta.maxCoeff();
    }
    j["beta_min"] = bmin;
    j["beta_max"] = bmax;
    return j;
}

Json to_json(const HemisphereConvexity& c) {
    return Json{{"min_second_difference", c.min_second_difference},
                {"integrand_identity_err", c.integrand_identity_err},
                {"samples", c.samples}};
}

void write_json_report(const std::string& path, Json body, const std::string& hash) {
    body["config_hash"] = hash;
    auto out = open_out(path);
    out << body.dump(2) << "\n";
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

std::string read_report_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string first;
    std::getline(in, first);
    const std::string tag = "# config_hash=";
    if (first.rfind(tag, 0) == 0) return first.substr(tag.size());
    Json j = read_json_file(path);
    if (!j.contains("config_hash")) throw std::runtime_error("no config hash in " + path);
    return j["config_hash"].get<std::string>();
}

void write_csv_criteria(const std::string& path, const CriteriaReport& r,
                        const std::string& hash) {
    auto out = open_out(path);
    out << "# config_hash=" << hash << "\n";
    out << "id,pass,margin,note\n";
    for (const auto& v : r.verdicts)
        out << v.id << "," << (v.pass ? 1 : 0) << "," << v.margin << ",\"" << v.note << "\"\n";
}

void write_csv_gamma(const std::string& path, const GammaTrace& t, const std::string& hash) {
    auto out = open_out(path);
    out << "# config_hash=" << hash << "\n";
    out << "r,x0,x1,x2,residual\n";
    for (size_t k = 0; k < t.points.size(); ++k)
        out << t.radii[k] << "," << t.points[k][0] << "," << t.points[k][1] << ","
            << t.points[k][2] << "," << t.residuals[k] << "\n";
}

void write_csv_sphere(const std::string& path, const SphereDensity& d, const std::string& hash) {
    auto out = open_out(path);
    out << "# config_hash=" << hash << "\n";
    out << "colatitude,longitude,beta\n";
    if (d.ambient_dim == 2) {
        for (size_t i = 0; i < d.theta.size(); ++i)
            out << d.theta[i] << ",0," << d.beta(static_cast<Eigen::Index>(i), 0) << "\n";
    } else {
        for (size_t i = 0; i < d.theta.size(); ++i)
            for (size_t j = 0; j < d.phi.size(); ++j)
                out << d.theta[i] << "," << d.phi[j] << ","
                    << d.beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << "\n";
    }
}

void write_csv_mesh(const std::string& path, const BoundaryMesh& mesh, const std::string& hash) {
    auto out = open_out(path);
    out << "# config_hash=" << hash << "\n";
    out << "kind,i0,i1,i2,x0,x1,x2,s0,s1,s2\n";
    for (size_t k = 0; k < mesh.verts.size(); ++k) {
        const auto& v = mesh.verts[k];
        const auto& s = mesh.sigma[k];
        out << "v," << k << ",0,0," << v[0] << "," << v[1] << "," << v[2] << "," << s[0] << ","
            << s[1] << "," << (s.size() > 2 ? s[2] : 0.0) << "\n";
    }
    for (const auto& t : mesh.tris)
        out << "f," << t[0] << "," << t[1] << "," << t[2] << ",0,0,0,0,0,0\n";
}

}  // namespace qdlab
