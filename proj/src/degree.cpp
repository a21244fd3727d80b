#include "qdlab/degree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qdlab/parallel.hpp"

namespace qdlab {

namespace {

double max_spacing(const Grid& g) {
    double h = 0;
    for (int d = 0; d < g.dim(); ++d) h = std::max(h, g.spacing(d));
    return h;
}

Vec ambient_point(double x0, double x1, double height, int dim) {
    if (dim == 2) return Vec(x0, height, 0);
    return Vec(x0, x1, height);
}

// Closed-form sigma on the two boundary sheets, evaluated at arbitrary base
// points through interpolation of the extracted graph and the layer values.
struct SigmaForms {
    const SchwarzState& st;
    const DomainGraph& graph;
    int n;
    double hb;

    SigmaForms(const SchwarzState& s, const DomainGraph& gr)
        : st(s), graph(gr), n(s.sol.grid.dim()), hb(max_spacing(gr.base)) {}

    double gf(double x0, double x1) const {
        return std::max(interpolate(graph.g, Vec(x0, x1, 0)), 0.0);
    }
    double ff(double x0, double x1) const {
        return std::max(interpolate(graph.f, Vec(x0, x1, 0)), 0.0);
    }
    double ulayer(double x0, double x1) const {
        return interpolate(st.sol.u, ambient_point(x0, x1, 0.0, n));
    }

    Eigen::VectorXd plane_sigma(double x0, double x1) const {
        Eigen::VectorXd s(n);
        double y[2] = {x0 - st.shift[0], (n == 3) ? x1 - st.shift[1] : 0.0};
        double f = ff(x0, x1);
        double rho = 0, ydg = 0, y2 = 0;
        double du[2] = {0, 0};
        du[0] = (ulayer(x0 + hb, x1) - ulayer(x0 - hb, x1)) / (2 * hb);
        if (n == 3) du[1] = (ulayer(x0, x1 + hb) - ulayer(x0, x1 - hb)) / (2 * hb);
        for (int d = 0; d + 1 < n; ++d) {
            ydg += y[d] * du[d];
            y2 += y[d] * y[d];
        }
        rho = 0.5 * y2 - ydg - (n - 2) * ulayer(x0, x1);
        for (int d = 0; d + 1 < n; ++d) s[d] = -0.5 * y[d] * f;
        s[n - 1] = rho;
        return s;
    }

    Eigen::VectorXd graph_sigma(double x0, double x1) const {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
        double y2 = (x0 - st.shift[0]) * (x0 - st.shift[0]);
        if (n == 3) y2 += (x1 - st.shift[1]) * (x1 - st.shift[1]);
        double g = gf(x0, x1);
        s[n - 1] = 0.5 * (y2 + g * g);
        return s;
    }
};

// Field sigma interpolated at an inward offset from a graph point, for the
// closed-form consistency figure.
double sheet_mismatch_sample(const SigmaForms& sf, double x0, double x1,
                             const Eigen::VectorXd& closed) {
    const Grid& g = sf.st.sol.grid;
    int n = sf.n;
    double h = max_spacing(g);
    double gv = sf.gf(x0, x1);
    double d0 = (sf.gf(x0 + 0.5 * sf.hb, x1) - sf.gf(x0 - 0.5 * sf.hb, x1)) / sf.hb;
    double d1 = (n == 3) ? (sf.gf(x0, x1 + 0.5 * sf.hb) - sf.gf(x0, x1 - 0.5 * sf.hb)) / sf.hb : 0;
    double speed = std::sqrt(1 + d0 * d0 + d1 * d1);
    Vec x = ambient_point(x0, x1, gv, n);
    x[0] += 2 * h * d0 / speed;
    if (n == 3) x[1] += 2 * h * d1 / speed;
    x[n - 1] -= 2 * h / speed;
    if (!g.contains(x, 0.5 * h) || x[n - 1] < h) return -1;
    auto stc = interp_stencil(g, x);
    double worst = 0;
    for (int c = 0; c < n; ++c) {
        double acc = 0;
        for (int q = 0; q < stc.count; ++q) acc += stc.wts[q] * sf.st.sigma.comp(c)[stc.ids[q]];
        worst = std::max(worst, std::abs(acc - closed[c]));
    }
    return worst;
}

BoundaryMesh build_mesh_2d(const SchwarzState& st, const DomainGraph& graph, int q) {
    const Grid& base = graph.base;
    SigmaForms sf(st, graph);
    int ilo = -1, ihi = -1;
    for (int i = 0; i < base.dims(0); ++i)
        if (graph.in_d[base.flat(i, 0, 0)]) {
            if (ilo < 0) ilo = i;
            ihi = i;
        }
    if (ilo < 0) throw std::runtime_error("boundary mesh: base domain is empty");

    BoundaryMesh mesh;
    mesh.dim = 2;
    double xL = base.coord(0, ilo), xR = base.coord(0, ihi);
    double step = sf.hb / q;
    int M = std::max(2, static_cast<int>(std::llround((xR - xL) / step)));

    for (int k = 0; k <= M; ++k) {
        double x = xL + (xR - xL) * k / M;
        mesh.verts.push_back(Vec(x, 0, 0));
        mesh.sigma.push_back(sf.plane_sigma(x, 0));
    }
    for (int k = M; k >= 0; --k) {
        double x = xL + (xR - xL) * k / M;
        mesh.verts.push_back(Vec(x, sf.gf(x, 0), 0));
        mesh.sigma.push_back(sf.graph_sigma(x, 0));
    }

    double mm = 0;
    double h = max_spacing(st.sol.grid);
    int probes = 0;
    for (int k = 0; k <= M && probes < 200; k += std::max(1, M / 64)) {
        double x = xL + (xR - xL) * k / M;
        if (sf.gf(x, 0) < 4 * h) continue;
        double s = sheet_mismatch_sample(sf, x, 0, sf.graph_sigma(x, 0));
        if (s >= 0) {
            mm = std::max(mm, s);
            ++probes;
        }
    }
    mesh.mismatch = mm;
    return mesh;
}

BoundaryMesh build_mesh_3d(const SchwarzState& st, const DomainGraph& graph, int q) {
    const Grid& base = graph.base;
    SigmaForms sf(st, graph);
    int i0 = base.dims(0), i1 = -1, j0 = base.dims(1), j1 = -1;
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j)
            if (graph.in_d[base.flat(i, j, 0)]) {
                i0 = std::min(i0, i); i1 = std::max(i1, i);
                j0 = std::min(j0, j); j1 = std::max(j1, j);
            }
    if (i1 < 0) throw std::runtime_error("boundary mesh: base domain is empty");
    i0 = std::max(i0 - 1, 0); i1 = std::min(i1 + 1, base.dims(0) - 1);
    j0 = std::max(j0 - 1, 0); j1 = std::min(j1 + 1, base.dims(1) - 1);

    const int W = (i1 - i0) * q, Hh = (j1 - j0) * q;
    auto xat = [&](int a) { return base.coord(0, i0) + (base.coord(0, i1) - base.coord(0, i0)) * a / W; };
    auto yat = [&](int b) { return base.coord(1, j0) + (base.coord(1, j1) - base.coord(1, j0)) * b / Hh; };

    BoundaryMesh mesh;
    mesh.dim = 3;
    std::vector<double> gval(static_cast<size_t>(W + 1) * (Hh + 1));
    std::vector<int> bot(static_cast<size_t>(W + 1) * (Hh + 1), -1);
    std::vector<int> top(static_cast<size_t>(W + 1) * (Hh + 1), -1);
    auto lid = [&](int a, int b) { return static_cast<size_t>(a) * (Hh + 1) + b; };
    for (int a = 0; a <= W; ++a)
        for (int b = 0; b <= Hh; ++b) gval[lid(a, b)] = sf.gf(xat(a), yat(b));

    auto need_bot = [&](int a, int b) {
        int& id = bot[lid(a, b)];
        if (id < 0) {
            id = static_cast<int>(mesh.verts.size());
            mesh.verts.push_back(Vec(xat(a), yat(b), 0));
            mesh.sigma.push_back(sf.plane_sigma(xat(a), yat(b)));
        }
        return id;
    };
    auto need_top = [&](int a, int b) {
        double g = gval[lid(a, b)];
        if (g <= 0) return need_bot(a, b);
        int& id = top[lid(a, b)];
        if (id < 0) {
            id = static_cast<int>(mesh.verts.size());
            mesh.verts.push_back(Vec(xat(a), yat(b), g));
            mesh.sigma.push_back(sf.graph_sigma(xat(a), yat(b)));
        }
        return id;
    };

    for (int a = 0; a < W; ++a)
        for (int b = 0; b < Hh; ++b) {
            double g00 = gval[lid(a, b)], g10 = gval[lid(a + 1, b)];
            double g11 = gval[lid(a + 1, b + 1)], g01 = gval[lid(a, b + 1)];
            if (g00 <= 0 && g10 <= 0 && g11 <= 0 && g01 <= 0) continue;
            int t00 = need_top(a, b), t10 = need_top(a + 1, b);
            int t11 = need_top(a + 1, b + 1), t01 = need_top(a, b + 1);
            int b00 = need_bot(a, b), b10 = need_bot(a + 1, b);
            int b11 = need_bot(a + 1, b + 1), b01 = need_bot(a, b + 1);
            mesh.tris.push_back({t00, t10, t11});
            mesh.tris.push_back({t00, t11, t01});
            mesh.tris.push_back({b00, b11, b10});
            mesh.tris.push_back({b00, b01, b11});
        }

    double mm = 0;
    double h = max_spacing(st.sol.grid);
    int probes = 0;
    int stride = std::max(1, (W * Hh) / 256);
    for (int a = 0; a <= W && probes < 300; a += std::max(1, stride / (Hh + 1) + 1))
        for (int b = 0; b <= Hh && probes < 300; b += 2) {
            if (gval[lid(a, b)] < 4 * h) continue;
            double s = sheet_mismatch_sample(sf, xat(a), yat(b), sf.graph_sigma(xat(a), yat(b)));
            if (s >= 0) {
                mm = std::max(mm, s);
                ++probes;
            }
        }
    mesh.mismatch = mm;
    return mesh;
}

}  // namespace

BoundaryMesh build_boundary_mesh(const SchwarzState& st, const DomainGraph& graph, int refine) {
    int q = std::max(1, refine);
    if (st.sol.grid.dim() == 2) return build_mesh_2d(st, graph, q);
    return build_mesh_3d(st, graph, q);
}

int winding_number_2d(const std::vector<Eigen::Vector2d>& path, const Eigen::Vector2d& y) {
    const size_t m = path.size();
    if (m < 3) throw std::invalid_argument("winding: need at least 3 vertices");
    double scale = 1e-12;
    for (const auto& p : path) scale = std::max(scale, (p - y).norm());
    const double tol = 1e-11 * scale;

    double total = 0;
    for (size_t i = 0; i < m; ++i) {
        Eigen::Vector2d a = path[i] - y;
        Eigen::Vector2d b = path[(i + 1) % m] - y;
        // Distance from the target to this segment.
        Eigen::Vector2d d = b - a;
        double dd = d.squaredNorm();
        double t = dd > 0 ? std::clamp(-a.dot(d) / dd, 0.0, 1.0) : 0.0;
        if ((a + t * d).norm() < tol)
            throw std::invalid_argument("winding: target lies on the path");
        double ang = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
        if (std::abs(ang) > M_PI * (1 - 1e-9))
            throw std::runtime_error("winding: unresolved half-turn; path too coarse");
        total += ang;
    }
    double w = total / (2 * M_PI);
    long r = std::lround(w);
    if (std::abs(w - r) > 0.1)
        throw std::runtime_error("winding: accumulated angle far from an integer");
    return static_cast<int>(r);
}

SolidAngleDegree kronecker_degree_3d(const BoundaryMesh& mesh, const Eigen::VectorXd& y) {
    if (mesh.dim != 3) throw std::invalid_argument("solid-angle degree needs a 3D mesh");
    double scale = 1e-12;
    for (const auto& s : mesh.sigma) scale = std::max(scale, (s - y).norm());
    const double tol = 1e-11 * scale;

    double sum = 0;
    for (const auto& t : mesh.tris) {
        Eigen::Vector3d a = mesh.sigma[t[0]].head<3>() - y.head<3>();
        Eigen::Vector3d b = mesh.sigma[t[1]].head<3>() - y.head<3>();
        Eigen::Vector3d c = mesh.sigma[t[2]].head<3>() - y.head<3>();
        double la = a.norm(), lb = b.norm(), lc = c.norm();
        if (la < tol || lb < tol || lc < tol)
            throw std::invalid_argument("solid-angle degree: target touches the image mesh");
        double num = a.dot(b.cross(c));
        double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        sum += 2 * std::atan2(num, den);
    }
    double raw = sum / (4 * M_PI);
    SolidAngleDegree out;
    long r = std::lround(raw);
    out.degree = static_cast<int>(r);
    out.residual = std::abs(raw - r);
    return out;
}

namespace {

bool sigma_at(const SchwarzState& st, const Vec& x, Eigen::VectorXd& out) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    double h = max_spacing(g);
    if (!g.contains(x, 0.25 * h) || x[n - 1] < 1.8 * h) return false;
    auto stc = interp_stencil(g, x);
    out.resize(n);
    for (int c = 0; c < n; ++c) {
        double acc = 0;
        for (int q = 0; q < stc.count; ++q) acc += stc.wts[q] * st.sigma.comp(c)[stc.ids[q]];
        out[c] = acc;
    }
    return true;
}

bool jac_at(const SchwarzState& st, const Vec& x, Eigen::MatrixXd& J) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    double h = max_spacing(g);
    if (!g.contains(x, 0.25 * h) || x[n - 1] < 1.8 * h) return false;
    auto stc = interp_stencil(g, x);
    J.resize(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            double acc = 0;
            for (int q = 0; q < stc.count; ++q)
                acc += stc.wts[q] * st.jac_sigma.comp(r * n + c)[stc.ids[q]];
            J(r, c) = acc;
        }
    return true;
}

struct PreimageAttempt {
    std::vector<Vec> roots;
    std::vector<double> dets;
    bool singular = false;
    bool near_edge = false;
    double min_gap = std::numeric_limits<double>::infinity();  // min |sigma - y| on seeds
};

PreimageAttempt preimage_attempt(const SchwarzState& st, const Eigen::VectorXd& y) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    const double h = max_spacing(g);

    std::vector<std::int64_t> seeds;
    {
        std::int64_t count = 0;
        for (auto v : st.interior) count += v ? 1 : 0;
        std::int64_t stride = std::max<std::int64_t>(1, count / 400);
        std::int64_t seen = 0;
        for (std::int64_t id = 0; id < g.size(); ++id) {
            if (!st.interior[id]) continue;
            if (seen++ % stride == 0) seeds.push_back(id);
        }
    }

    PreimageAttempt out;
    const double ftol = 1e-9 * std::max(1.0, y.norm());
    Eigen::VectorXd F(n), Ft(n);
    Eigen::MatrixXd J(n, n);

    for (std::int64_t seed : seeds) {
        auto c = g.unflat(seed);
        Vec x = g.node(c[0], c[1], c[2]);
        bool alive = true;
        double fn = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 60 && alive; ++it) {
            if (!sigma_at(st, x, F)) { alive = false; break; }
            fn = (F - y).norm();
            if (fn <= 0.05 * ftol) break;
            if (!jac_at(st, x, J)) { alive = false; break; }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
            if (!lu.isInvertible()) { alive = false; break; }
            Eigen::VectorXd step = lu.solve(-(F - y));
            double cap = 5 * h;
            if (step.norm() > cap) step *= cap / step.norm();
            double lam = 1.0;
            bool improved = false;
            for (int bt = 0; bt < 8; ++bt) {
                Vec xt = x;
                for (int d = 0; d < n; ++d) xt[d] += lam * step[d];
                if (sigma_at(st, xt, Ft) && (Ft - y).norm() < fn) {
                    x = xt;
                    improved = true;
                    break;
                }
                lam *= 0.5;
            }
            if (!improved) break;
        }
        if (std::isfinite(fn)) out.min_gap = std::min(out.min_gap, fn);
        if (!alive) continue;
        if (!sigma_at(st, x, F) || (F - y).norm() > ftol) continue;

        bool dup = false;
        for (size_t r = 0; r < out.roots.size(); ++r) {
            double d2 = 0;
            for (int d = 0; d < n; ++d) d2 += (out.roots[r][d] - x[d]) * (out.roots[r][d] - x[d]);
            if (std::sqrt(d2) < 3 * h) { dup = true; break; }
        }
        if (dup) continue;

        // Interior guard: the interpolation cell must sit in the interior mask.
        auto stc = interp_stencil(g, x);
        bool edge = false;
        for (int q = 0; q < stc.count; ++q)
            if (!st.interior[stc.ids[q]]) { edge = true; break; }
        if (edge) { out.near_edge = true; continue; }

        if (!jac_at(st, x, J)) { out.near_edge = true; continue; }
        double det = J.determinant();
        double jscale = std::max(1.0, std::pow(J.norm(), n));
        if (std::abs(det) < 1e-8 * jscale) out.singular = true;
        out.roots.push_back(x);
        out.dets.push_back(det);
    }
    return out;
}

}  // namespace

PreimageResult preimage_degree(const SchwarzState& st, const Eigen::VectorXd& y) {
    const int n = st.sol.grid.dim();
    if (y.size() != n) throw std::invalid_argument("preimage degree: target dimension mismatch");
    const double h = max_spacing(st.sol.grid);

    PreimageResult res;
    Eigen::VectorXd target = y;
    for (int attempt = 0; attempt < 3; ++attempt) {
        PreimageAttempt at = preimage_attempt(st, target);
        if (at.singular && attempt + 1 < 3) {
            target = y;
            target[0] += 0.37 * h * (attempt + 1);
            target[n - 1] += 0.21 * h * (attempt + 1);
            res.note = "singular Jacobian at a root; target nudged";
            continue;
        }
        res.target = target;
        res.roots = static_cast<int>(at.roots.size());
        res.root_points = at.roots;
        res.min_gap = at.min_gap;
        int deg = 0;
        for (double d : at.dets) deg += (d > 0) ? 1 : -1;
        res.degree = deg;
        if (at.near_edge) {
            res.conclusive = false;
            res.note = "root too close to the interior-mask edge";
        } else if (at.singular) {
            res.conclusive = false;
            res.note = "singular Jacobian persisted after target nudges";
        } else if (at.roots.empty() && at.min_gap < 0.05 * std::max(1.0, target.norm())) {
            res.conclusive = false;
            res.note = "no admissible root though the field approaches the target";
        }
        return res;
    }
    return res;
}

DegreeResult degree_scan(const SchwarzState& st, const DomainGraph& graph,
                         const std::vector<double>& t_samples) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    DegreeResult out;

    double u0 = interpolate(st.sol.u, st.shift);
    auto rr = boundary_radius_range(st, graph);
    out.t_lo = -(n - 2) * u0;
    out.t_hi = 0.5 * rr.first * rr.first;
    if (out.t_hi <= out.t_lo)
        throw std::runtime_error("degree scan: empty admissible interval");

    double span = out.t_hi - out.t_lo;
    std::vector<double> ts = t_samples;
    if (ts.empty()) {
        double lo = out.t_lo + 0.05 * span, hi = out.t_hi - 0.05 * span;
        for (int k = 0; k < 5; ++k) ts.push_back(lo + (hi - lo) * k / 4);
    }
    for (double t : ts)
        if (t <= out.t_lo || t >= out.t_hi)
            throw std::invalid_argument("degree scan: target outside the open interval");

    {
        Mask core = erode(graph.base, graph.in_d, 2);
        double fmin = std::numeric_limits<double>::infinity();
        for (std::int64_t id = 0; id < graph.base.size(); ++id)
            if (core[id]) fmin = std::min(fmin, graph.f.at(id));
        out.min_density = std::isfinite(fmin) ? fmin : 0;
    }

    out.t_samples = ts;
    out.boundary_degrees.assign(ts.size(), 0);
    out.preimage_degrees.assign(ts.size(), 0);
    out.residuals.assign(ts.size(), 0.0);
    out.conclusive.assign(ts.size(), true);

    int q = 1;
    for (int round = 0; round < 3; ++round) {
        BoundaryMesh mesh = build_boundary_mesh(st, graph, q);
        out.mesh_mismatch = mesh.mismatch;
        bool need_refine = false;
        if (n == 2) {
            std::vector<Eigen::Vector2d> path;
            path.reserve(mesh.sigma.size());
            for (const auto& s : mesh.sigma) path.push_back(Eigen::Vector2d(s[0], s[1]));
            for (size_t k = 0; k < ts.size(); ++k) {
                out.boundary_degrees[k] = winding_number_2d(path, Eigen::Vector2d(0, ts[k]));
                out.residuals[k] = 0;
            }
        } else {
            for (size_t k = 0; k < ts.size(); ++k) {
                Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
                y[n - 1] = ts[k];
                SolidAngleDegree sd = kronecker_degree_3d(mesh, y);
                out.boundary_degrees[k] = sd.degree;
                out.residuals[k] = sd.residual;
                if (sd.residual > 0.1) need_refine = true;
            }
        }
        if (!need_refine) break;
        if (round + 1 < 3) q *= 2;
        else throw std::runtime_error("degree scan: rounding residual above 0.1 after refinement");
    }

    for (size_t k = 0; k < ts.size(); ++k) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
        y[n - 1] = ts[k];
        PreimageResult pr = preimage_degree(st, y);
        out.preimage_degrees[k] = pr.degree;
        // Targets on the admissible segment always have preimages, so finding
        // none means the roots were unreachable, not that the degree is zero.
        if (pr.roots == 0) pr.conclusive = false;
        out.conclusive[k] = pr.conclusive;
        if (pr.conclusive && pr.degree != out.boundary_degrees[k]) out.agree = false;
    }
    return out;
}

SchwarzFunctionChecks schwarz_function_2d(const SchwarzState& st, const DomainGraph& graph) {
    const Grid& g = st.sol.grid;
    if (g.dim() != 2) throw std::invalid_argument("schwarz function: needs a 2D solution");
    const double h = max_spacing(g);

    SchwarzFunctionChecks out;
    out.s_re = ScalarField(g);
    out.s_im = ScalarField(g);
    VectorField grad = gradient(st.sol.u);

    const std::int64_t total = g.size();
    parallel_for(total, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t id = b; id < e; ++id) {
            auto c = g.unflat(id);
            double y0 = g.coord(0, c[0]) - st.shift[0];
            double y1 = g.coord(1, c[1]) - st.shift[1];
            out.s_re.at(id) = y0 - 2 * grad.comp(0)[id];
            out.s_im.at(id) = -y1 + 2 * grad.comp(1)[id];
        }
    });

    const Grid& base = graph.base;
    Mask core = erode(base, graph.in_d, 3);
    for (int i = 0; i < base.dims(0); ++i) {
        std::int64_t bid = base.flat(i, 0, 0);
        if (!core[bid]) continue;
        double gv = graph.g.at(bid);
        if (gv < 3.5 * h) continue;
        double x0 = base.coord(0, i);
        double d0 = graph.dg.comp(0)[bid];
        double speed = std::sqrt(1 + d0 * d0);
        Vec xin(x0 + 2 * h * d0 / speed, gv - 2 * h / speed, 0);
        if (!g.contains(xin, 0.5 * h) || xin[1] < h) continue;
        auto stc = interp_stencil(g, xin);
        double sre = interpolate(out.s_re, stc), sim = interpolate(out.s_im, stc);
        double y0 = xin[0] - st.shift[0], y1 = xin[1] - st.shift[1];
        double err = std::hypot(sre - y0, sim + y1);
        out.boundary_err = std::max(out.boundary_err, err);
    }

    // Density from the imaginary part just above the plane.
    {
        int ilo = -1, ihi = -1;
        double fmax = 0;
        for (int i = 0; i < base.dims(0); ++i) {
            std::int64_t bid = base.flat(i, 0, 0);
            if (graph.in_d[bid]) {
                if (ilo < 0) ilo = i;
                ihi = i;
            }
            fmax = std::max(fmax, graph.f.at(bid));
        }
        if (ilo >= 0 && fmax > 0) {
            const ScalarField& dens = st.sol.measure.density;
            double ftol = 1e-12 * fmax;
            std::vector<double> edges;
            for (int i = 0; i < base.dims(0); ++i) {
                if (dens.at(base.flat(i, 0, 0)) <= ftol) continue;
                bool edge = (i == 0 || i + 1 == base.dims(0));
                if (!edge && dens.at(base.flat(i - 1, 0, 0)) <= ftol) edge = true;
                if (!edge && dens.at(base.flat(i + 1, 0, 0)) <= ftol) edge = true;
                if (edge) edges.push_back(base.coord(0, i));
            }
            double xc = 0.5 * (base.coord(0, ilo) + base.coord(0, ihi));
            double wid = base.coord(0, ihi) - base.coord(0, ilo);
            for (int i = ilo; i <= ihi; ++i) {
                double x0 = base.coord(0, i);
                if (std::abs(x0 - xc) > 0.45 * wid) continue;
                if (!g.contains(Vec(x0, 4 * h, 0))) continue;
                // Quadratic extrapolation down to the plane; the first row off
                // the plane is skipped since its vertical stencil crosses it.
                double s2 = interpolate(out.s_im, Vec(x0, 2 * h, 0));
                double s3 = interpolate(out.s_im, Vec(x0, 3 * h, 0));
                double s4 = interpolate(out.s_im, Vec(x0, 4 * h, 0));
                double sim = 3 * s2 - 3 * s3 + s4;
                double f = graph.f.at(base.flat(i, 0, 0));
                double err = std::abs(-sim - f) / std::max(std::abs(f), 0.05 * fmax);
                out.density_err_all = std::max(out.density_err_all, err);
                bool near_edge = false;
                for (double e : edges)
                    if (std::abs(x0 - e) < 0.5) near_edge = true;
                if (!near_edge) out.density_err = std::max(out.density_err, err);
            }
        }
    }

    // w S / 2 against rho + i omega on the interior mask.
    ScalarField cr1(g), cr2(g), tmp(g);
    derivative_axis(out.s_re, 0, cr1);
    derivative_axis(out.s_im, 1, tmp);
    cr1.data() -= tmp.data();
    derivative_axis(out.s_re, 1, cr2);
    derivative_axis(out.s_im, 0, tmp);
    cr2.data() += tmp.data();

    Mask clean = interior_clean_mask(st);
    for (std::int64_t id = 0; id < total; ++id) {
        if (!st.interior[id]) continue;
        auto c = g.unflat(id);
        double y0 = g.coord(0, c[0]) - st.shift[0];
        double y1 = g.coord(1, c[1]) - st.shift[1];
        double re = 0.5 * (y0 * out.s_re.at(id) - y1 * out.s_im.at(id));
        double im = 0.5 * (y0 * out.s_im.at(id) + y1 * out.s_re.at(id));
        double err = std::hypot(re - st.rho.at(id), im - st.omega.comp(0)[id]);
        out.sigma_err = std::max(out.sigma_err, err);
        if (clean[id])
            out.cr_err = std::max({out.cr_err, std::abs(cr1.at(id)), std::abs(cr2.at(id))});
    }
    return out;
}

NearestPointReport nearest_point_check_2d(const SchwarzState& st, const DomainGraph& graph,
                                          const GammaTrace* gamma) {
    const Grid& g = st.sol.grid;
    if (g.dim() != 2) throw std::invalid_argument("nearest point check: needs a 2D solution");
    const double h = max_spacing(g);
    const Grid& base = graph.base;

    NearestPointReport rep;
    std::vector<int> cols;
    std::vector<double> radii;
    double r0 = std::numeric_limits<double>::infinity();
    int best = -1;
    for (int i = 0; i < base.dims(0); ++i) {
        std::int64_t bid = base.flat(i, 0, 0);
        if (!graph.in_d[bid]) continue;
        double y0 = base.coord(0, i) - st.shift[0];
        double gv = graph.g.at(bid);
        double r = std::hypot(y0, gv);
        cols.push_back(i);
        radii.push_back(r);
        if (r < r0) { r0 = r; best = static_cast<int>(cols.size()) - 1; }
    }
    if (best < 0) return rep;
    rep.r0 = r0;
    rep.nearest = Eigen::Vector2d(base.coord(0, cols[best]), graph.g.at(base.flat(cols[best], 0, 0)));

    double tol = 2 * h;
    int clusters = 0, span = 0, prev = -10;
    for (size_t k = 0; k < cols.size(); ++k) {
        if (radii[k] > r0 + tol) continue;
        ++span;
        if (cols[k] - prev > 3) ++clusters;
        prev = cols[k];
    }
    rep.clusters = clusters;
    rep.degenerate = span > static_cast<int>(cols.size()) * 3 / 10;
    rep.unique = clusters == 1 && !rep.degenerate;

    if (gamma && !gamma->empty && !gamma->points.empty()) {
        double d = std::hypot(gamma->endpoint[0] - rep.nearest[0],
                              gamma->endpoint[1] - rep.nearest[1]);
        rep.gamma_gap = d;
        rep.matches_gamma = d <= 3 * h;
    }
    return rep;
}

}  // namespace qdlab
