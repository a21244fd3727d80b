#include "qdlab/schwarz.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "qdlab/parallel.hpp"

namespace qdlab {

namespace {

struct Acc {
    double mx = 0;
    double sum = 0;
    std::int64_t n = 0;
    void add(double v) {
        double a = std::abs(v);
        if (a > mx) mx = a;
        sum += a;
        ++n;
    }
    FieldStats stats() const {
        FieldStats s;
        s.max = mx;
        s.mean = n ? sum / static_cast<double>(n) : 0.0;
        s.nodes = n;
        return s;
    }
};

double max_spacing(const Grid& g) {
    double h = 0;
    for (int d = 0; d < g.dim(); ++d) h = std::max(h, g.spacing(d));
    return h;
}

Vec ambient_from_base(const Vec& s, double height, int dim) {
    Vec x = Vec::Zero();
    for (int d = 0; d + 1 < dim; ++d) x[d] = s[d];
    x[dim - 1] = height;
    return x;
}

// Nodes of the measure support whose neighborhood sees a density edge or a
// point mass; derivative truncation concentrates there.
std::vector<Vec> measure_edge_points(const MeasureSpec& mu) {
    std::vector<Vec> pts;
    const Grid& b = mu.base;
    double fmax = 0;
    for (std::int64_t id = 0; id < b.size(); ++id) fmax = std::max(fmax, mu.density.at(id));
    double ftol = 1e-12 * std::max(fmax, 1.0);
    if (fmax > 0) {
        for (int i = 0; i < b.dims(0); ++i)
            for (int j = 0; j < b.dims(1); ++j) {
                std::int64_t id = b.flat(i, j, 0);
                if (mu.density.at(id) <= ftol) continue;
                bool edge = false;
                int idx[3] = {i, j, 0};
                for (int d = 0; d < b.dim() && !edge; ++d)
                    for (int sgn = -1; sgn <= 1 && !edge; sgn += 2) {
                        int q[3] = {idx[0], idx[1], idx[2]};
                        q[d] += sgn;
                        if (q[d] < 0 || q[d] >= b.dims(d)) { edge = true; break; }
                        if (mu.density.at(b.flat(q[0], q[1], q[2])) <= ftol) edge = true;
                    }
                if (edge) pts.push_back(b.node(i, j, 0));
            }
    }
    for (const auto& p : mu.points) pts.push_back(p.x);
    return pts;
}

void interp_comps(const VectorField& f, const InterpStencil& st, double* out, int ncomp) {
    for (int q = 0; q < ncomp; ++q) {
        double acc = 0;
        for (int c = 0; c < st.count; ++c) acc += st.wts[c] * f.comp(q)[st.ids[c]];
        out[q] = acc;
    }
}

// Copy of `inner` with balls of the given radius removed around density edges
// and point masses, where derivative truncation concentrates.
Mask exclude_measure_edges(const SchwarzState& st, const Mask& inner, double radius) {
    Mask clean = inner;
    if (radius <= 0) return clean;
    auto edges = measure_edge_points(st.sol.measure);
    if (edges.empty()) return clean;
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    const double r2 = radius * radius;
    for (int i = 0; i < g.dims(0); ++i)
        for (int j = 0; j < g.dims(1); ++j)
            for (int k = 0; k < g.dims(2); ++k) {
                std::int64_t id = g.flat(i, j, k);
                if (!clean[id]) continue;
                Vec x = g.node(i, j, k);
                for (const auto& p : edges) {
                    double d2 = 0;
                    for (int d = 0; d < n; ++d) d2 += (x[d] - p[d]) * (x[d] - p[d]);
                    if (d2 < r2) {
                        clean[id] = 0;
                        break;
                    }
                }
            }
    return clean;
}

}  // namespace

int omega_pair_count(int dim) { return dim * (dim - 1) / 2; }

int omega_pair_index(int dim, int i, int j) {
    if (!(0 <= i && i < j && j < dim)) throw std::invalid_argument("omega pair: need 0 <= i < j < dim");
    return i * dim - i * (i + 1) / 2 + (j - i - 1);
}

SchwarzState build_schwarz_state(const PotentialSolution& sol, const Vec& origin_shift) {
    const Grid& g = sol.grid;
    const int n = g.dim();
    const int va = g.vertical_axis();
    if (std::abs(origin_shift[va]) > 1e-12)
        throw std::invalid_argument("schwarz state: origin shift must lie on the base hyperplane");
    for (int d = n; d < 3; ++d)
        if (std::abs(origin_shift[d]) > 1e-12)
            throw std::invalid_argument("schwarz state: shift has components beyond the dimension");
    if (!g.contains(origin_shift, 2.0 * max_spacing(g)))
        throw std::invalid_argument("schwarz state: shifted origin outside the grid box");

    SchwarzState st;
    st.sol = sol;
    st.shift = origin_shift;

    VectorField grad = gradient(sol.u);
    const int npairs = omega_pair_count(n);
    st.rho = ScalarField(g);
    st.omega = VectorField(g, npairs);
    st.xi = VectorField(g, n);
    st.sigma = VectorField(g, n);
    st.jac_sigma = VectorField(g, n * n);

    const std::int64_t total = g.size();
    parallel_for(total, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t id = b; id < e; ++id) {
            auto c = g.unflat(id);
            double y[3] = {0, 0, 0};
            for (int d = 0; d < n; ++d) y[d] = g.coord(d, c[d]) - origin_shift[d];
            double ydotg = 0, y2 = 0;
            for (int d = 0; d < n; ++d) {
                ydotg += y[d] * grad.comp(d)[id];
                y2 += y[d] * y[d];
            }
            st.rho.at(id) = 0.5 * y2 - ydotg - (n - 2) * sol.u.at(id);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    st.omega.comp(omega_pair_index(n, i, j))[id] =
                        y[i] * grad.comp(j)[id] - y[j] * grad.comp(i)[id];
        }
    });

    VectorField rho_grad = gradient(st.rho);
    for (int d = 0; d < n; ++d) st.xi.comp(d) = rho_grad.comp(d);

    for (int k = 0; k + 1 < n; ++k) st.sigma.comp(k) = st.omega.comp(omega_pair_index(n, k, va));
    st.sigma.comp(n - 1) = st.rho.data();

    ScalarField comp_view(g), der(g);
    for (int r = 0; r < n; ++r) {
        comp_view.data() = st.sigma.comp(r);
        for (int c = 0; c < n; ++c) {
            derivative_axis(comp_view, c, der);
            st.jac_sigma.comp(r * n + c) = der.data();
        }
    }

    st.interior = interior_mask(sol, 2);
    return st;
}

Mask interior_clean_mask(const SchwarzState& st, double edge_exclusion) {
    return exclude_measure_edges(st, st.interior, edge_exclusion);
}

CrResidual cr_residual(const SchwarzState& st, const CrOptions& opt) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    const int npairs = omega_pair_count(n);
    CrResidual out;
    out.h = max_spacing(g);

    Mask inner = (opt.clearance == 2) ? st.interior : interior_mask(st.sol, opt.clearance);
    Mask clean = exclude_measure_edges(st, inner, opt.edge_exclusion);

    // Derivative tables of every stored rotation component along every axis.
    std::vector<ScalarField> dw(static_cast<size_t>(npairs) * n, ScalarField(g));
    {
        ScalarField comp_view(g);
        for (int p = 0; p < npairs; ++p) {
            comp_view.data() = st.omega.comp(p);
            for (int d = 0; d < n; ++d)
                derivative_axis(comp_view, d, dw[static_cast<size_t>(p) * n + d]);
        }
    }
    ScalarField rho_field(g);
    rho_field.data() = st.rho.data();
    ScalarField lap_rho = laplacian(rho_field);
    std::vector<ScalarField> lap_w;
    {
        ScalarField comp_view(g);
        for (int p = 0; p < npairs; ++p) {
            comp_view.data() = st.omega.comp(p);
            lap_w.push_back(laplacian(comp_view));
        }
    }

    Acc comp_all, comp_clean, lr_all, lr_clean, lw_all, lw_clean, divs, alg, divw, curlm, wrad, wphi;

    const std::int64_t total = g.size();
    for (std::int64_t id = 0; id < total; ++id) {
        bool in_all = inner[id] != 0;
        if (!in_all) continue;
        bool in_clean = clean[id] != 0;
        auto c = g.unflat(id);
        double y[3] = {0, 0, 0};
        for (int d = 0; d < n; ++d) y[d] = g.coord(d, c[d]) - st.shift[d];

        for (int k = 0; k < n; ++k) {
            double div = 0;
            for (int j = 0; j < n; ++j) {
                if (j == k) continue;
                if (k < j)
                    div += dw[static_cast<size_t>(omega_pair_index(n, k, j)) * n + j].at(id);
                else
                    div -= dw[static_cast<size_t>(omega_pair_index(n, j, k)) * n + j].at(id);
            }
            double res = st.xi.comp(k)[id] - div;
            comp_all.add(res);
            if (in_clean) comp_clean.add(res);
        }

        lr_all.add(lap_rho.at(id));
        if (in_clean) lr_clean.add(lap_rho.at(id));
        for (int p = 0; p < npairs; ++p) {
            lw_all.add(lap_w[p].at(id));
            if (in_clean) lw_clean.add(lap_w[p].at(id));
        }

        if (in_clean) {
            double tr = 0;
            for (int r = 0; r < n; ++r) tr += st.jac_sigma.comp(r * n + r)[id];
            divs.add(tr);
        }

        if (n == 3 && in_clean) {
            double w01 = st.omega.comp(0)[id];
            double w02 = st.omega.comp(1)[id];
            double w12 = st.omega.comp(2)[id];
            if (std::abs(y[2]) > g.spacing(2))
                alg.add(w01 - (y[1] * w02 - y[0] * w12) / y[2]);

            // omega vector (w23, w31, w12) in the plane-orthogonal ordering.
            double wv[3] = {w12, -w02, w01};
            double div3 = dw[2 * 3 + 0].at(id) - dw[1 * 3 + 1].at(id) + dw[0 * 3 + 2].at(id);
            divw.add(div3);
            double curl0 = dw[0 * 3 + 1].at(id) + dw[1 * 3 + 2].at(id);
            double curl1 = dw[2 * 3 + 2].at(id) - dw[0 * 3 + 0].at(id);
            double curl2 = -dw[1 * 3 + 0].at(id) - dw[2 * 3 + 1].at(id);
            double cm = std::max({std::abs(curl0 - st.xi.comp(0)[id]),
                                  std::abs(curl1 - st.xi.comp(1)[id]),
                                  std::abs(curl2 - st.xi.comp(2)[id])});
            curlm.add(cm);
            double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
            if (r > 1e-12)
                wrad.add((wv[0] * y[0] + wv[1] * y[1] + wv[2] * y[2]) / r);
        }
    }

    out.components_all = comp_all.stats();
    out.components_clean = comp_clean.stats();
    out.lap_rho_all = lr_all.stats();
    out.lap_rho_clean = lr_clean.stats();
    out.lap_omega_all = lw_all.stats();
    out.lap_omega_clean = lw_clean.stats();
    out.div_sigma_clean = divs.stats();
    out.algebraic_clean = alg.stats();
    out.div_omega_clean = divw.stats();
    out.curl_match_clean = curlm.stats();
    out.omega_radial = wrad.stats();

    // Azimuthal rotation just above the plane against the one-sided slope law.
    if (n == 3 && st.sol.measure.points.empty()) {
        const Grid& base = st.sol.measure.base;
        double h = max_spacing(g);
        double fmax = 0;
        for (std::int64_t id = 0; id < base.size(); ++id)
            fmax = std::max(fmax, st.sol.measure.density.at(id));
        for (int i = 2; i < base.dims(0) - 2; ++i)
            for (int j = 2; j < base.dims(1) - 2; ++j) {
                std::int64_t bid = base.flat(i, j, 0);
                double f = st.sol.measure.density.at(bid);
                if (f <= 1e-9 * std::max(fmax, 1.0)) continue;
                bool interiorf = true;
                for (int di = -1; di <= 1 && interiorf; ++di)
                    for (int dj = -1; dj <= 1 && interiorf; ++dj)
                        if (st.sol.measure.density.at(base.flat(i + di, j + dj, 0)) <=
                            1e-9 * std::max(fmax, 1.0))
                            interiorf = false;
                if (!interiorf) continue;
                Vec s = base.node(i, j, 0);
                double y0 = s[0] - st.shift[0], y1 = s[1] - st.shift[1];
                double r = std::sqrt(y0 * y0 + y1 * y1);
                if (r < 4 * h) continue;
                Vec x = ambient_from_base(Vec(y0 + st.shift[0], y1 + st.shift[1], 0), 2 * h, 3);
                if (!g.contains(x)) continue;
                auto stcl = interp_stencil(g, x);
                double wv0 = 0, wv1 = 0, wv2 = 0;
                for (int cc = 0; cc < stcl.count; ++cc) {
                    wv0 += stcl.wts[cc] * st.omega.comp(2)[stcl.ids[cc]];
                    wv1 -= stcl.wts[cc] * st.omega.comp(1)[stcl.ids[cc]];
                    wv2 += stcl.wts[cc] * st.omega.comp(0)[stcl.ids[cc]];
                }
                double ephi0 = -y1 / r, ephi1 = y0 / r;
                double wphi_val = wv0 * ephi0 + wv1 * ephi1;
                (void)wv2;
                wphi.add((wphi_val - 0.5 * r * f) / std::max(1.0, 0.5 * r * f));
            }
    }
    out.omega_phi_density = wphi.stats();
    return out;
}

TangencyReport boundary_tangency_check(const SchwarzState& st, const DomainGraph& graph) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    const int va = g.vertical_axis();
    const Grid& base = graph.base;
    double h = max_spacing(g);

    Mask core = erode(base, graph.in_d, 3);
    std::int64_t candidates = 0;
    for (auto v : core) candidates += v ? 1 : 0;
    std::int64_t stride = std::max<std::int64_t>(1, candidates / 2000);

    double r1 = 1.0;
    {
        auto rr = boundary_radius_range(st, graph);
        r1 = std::max(rr.second, 1.0);
    }
    // Below this the tangential field drowns in discretization noise (it
    // vanishes where the trace arc meets the boundary).
    double xi_tol = std::max(1e-3 * r1, 4 * h);

    TangencyReport rep;
    std::int64_t seen = 0;
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            std::int64_t bid = base.flat(i, j, 0);
            if (!core[bid]) continue;
            if (seen++ % stride) continue;
            double gv = graph.g.at(bid);
            if (gv < 3.5 * h) continue;
            Vec s = base.node(i, j, 0);
            Eigen::VectorXd nhat(n);
            double s2 = 1.0;
            for (int d = 0; d + 1 < n; ++d) {
                double gd = graph.dg.comp(d)[bid];
                nhat[d] = -gd;
                s2 += gd * gd;
            }
            nhat[n - 1] = 1.0;
            nhat /= std::sqrt(s2);

            Vec xb = ambient_from_base(s, gv, n);
            Vec xin = xb;
            for (int d = 0; d < n; ++d) xin[d] -= 2 * h * nhat[d];
            if (!g.contains(xin, 0.5 * h) || xin[va] < 0.9 * h) continue;

            auto stcl = interp_stencil(g, xin);
            Eigen::VectorXd xi(n);
            {
                double buf[3];
                interp_comps(st.xi, stcl, buf, n);
                for (int d = 0; d < n; ++d) xi[d] = buf[d];
            }
            double xin_norm = xi.norm();
            if (xin_norm > xi_tol)
                rep.max_normal_frac = std::max(rep.max_normal_frac, std::abs(xi.dot(nhat)) / xin_norm);

            Eigen::VectorXd y(n);
            for (int d = 0; d < n; ++d) y[d] = xin[d] - st.shift[d];
            Eigen::VectorXd yt = y - y.dot(nhat) * nhat;
            rep.max_projection_err =
                std::max(rep.max_projection_err, (xi - yt).norm() / std::max(1.0, y.norm()));
            ++rep.samples;
        }
    return rep;
}

std::pair<double, double> boundary_radius_range(const SchwarzState& st, const DomainGraph& graph) {
    const Grid& base = graph.base;
    const int n = st.sol.grid.dim();
    double r0 = std::numeric_limits<double>::infinity(), r1 = 0;
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            std::int64_t bid = base.flat(i, j, 0);
            if (!graph.in_d[bid]) continue;
            Vec s = base.node(i, j, 0);
            double r2 = graph.g.at(bid) * graph.g.at(bid);
            for (int d = 0; d + 1 < n; ++d) r2 += (s[d] - st.shift[d]) * (s[d] - st.shift[d]);
            double r = std::sqrt(r2);
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
        }
    if (!std::isfinite(r0)) { r0 = 0; r1 = 0; }
    return {r0, r1};
}

namespace {

// Omega vector (for n=3) or the single rotation scalar (n=2) at a point.
void omega_vec_at(const SchwarzState& st, const InterpStencil& stcl, double* wv) {
    if (st.sol.grid.dim() == 2) {
        double acc = 0;
        for (int c = 0; c < stcl.count; ++c) acc += stcl.wts[c] * st.omega.comp(0)[stcl.ids[c]];
        wv[0] = acc;
        return;
    }
    wv[0] = wv[1] = wv[2] = 0;
    for (int c = 0; c < stcl.count; ++c) {
        wv[0] += stcl.wts[c] * st.omega.comp(2)[stcl.ids[c]];
        wv[1] -= stcl.wts[c] * st.omega.comp(1)[stcl.ids[c]];
        wv[2] += stcl.wts[c] * st.omega.comp(0)[stcl.ids[c]];
    }
}

struct ShellZero {
    Vec dir = Vec::Zero();  // unit direction from the shifted origin
    double residual = 0;    // |tangential gradient| there
};

// Tangential gradient of u on the sphere of radius r, via the rotation field.
Eigen::Vector3d tangential_gradient(const SchwarzState& st, const Vec& e, double r) {
    Vec x = st.shift + r * e;
    auto stcl = interp_stencil(st.sol.grid, x);
    double wv[3] = {0, 0, 0};
    omega_vec_at(st, stcl, wv);
    if (st.sol.grid.dim() == 2) {
        // grad_T u = -(e_r x omega)/r with omega = w01 e_z.
        Eigen::Vector3d w(0, 0, wv[0]);
        Eigen::Vector3d er(e[0], e[1], 0);
        return -er.cross(w) / r;
    }
    Eigen::Vector3d w(wv[0], wv[1], wv[2]);
    Eigen::Vector3d er(e[0], e[1], e[2]);
    return -er.cross(w) / r;
}

}  // namespace

GammaTrace trace_gamma(const SchwarzState& st, const DomainGraph& graph, const GammaOptions& opt) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    const int va = g.vertical_axis();
    const double h = max_spacing(g);
    GammaTrace out;

    auto [r0, r1] = boundary_radius_range(st, graph);
    (void)r1;

    // Is the shifted origin inside the base domain D?
    const Grid& base = graph.base;
    bool origin_in_d = false;
    double dist_to_d = std::numeric_limits<double>::infinity();
    Vec nearest_d = Vec::Zero();
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            std::int64_t bid = base.flat(i, j, 0);
            if (!graph.in_d[bid]) continue;
            Vec s = base.node(i, j, 0);
            double d2 = 0;
            for (int d = 0; d + 1 < n; ++d) d2 += (s[d] - st.shift[d]) * (s[d] - st.shift[d]);
            double dist = std::sqrt(d2);
            if (dist < dist_to_d) { dist_to_d = dist; nearest_d = s; }
            if (dist < 0.75 * h) origin_in_d = true;
        }

    if (!origin_in_d) {
        out.empty = true;
        if (!std::isfinite(dist_to_d)) {
            out.reason = "base domain is empty";
            return out;
        }
        // Definite-sign certificate for the rotation component paired with the
        // direction from the origin toward the base domain.
        Eigen::VectorXd eprime = Eigen::VectorXd::Zero(n - 1);
        for (int d = 0; d + 1 < n; ++d) eprime[d] = nearest_d[d] - st.shift[d];
        double en = eprime.norm();
        if (en > 1e-12) eprime /= en;
        double qmin = std::numeric_limits<double>::infinity(), qmax = -qmin;
        const std::int64_t total = g.size();
        for (std::int64_t id = 0; id < total; ++id) {
            if (!st.interior[id]) continue;
            double q = 0;
            for (int d = 0; d + 1 < n; ++d)
                q += eprime[d] * st.omega.comp(omega_pair_index(n, d, va))[id];
            qmin = std::min(qmin, q);
            qmax = std::max(qmax, q);
        }
        if (!std::isfinite(qmin)) {
            out.reason = "origin outside the base domain; no interior nodes to certify";
            return out;
        }
        if (qmin > 0) {
            out.certificate = qmin;
            out.reason = "origin outside the base hull; rotation component strictly positive";
        } else if (qmax < 0) {
            out.certificate = qmax;
            out.reason = "origin outside the base hull; rotation component strictly negative";
        } else {
            out.certificate = 0;
            out.reason = dist_to_d > 1.5 * h
                             ? "origin outside the base domain; rotation component changes sign"
                             : "origin off the base domain by less than two cells";
        }
        return out;
    }

    if (r0 <= (opt.rmin_cells + 2) * h) {
        out.empty = true;
        out.reason = "domain too small for the shell ladder";
        return out;
    }

    // Radii ladder: geometric up to the boundary, then a fine tail.
    std::vector<double> radii;
    for (double r = opt.rmin_cells * h; r < r0 - 4.5 * h; r *= opt.ladder) radii.push_back(r);
    for (double r : {r0 - 4 * h, r0 - 3 * h, r0 - 2 * h, r0 - h})
        if (radii.empty() || r > radii.back() + 0.25 * h) radii.push_back(r);

    double trace_tol = opt.trace_tol;
    int degenerate_shells = 0;
    int used_shells = 0;

    for (double r : radii) {
        double deg_eps = r * std::max(100 * h * h, 1e-9);
        std::vector<ShellZero> zeros;
        double gscale = 0;

        if (n == 2) {
            double tlo = std::asin(std::clamp(2 * h / r, 0.0, 0.95));
            const int K = std::max(3 * opt.starts, 96);
            std::vector<double> th(K), wval(K);
            std::vector<char> valid(K, 0);
            for (int k = 0; k < K; ++k) {
                th[k] = tlo + (M_PI - 2 * tlo) * k / (K - 1);
                Vec x = st.shift + r * Vec(std::cos(th[k]), std::sin(th[k]), 0);
                if (!g.contains(x)) continue;
                auto stcl = interp_stencil(g, x);
                double w;
                omega_vec_at(st, stcl, &w);
                wval[k] = w;
                valid[k] = 1;
                gscale = std::max(gscale, std::abs(w) / r);
            }
            if (gscale < deg_eps / r) { ++degenerate_shells; ++used_shells; continue; }
            for (int k = 0; k + 1 < K; ++k) {
                if (!valid[k] || !valid[k + 1]) continue;
                if (wval[k] == 0.0 || wval[k] * wval[k + 1] >= 0) continue;
                double a = th[k], b = th[k + 1], wa = wval[k];
                for (int it = 0; it < 60; ++it) {
                    double m = 0.5 * (a + b);
                    Vec x = st.shift + r * Vec(std::cos(m), std::sin(m), 0);
                    auto stcl = interp_stencil(g, x);
                    double wm;
                    omega_vec_at(st, stcl, &wm);
                    if (wa * wm <= 0) b = m; else { a = m; wa = wm; }
                }
                double m = 0.5 * (a + b);
                ShellZero z;
                z.dir = Vec(std::cos(m), std::sin(m), 0);
                {
                    Vec x = st.shift + r * z.dir;
                    auto stcl = interp_stencil(g, x);
                    double wm;
                    omega_vec_at(st, stcl, &wm);
                    z.residual = std::abs(wm) / r;
                }
                zeros.push_back(z);
            }
        } else {
            double psimax = std::acos(std::clamp(2 * h / r, 0.0, 0.999));
            const int NP = 24, NF = 48;
            struct Node { double G; Vec e; };
            std::vector<Node> grid_nodes(static_cast<size_t>(NP) * NF);
            for (int a = 0; a < NP; ++a)
                for (int b = 0; b < NF; ++b) {
                    double psi = psimax * (a + 0.5) / NP;
                    double phi = 2 * M_PI * b / NF;
                    Vec e(std::sin(psi) * std::cos(phi), std::sin(psi) * std::sin(phi),
                          std::cos(psi));
                    double G = std::numeric_limits<double>::infinity();
                    Vec x = st.shift + r * e;
                    if (g.contains(x)) {
                        Eigen::Vector3d tg = tangential_gradient(st, e, r);
                        G = tg.norm();
                        gscale = std::max(gscale, G);
                    }
                    grid_nodes[static_cast<size_t>(a) * NF + b] = {G, e};
                }
            // Include the pole as a start; the grid above excludes psi = 0.
            {
                Vec e(0, 0, 1);
                Vec x = st.shift + r * e;
                if (g.contains(x)) {
                    double G = tangential_gradient(st, e, r).norm();
                    gscale = std::max(gscale, G);
                    grid_nodes.push_back({G, e});
                }
            }
            if (gscale < deg_eps / r) { ++degenerate_shells; ++used_shells; continue; }

            std::vector<size_t> order(grid_nodes.size());
            for (size_t q = 0; q < order.size(); ++q) order[q] = q;
            std::sort(order.begin(), order.end(), [&](size_t aa, size_t bb) {
                return grid_nodes[aa].G < grid_nodes[bb].G;
            });
            int starts = std::min<int>(opt.starts, static_cast<int>(order.size()));
            double accept = std::max({trace_tol, 1e-4 * gscale, 1e-12});

            for (int sidx = 0; sidx < starts; ++sidx) {
                Vec e = grid_nodes[order[sidx]].e;
                if (!std::isfinite(grid_nodes[order[sidx]].G)) continue;
                double Fn = grid_nodes[order[sidx]].G;
                for (int it = 0; it < 40 && Fn > 0.25 * accept; ++it) {
                    // Local tangent frame at e.
                    Eigen::Vector3d ez(e[0], e[1], e[2]);
                    Eigen::Vector3d t1 = std::abs(ez[2]) < 0.9
                                             ? ez.cross(Eigen::Vector3d(0, 0, 1)).normalized()
                                             : ez.cross(Eigen::Vector3d(1, 0, 0)).normalized();
                    Eigen::Vector3d t2 = ez.cross(t1);
                    auto eval = [&](double a, double b, Eigen::Vector2d& F) -> bool {
                        Eigen::Vector3d ee = (ez + a * t1 + b * t2).normalized();
                        Vec ev(ee[0], ee[1], ee[2]);
                        if (ev[va] * r < 1.5 * h) return false;
                        Vec x = st.shift + r * ev;
                        if (!g.contains(x)) return false;
                        Eigen::Vector3d tg = tangential_gradient(st, ev, r);
                        F[0] = tg.dot(t1);
                        F[1] = tg.dot(t2);
                        return true;
                    };
                    Eigen::Vector2d F0;
                    if (!eval(0, 0, F0)) break;
                    double del = 1e-4;
                    Eigen::Vector2d Fa, Fb;
                    if (!eval(del, 0, Fa) || !eval(0, del, Fb)) break;
                    Eigen::Matrix2d J;
                    J.col(0) = (Fa - F0) / del;
                    J.col(1) = (Fb - F0) / del;
                    if (std::abs(J.determinant()) < 1e-14) break;
                    Eigen::Vector2d step = J.partialPivLu().solve(-F0);
                    double cap = 0.2;
                    if (step.norm() > cap) step *= cap / step.norm();
                    double lam = 1.0;
                    bool improved = false;
                    for (int bt = 0; bt < 6; ++bt) {
                        Eigen::Vector2d Ft;
                        if (eval(lam * step[0], lam * step[1], Ft) && Ft.norm() < Fn) {
                            Eigen::Vector3d ee =
                                (ez + lam * step[0] * t1 + lam * step[1] * t2).normalized();
                            e = Vec(ee[0], ee[1], ee[2]);
                            Fn = Ft.norm();
                            improved = true;
                            break;
                        }
                        lam *= 0.5;
                    }
                    if (!improved) break;
                }
                if (Fn <= accept) {
                    ShellZero z;
                    z.dir = e;
                    z.residual = Fn;
                    zeros.push_back(z);
                }
            }
        }

        // Cluster zeros by chord distance.
        std::vector<ShellZero> clusters;
        for (const auto& z : zeros) {
            bool merged = false;
            for (auto& c : clusters) {
                if (r * (c.dir - z.dir).norm() < opt.cluster_cells * h) {
                    if (z.residual < c.residual) c = z;
                    merged = true;
                    break;
                }
            }
            if (!merged) clusters.push_back(z);
        }

        ++used_shells;
        if (clusters.empty()) {
            if (out.reason.empty())
                out.reason = "no tangential-gradient zero found on a shell";
            continue;
        }
        if (clusters.size() > 1) out.branched = true;

        const ShellZero* pick = &clusters[0];
        if (!out.points.empty()) {
            Vec prev_dir = (out.points.back() - st.shift).normalized();
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : clusters) {
                double d = (c.dir - prev_dir).norm();
                if (d < best) { best = d; pick = &c; }
            }
        }
        out.points.push_back(st.shift + r * pick->dir);
        out.radii.push_back(r);
        out.residuals.push_back(pick->residual);
    }

    if (used_shells > 0 && degenerate_shells == used_shells) {
        out.degenerate_radial = true;
        out.empty = true;
        out.reason = "rotation field vanishes on every shell; gradient is radial";
        return out;
    }

    if (out.points.empty()) {
        out.empty = true;
        if (out.reason.empty()) out.reason = "no zeros located";
        return out;
    }

    out.start_direction = (out.points.front() - st.shift).normalized();
    {
        // Expected start direction from the one-sided gradient at the origin.
        Vec ex = Vec::Zero();
        bool ok = true;
        try {
            for (int d = 0; d + 1 < n; ++d) {
                Vec xp = st.shift, xm = st.shift;
                xp[d] += h;
                xm[d] -= h;
                double up = interpolate(st.sol.u, xp);
                double um = interpolate(st.sol.u, xm);
                ex[d] = -(up - um) / (2 * h);
            }
            Vec sb = Vec::Zero();
            for (int d = 0; d + 1 < n; ++d) sb[d] = st.shift[d];
            double f0 = interpolate(graph.f, sb);
            ex[va] = 0.5 * f0;
        } catch (const std::exception&) {
            ok = false;
        }
        if (ok && ex.norm() > 1e-10) out.start_alignment = out.start_direction.dot(ex.normalized());
    }

    out.endpoint = out.points.back();
    out.reached_boundary = out.radii.back() >= r0 - 2.5 * h;

    if (n == 2) {
        for (size_t q = 0; q + 1 < out.points.size(); ++q) {
            Vec d = out.points[q + 1] - out.points[q];
            double dn = d.norm();
            if (dn < 1e-12) continue;
            Vec mid = 0.5 * (out.points[q] + out.points[q + 1]);
            if (!g.contains(mid)) continue;
            auto stcl = interp_stencil(g, mid);
            double buf[3];
            interp_comps(st.xi, stcl, buf, n);
            Eigen::Vector2d xi(buf[0], buf[1]);
            if (xi.norm() < 1e-6) continue;
            double ca = std::clamp((d[0] * xi[0] + d[1] * xi[1]) / (dn * xi.norm()), -1.0, 1.0);
            out.max_tangent_angle = std::max(out.max_tangent_angle, std::acos(ca));
        }
    }
    return out;
}

HessianReport hessian_checks(const SchwarzState& st, const DomainGraph& graph) {
    const Grid& g = st.sol.grid;
    const int n = g.dim();
    const double h = max_spacing(g);
    HessianReport rep;

    TensorField H = hessian_field(st.sol.u);
    VectorField grad = gradient(st.sol.u);
    Mask clean = exclude_measure_edges(st, st.interior, 0.5);

    const std::int64_t total = g.size();
    Eigen::MatrixXd Hm(n, n);
    Eigen::VectorXd y(n), gr(n), xi(n);
    for (std::int64_t id = 0; id < total; ++id) {
        if (!st.interior[id]) continue;
        double tr = 0;
        for (int d = 0; d < n; ++d) tr += H.comp(d, d)[id];
        rep.tr_max_err = std::max(rep.tr_max_err, std::abs(tr - 1.0));
        if (!clean[id]) continue;

        auto c = g.unflat(id);
        for (int a = 0; a < n; ++a) {
            y[a] = g.coord(a, c[a]) - st.shift[a];
            gr[a] = grad.comp(a)[id];
            xi[a] = st.xi.comp(a)[id];
            for (int b = 0; b < n; ++b) Hm(a, b) = H.comp(std::min(a, b), std::max(a, b))[id];
        }
        double res = (Hm * y + (n - 1) * gr + xi - y).norm();
        rep.interior_identity_err = std::max(rep.interior_identity_err, res);
    }

    const Grid& base = graph.base;
    Mask core = erode(base, graph.in_d, 3);
    rep.offsets = {2 * h, 4 * h, 8 * h, 16 * h};
    rep.proj_err.assign(rep.offsets.size(), 0.0);
    rep.hn_err.assign(rep.offsets.size(), 0.0);
    rep.hx_err.assign(rep.offsets.size(), 0.0);

    std::int64_t candidates = 0;
    for (std::int64_t bid = 0; bid < base.size(); ++bid)
        if (core[bid] && graph.g.at(bid) >= rep.offsets.back() + 3 * h) ++candidates;
    std::int64_t stride = std::max<std::int64_t>(1, candidates / 1500);

    std::int64_t seen = 0;
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            std::int64_t bid = base.flat(i, j, 0);
            if (!core[bid]) continue;
            double gv = graph.g.at(bid);
            if (gv < rep.offsets.back() + 3 * h) continue;
            if (seen++ % stride) continue;

            Vec s = base.node(i, j, 0);
            Eigen::VectorXd nhat(n);
            double s2 = 1.0;
            for (int d = 0; d + 1 < n; ++d) {
                double gd = graph.dg.comp(d)[bid];
                nhat[d] = -gd;
                s2 += gd * gd;
            }
            nhat[n - 1] = 1.0;
            nhat /= std::sqrt(s2);
            Vec xb = ambient_from_base(s, gv, n);

            for (size_t q = 0; q < rep.offsets.size(); ++q) {
                Vec x = xb;
                for (int d = 0; d < n; ++d) x[d] -= rep.offsets[q] * nhat[d];
                if (!g.contains(x, 0.5 * h) || x[g.vertical_axis()] < 1.5 * h) continue;
                auto stcl = interp_stencil(g, x);
                Eigen::MatrixXd Hx = interpolate(H, stcl);
                double pe = (Hx - nhat * nhat.transpose()).cwiseAbs().maxCoeff();
                double he = (Hx * nhat - nhat).norm();
                Eigen::VectorXd yx(n), xix(n);
                double buf[3];
                interp_comps(st.xi, stcl, buf, n);
                for (int d = 0; d < n; ++d) {
                    yx[d] = x[d] - st.shift[d];
                    xix[d] = buf[d];
                }
                double xe = (Hx * yx - (yx - xix)).norm();
                rep.proj_err[q] = std::max(rep.proj_err[q], pe);
                rep.hn_err[q] = std::max(rep.hn_err[q], he);
                rep.hx_err[q] = std::max(rep.hx_err[q], xe);
            }
        }

    // Least-squares slope of log2 proj_err against log2 offset.
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (size_t q = 0; q < rep.offsets.size(); ++q) {
            if (rep.proj_err[q] <= 0) continue;
            double lx = std::log2(rep.offsets[q]);
            double ly = std::log2(rep.proj_err[q]);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
            ++m;
        }
        if (m >= 2 && sxx * m - sx * sx > 1e-12)
            rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    return rep;
}

Eigen::MatrixXd hessian_integrals(const PotentialSolution& sol, const DomainGraph& graph) {
    const Grid& g = sol.grid;
    const int n = g.dim();
    const int va = g.vertical_axis();
    const double h = g.spacing(va);
    const int layer = g.zero_layer(va);

    TensorField H = hessian_field(sol.u);
    double cellarea = 1.0;
    for (int d = 0; d + 1 < n; ++d) cellarea *= g.spacing(d);

    const Grid& base = graph.base;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);

    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            std::int64_t bid = base.flat(i, j, 0);
            if (!graph.in_d[bid]) continue;
            double gv = graph.g.at(bid);
            if (gv < 3 * h) continue;
            int K = static_cast<int>(std::floor((gv - 2 * h) / h + 1e-9));
            K = std::min(K, g.dims(va) - 2 - layer);
            if (K < 1) continue;

            // Ambient column indices: base (i, j) maps onto the first axes.
            int ai = i, aj = (n == 3) ? j : layer;
            auto col_id = [&](int level) {
                return (n == 2) ? g.flat(ai, layer + level, 0) : g.flat(ai, aj, layer + level);
            };

            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b) {
                    auto phi = [&](int level) { return H.comp(a, b)[col_id(level)]; };
                    double I;
                    if (K == 1) {
                        I = gv * phi(1);
                    } else {
                        I = h * (3 * phi(1) - phi(2)) / 2;
                        for (int k = 1; k < K; ++k) I += 0.5 * h * (phi(k) + phi(k + 1));
                        I += (gv - K * h) * phi(K);
                    }
                    M(a, b) += I * cellarea;
                }
        }

    for (int a = 0; a < n; ++a)
        for (int b = 0; b < a; ++b) M(a, b) = M(b, a);
    return M;
}

TubeMass tube_mass_check(const PotentialSolution& sol, const DomainGraph& graph,
                         const std::function<bool(const Eigen::VectorXd&)>& base_region) {
    const Grid& g = sol.grid;
    const int n = g.dim();
    const int va = g.vertical_axis();
    const double h = g.spacing(va);
    const int layer = g.zero_layer(va);
    const Grid& base = graph.base;

    TubeMass out;
    if (!base_region) {
        out.volume = domain_volume_upper(sol, graph);
        out.half_mass = 0.5 * sol.measure.total_mass();
        out.defect = out.half_mass > 0 ? std::abs(out.volume - out.half_mass) / out.half_mass
                                       : std::abs(out.volume);
        return out;
    }

    VectorField grad = gradient(sol.u);

    // Streamline membership per upper node: follow the ascending gradient down
    // to the plane and test the landing point.
    const std::int64_t total = g.size();
    Mask member(static_cast<size_t>(total), 0);
    std::atomic<bool> left_grid{false};

    parallel_for(total, [&](std::int64_t bg, std::int64_t en) {
        Eigen::VectorXd land(n - 1);
        for (std::int64_t id = bg; id < en; ++id) {
            auto c = g.unflat(id);
            int level = c[va] - layer;
            if (level < 1) continue;
            if (sol.u.at(id) <= sol.eps_height) continue;

            Vec x = g.node(c[0], c[1], c[2]);
            double step = 0.5 * h;
            bool ok = true;
            for (int it = 0; it < 20000; ++it) {
                if (x[va] <= 0.55 * h) break;
                InterpStencil stc;
                try {
                    stc = interp_stencil(g, x);
                } catch (const std::out_of_range&) {
                    ok = false;
                    break;
                }
                double d0[3];
                interp_comps(grad, stc, d0, n);
                double nrm = 0;
                for (int d = 0; d < n; ++d) nrm += d0[d] * d0[d];
                nrm = std::sqrt(nrm);
                if (nrm < 1e-12) break;
                Vec xm = x;
                for (int d = 0; d < n; ++d) xm[d] += 0.5 * step * d0[d] / nrm;
                double d1[3];
                try {
                    auto stm = interp_stencil(g, xm);
                    interp_comps(grad, stm, d1, n);
                } catch (const std::out_of_range&) {
                    for (int d = 0; d < n; ++d) d1[d] = d0[d];
                }
                double nrm1 = 0;
                for (int d = 0; d < n; ++d) nrm1 += d1[d] * d1[d];
                nrm1 = std::sqrt(nrm1);
                if (nrm1 < 1e-12) break;
                for (int d = 0; d < n; ++d) x[d] += step * d1[d] / nrm1;
            }
            if (!ok) { left_grid = true; continue; }
            for (int d = 0; d + 1 < n; ++d) land[d] = x[d];
            if (base_region(land)) member[id] = 1;
        }
    });
    if (left_grid) throw std::runtime_error("tube mass: a streamline left the grid box");

    // Column-weighted volume of the member set.
    double vol = 0;
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            std::int64_t bid = base.flat(i, j, 0);
            if (!graph.in_d[bid]) continue;
            double gv = graph.g.at(bid);
            int K = static_cast<int>(std::floor(gv / h));
            K = std::min(K, g.dims(va) - 1 - layer);
            if (K < 1) continue;
            int ai = i, aj = (n == 3) ? j : layer;
            for (int k = 1; k <= K; ++k) {
                std::int64_t id = (n == 2) ? g.flat(ai, layer + k, 0) : g.flat(ai, aj, layer + k);
                if (!member[id]) continue;
                double w;
                if (K == 1)
                    w = gv;
                else if (k == 1)
                    w = 1.5 * h;
                else if (k == K)
                    w = std::max(gv - (K - 0.5) * h, 0.0);
                else
                    w = h;
                vol += w;
            }
        }
    double cellarea = 1.0;
    for (int d = 0; d + 1 < n; ++d) cellarea *= g.spacing(d);
    out.volume = vol * cellarea;

    // Measure carried by the base region.
    const Grid& mb = sol.measure.base;
    double bcell = 1.0;
    for (int d = 0; d < mb.dim(); ++d) bcell *= mb.spacing(d);
    double mass = 0;
    Eigen::VectorXd sp(n - 1);
    for (int i = 0; i < mb.dims(0); ++i)
        for (int j = 0; j < mb.dims(1); ++j) {
            std::int64_t bid = mb.flat(i, j, 0);
            Vec s = mb.node(i, j, 0);
            for (int d = 0; d + 1 < n; ++d) sp[d] = s[d];
            if (base_region(sp)) mass += sol.measure.density.at(bid) * bcell;
        }
    for (const auto& p : sol.measure.points) {
        for (int d = 0; d + 1 < n; ++d) sp[d] = p.x[d];
        if (base_region(sp)) mass += p.mass;
    }
    out.half_mass = 0.5 * mass;
    out.defect = out.half_mass > 0 ? std::abs(out.volume - out.half_mass) / out.half_mass
                                   : std::abs(out.volume);
    return out;
}

}  // namespace qdlab
