#include "qdlab/balayage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <mutex>
#include <stdexcept>

#include "qdlab/parallel.hpp"

namespace qdlab {
namespace {

// Maps a base-grid node to the ambient node with the same horizontal
// coordinates on the zero layer.
std::int64_t base_to_layer(const Grid& amb, const Grid& base, std::int64_t base_id) {
    std::array<int, 3> bi = base.unflat(base_id);
    std::array<int, 3> ai{0, 0, 0};
    for (int d = 0; d + 1 < amb.dim(); ++d) {
        double x = base.coord(d, bi[static_cast<size_t>(d)]);
        double t = (x - amb.origin(d)) / amb.spacing(d);
        int i = static_cast<int>(std::lround(t));
        if (std::abs(t - i) > 1e-6 || i < 0 || i >= amb.dims(d))
            throw std::runtime_error("measure node off the ambient lattice");
        ai[static_cast<size_t>(d)] = i;
    }
    ai[static_cast<size_t>(amb.vertical_axis())] = amb.zero_layer(amb.vertical_axis());
    return amb.flat(ai[0], ai[1], ai[2]);
}

bool is_face(const Grid& g, const std::array<int, 3>& c) {
    for (int d = 0; d < g.dim(); ++d) {
        int i = c[static_cast<size_t>(d)];
        if (i == 0 || i == g.dims(d) - 1) return true;
    }
    return false;
}

struct Stencil {
    std::array<std::int64_t, 3> stride{};
    std::array<double, 3> wh{};  // 1/h^2 per axis
    double diag = 0;
    int dim = 0;
};

Stencil make_stencil(const Grid& g) {
    Stencil s;
    s.dim = g.dim();
    for (int d = 0; d < g.dim(); ++d) {
        s.stride[static_cast<size_t>(d)] = stride_of(g, d);
        double h = g.spacing(d);
        s.wh[static_cast<size_t>(d)] = 1.0 / (h * h);
        s.diag += 2.0 / (h * h);
    }
    return s;
}

// One red-black projected SOR pass over the given parity.  Face nodes stay
// pinned at zero.  Every node of one color depends only on the other color,
// so the result is independent of traversal order and thread count.
void sweep_color(const Grid& g, const Stencil& st, const ScalarField& rhs, ScalarField& u,
                 double relax, int color) {
    const int d0 = g.dims(0), d1 = g.dims(1), d2 = g.dims(2);
    auto* ud = u.data().data();
    const auto* rd = rhs.data().data();
    parallel_for(static_cast<std::int64_t>(d0), [&](std::int64_t ib, std::int64_t ie) {
        for (int i = static_cast<int>(ib); i < static_cast<int>(ie); ++i) {
            bool fi = (g.dim() > 0) && (i == 0 || i == d0 - 1);
            for (int j = 0; j < d1; ++j) {
                bool fj = fi || (g.dim() > 1 && (j == 0 || j == d1 - 1));
                std::int64_t row = (static_cast<std::int64_t>(i) * d1 + j) * d2;
                int k0 = (i + j + color) % 2 == 0 ? 0 : 1;
                for (int k = k0; k < d2; k += 2) {
                    if (fj || (g.dim() > 2 && (k == 0 || k == d2 - 1))) continue;
                    std::int64_t id = row + k;
                    double s = 0;
                    for (int d = 0; d < st.dim; ++d)
                        s += (ud[id - st.stride[static_cast<size_t>(d)]] +
                              ud[id + st.stride[static_cast<size_t>(d)]]) *
                             st.wh[static_cast<size_t>(d)];
                    double c = (s - rd[id]) / st.diag;
                    double un = (1.0 - relax) * ud[id] + relax * c;
                    ud[id] = un > 0 ? un : 0;
                }
            }
        }
    });
}

double residual_max(const Grid& g, const Stencil& st, const ScalarField& rhs,
                    const ScalarField& u) {
    const int d0 = g.dims(0), d1 = g.dims(1), d2 = g.dims(2);
    const auto* ud = u.data().data();
    const auto* rd = rhs.data().data();
    double best = 0;
    std::vector<double> part;
    std::mutex m;
    parallel_for(static_cast<std::int64_t>(d0), [&](std::int64_t ib, std::int64_t ie) {
        double local = 0;
        for (int i = static_cast<int>(ib); i < static_cast<int>(ie); ++i) {
            bool fi = (i == 0 || i == d0 - 1);
            for (int j = 0; j < d1; ++j) {
                bool fj = fi || (g.dim() > 1 && (j == 0 || j == d1 - 1));
                std::int64_t row = (static_cast<std::int64_t>(i) * d1 + j) * d2;
                for (int k = 0; k < d2; ++k) {
                    if (fj || (g.dim() > 2 && (k == 0 || k == d2 - 1))) continue;
                    std::int64_t id = row + k;
                    double s = -st.diag * ud[id];
                    for (int d = 0; d < st.dim; ++d)
                        s += (ud[id - st.stride[static_cast<size_t>(d)]] +
                              ud[id + st.stride[static_cast<size_t>(d)]]) *
                             st.wh[static_cast<size_t>(d)];
                    double slack = rd[id] - s;  // rhs - L_h u, must stay >= 0
                    double r = std::min(ud[id], slack);
                    local = std::max(local, std::abs(r));
                }
            }
        }
        std::lock_guard<std::mutex> lk(m);
        part.push_back(local);
    });
    for (double p : part) best = std::max(best, p);
    return best;
}

double eps_height_of(const Grid& g, double tol) {
    double h2 = 0;
    for (int d = 0; d < g.dim(); ++d) h2 = std::max(h2, g.spacing(d) * g.spacing(d));
    return std::max(10.0 * tol, h2);
}

// True when {u > eps} reaches within `margin` cells of a box face along any
// axis; such boxes must be enlarged before the free boundary is trusted.
bool crowds_face(const Grid& g, const ScalarField& u, double eps, int margin,
                 std::array<bool, 3>& axis_hit) {
    axis_hit = {false, false, false};
    bool any = false;
    for (std::int64_t id = 0; id < g.size(); ++id) {
        if (u.at(id) <= eps) continue;
        std::array<int, 3> c = g.unflat(id);
        for (int d = 0; d < g.dim(); ++d) {
            int i = c[static_cast<size_t>(d)];
            if (i <= margin || i >= g.dims(d) - 1 - margin) {
                axis_hit[static_cast<size_t>(d)] = true;
                any = true;
            }
        }
    }
    return any;
}

Grid grown_grid(const Grid& g, const std::array<bool, 3>& axis_hit, double frac) {
    std::array<int, 3> dims{1, 1, 1};
    std::array<double, 3> h{1, 1, 1};
    std::array<double, 3> org{0, 0, 0};
    for (int d = 0; d < g.dim(); ++d) {
        size_t sd = static_cast<size_t>(d);
        int n = g.dims(d);
        int pad = 0;
        if (axis_hit[sd]) pad = std::max(2, static_cast<int>(std::ceil(frac * n / 2.0)));
        dims[sd] = n + 2 * pad;
        h[sd] = g.spacing(d);
        org[sd] = g.origin(d) - pad * g.spacing(d);
    }
    return Grid(g.dim(), dims, h, org);
}

void transfer(const Grid& from, const ScalarField& uf, const Grid& to, ScalarField& ut) {
    std::array<int, 3> off{0, 0, 0};
    for (int d = 0; d < from.dim(); ++d) {
        double t = (from.origin(d) - to.origin(d)) / from.spacing(d);
        off[static_cast<size_t>(d)] = static_cast<int>(std::lround(t));
    }
    for (std::int64_t id = 0; id < from.size(); ++id) {
        std::array<int, 3> c = from.unflat(id);
        ut.at(to.flat(c[0] + off[0], c[1] + off[1], c[2] + off[2])) = uf.at(id);
    }
}

}  // namespace

ScalarField deposit_measure(const MeasureSpec& mu, const Grid& grid) {
    ScalarField rhs(grid);
    rhs.data().setConstant(1.0);
    const double hv = grid.spacing(grid.vertical_axis());
    if (mu.density.data().size() > 0) {
        for (std::int64_t b = 0; b < mu.base.size(); ++b) {
            double f = mu.density.at(b);
            if (f <= 0) continue;
            rhs.at(base_to_layer(grid, mu.base, b)) -= f / hv;
        }
    }
    double cell = 1.0;
    for (int d = 0; d < grid.dim(); ++d) cell *= grid.spacing(d);
    for (const auto& p : mu.points) {
        std::array<int, 3> nc = grid.nearest(p.x);
        rhs.at(grid.flat(nc[0], nc[1], nc[2])) -= p.mass / cell;
    }
    return rhs;
}

PotentialSolution solve_partial_balayage(const MeasureSpec& mu, const Grid& initial,
                                         const SolverConfig& cfg) {
    mu.validate();
    if (mu.ambient_dim != initial.dim())
        throw std::invalid_argument("grid dimension does not match the measure");
    if (cfg.relax <= 0 || cfg.relax >= 2)
        throw std::invalid_argument("relaxation factor must lie in (0, 2)");
    Vec lo, hi;
    mu.support_box(lo, hi);
    for (int d = 0; d < initial.dim(); ++d) {
        double m = (cfg.margin_cells + 1) * initial.spacing(d);
        if (lo[d] < initial.origin(d) + m ||
            hi[d] > initial.coord(d, initial.dims(d) - 1) - m)
            throw std::invalid_argument("measure support too close to the box face");
    }
    initial.zero_layer(initial.vertical_axis());

    PotentialSolution out;
    out.measure = mu;
    out.tol = cfg.tol;
    Grid grid = initial;
    ScalarField u(grid);

    for (int attempt = 0;; ++attempt) {
        ScalarField rhs = deposit_measure(mu, grid);
        Stencil st = make_stencil(grid);
        double res = 0;
        long done = 0;
        bool conv = false;
        while (done < cfg.max_sweeps) {
            for (int s = 0; s < cfg.check_every; ++s) {
                sweep_color(grid, st, rhs, u, cfg.relax, 0);
                sweep_color(grid, st, rhs, u, cfg.relax, 1);
            }
            done += cfg.check_every;
            res = residual_max(grid, st, rhs, u);
            if (res <= cfg.tol) {
                conv = true;
                break;
            }
        }
        out.sweeps += done;
        out.final_residual = res;
        out.converged = conv;
        if (cfg.verbose)
            std::fprintf(stderr, "[balayage] box %d: %ld sweeps, residual %.3e\n",
                         attempt, done, res);
        double eps = eps_height_of(grid, cfg.tol);
        std::array<bool, 3> axis_hit{};
        if (!conv || !crowds_face(grid, u, eps, cfg.margin_cells, axis_hit) ||
            attempt >= cfg.max_grow) {
            if (conv && attempt >= cfg.max_grow &&
                crowds_face(grid, u, eps, cfg.margin_cells, axis_hit))
                out.converged = false;
            out.grid = grid;
            out.u = u;
            out.rhs = rhs;
            out.eps_height = eps;
            break;
        }
        Grid bigger = grown_grid(grid, axis_hit, cfg.grow_fraction);
        ScalarField ub(bigger);
        transfer(grid, u, bigger, ub);
        grid = bigger;
        u = ub;
        ++out.grows;
    }

    out.omega_mask.assign(static_cast<size_t>(out.grid.size()), 0);
    for (std::int64_t id = 0; id < out.grid.size(); ++id)
        if (out.u.at(id) > out.eps_height) out.omega_mask[static_cast<size_t>(id)] = 1;
    for (std::int64_t id = 0; id < out.grid.size(); ++id)
        if (out.rhs.at(id) < 1.0) out.omega_mask[static_cast<size_t>(id)] = 1;
    return out;
}

double complementarity_residual(const PotentialSolution& sol) {
    Stencil st = make_stencil(sol.grid);
    return residual_max(sol.grid, st, sol.rhs, sol.u);
}

namespace {

// Height of the zero crossing along one column.  Works on the square root of
// u, which decays linearly toward the free boundary, so two clean interior
// nodes extrapolate the crossing to second order.
double column_height(const Grid& g, const ScalarField& u, std::int64_t layer_id,
                     std::int64_t vstride, int layer_k, int top_k, double eps,
                     long& flags) {
    const double hv = g.spacing(g.vertical_axis());
    int last = layer_k;
    double prev = u.at(layer_id);
    long bad = 0;
    for (int k = layer_k + 1; k <= top_k; ++k) {
        double v = u.at(layer_id + vstride * (k - layer_k));
        if (v <= eps) break;
        if (v > prev + eps) ++bad;
        prev = v;
        last = k;
    }
    if (bad > 0) ++flags;
    auto val = [&](int k) { return u.at(layer_id + vstride * (k - layer_k)); };
    double y_last = (last - layer_k) * hv;
    double u_last = val(last);
    double u_next = last < top_k ? std::max(val(last + 1), 0.0) : 0.0;
    double raw = y_last + hv * (u_last - eps) / std::max(u_last - u_next, 1e-300);
    if (last > layer_k) {
        double va = std::sqrt(val(last - 1));
        double vb = std::sqrt(u_last);
        if (va > vb) {
            double off = hv * vb / (va - vb);
            if (last - 1 > layer_k) {
                // sqrt(u) is concave along the column, so the two-node line
                // undershoots the decay and overshoots the crossing; a third
                // node fits the concave branch and takes its nearest root.
                double vc = std::sqrt(val(last - 2));
                if (vc > va) {
                    double qa = 0.5 * (vc - 2.0 * va + vb);
                    double qb = 0.5 * (3.0 * vb - 4.0 * va + vc);
                    double disc = qb * qb - 4.0 * qa * vb;
                    if (qa < 0 && qb < 0 && disc >= 0) {
                        double t = 2.0 * vb / (-qb + std::sqrt(disc));
                        if (t > 0 && t * hv < off + 2.0 * hv) off = t * hv;
                    }
                }
            }
            double refined = y_last + off;
            // The crossing sits above the eps level by sqrt(2 eps) over the
            // vertical slope, which stretches toward the rim where the
            // boundary steepens, so the guard window must stay generous.
            if (refined >= raw - 0.5 * hv && refined <= raw + 8.0 * hv) return refined;
        }
    }
    return raw;
}

}  // namespace

DomainGraph extract_domain(const PotentialSolution& sol) {
    const Grid& g = sol.grid;
    const int va = g.vertical_axis();
    const int layer_k = g.zero_layer(va);
    const int top_k = g.dims(va) - 1;
    const std::int64_t vs = stride_of(g, va);
    const double hv = g.spacing(va);

    DomainGraph out;
    out.base = g.base_grid();
    out.eps_height = sol.eps_height;
    out.g = ScalarField(out.base);
    out.f = ScalarField(out.base);
    out.in_d.assign(static_cast<size_t>(out.base.size()), 0);

    for (std::int64_t b = 0; b < out.base.size(); ++b) {
        std::array<int, 3> bi = out.base.unflat(b);
        std::array<int, 3> ai{0, 0, 0};
        for (int d = 0; d + 1 < g.dim(); ++d) ai[static_cast<size_t>(d)] = bi[static_cast<size_t>(d)];
        ai[static_cast<size_t>(va)] = layer_k;
        std::int64_t lid = g.flat(ai[0], ai[1], ai[2]);
        double u0 = sol.u.at(lid);
        if (u0 <= sol.eps_height) continue;
        out.in_d[static_cast<size_t>(b)] = 1;
        out.g.at(b) = column_height(g, sol.u, lid, vs, layer_k, top_k, sol.eps_height,
                                    out.monotonicity_flags);
        double u1 = sol.u.at(lid + vs);
        double u2 = sol.u.at(lid + 2 * vs);
        double slope = (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * hv);
        out.f.at(b) = std::max(-2.0 * slope, 0.0);
    }

    out.dg = gradient(out.g);
    out.d2g = hessian_field(out.g);

    // Connectivity of D by face adjacency.
    std::int64_t seeds = 0, seen = 0, total = 0;
    std::vector<std::uint8_t> vis(out.in_d.size(), 0);
    std::deque<std::int64_t> q;
    for (std::int64_t b = 0; b < out.base.size(); ++b) {
        if (!out.in_d[static_cast<size_t>(b)]) continue;
        ++total;
        if (q.empty() && seeds == 0) {
            q.push_back(b);
            vis[static_cast<size_t>(b)] = 1;
            ++seeds;
        }
    }
    while (!q.empty()) {
        std::int64_t b = q.front();
        q.pop_front();
        ++seen;
        std::array<int, 3> c = out.base.unflat(b);
        for (int d = 0; d < out.base.dim(); ++d) {
            for (int s = -1; s <= 1; s += 2) {
                std::array<int, 3> n = c;
                n[static_cast<size_t>(d)] += s;
                if (n[static_cast<size_t>(d)] < 0 || n[static_cast<size_t>(d)] >= out.base.dims(d))
                    continue;
                std::int64_t nb = out.base.flat(n[0], n[1], n[2]);
                if (!out.in_d[static_cast<size_t>(nb)] || vis[static_cast<size_t>(nb)]) continue;
                vis[static_cast<size_t>(nb)] = 1;
                q.push_back(nb);
            }
        }
    }
    out.connected = (total > 0) && (seen == total);
    return out;
}

Mask interior_mask(const PotentialSolution& sol, int clearance) {
    const Grid& g = sol.grid;
    const int va = g.vertical_axis();
    const int layer_k = g.zero_layer(va);
    Mask m(static_cast<size_t>(g.size()), 0);
    for (std::int64_t id = 0; id < g.size(); ++id) {
        if (sol.u.at(id) <= sol.eps_height) continue;
        std::array<int, 3> c = g.unflat(id);
        if (c[static_cast<size_t>(va)] < layer_k + clearance) continue;
        bool ok = true;
        for (int d = 0; d < g.dim() && ok; ++d) {
            for (int s = 1; s <= clearance && ok; ++s) {
                for (int sg = -1; sg <= 1 && ok; sg += 2) {
                    std::array<int, 3> n = c;
                    n[static_cast<size_t>(d)] += s * sg;
                    if (n[static_cast<size_t>(d)] < 0 ||
                        n[static_cast<size_t>(d)] >= g.dims(d)) {
                        ok = false;
                        break;
                    }
                    if (sol.u.at(g.flat(n[0], n[1], n[2])) <= sol.eps_height) ok = false;
                }
            }
        }
        if (ok) m[static_cast<size_t>(id)] = 1;
    }
    return m;
}

double domain_volume_upper(const PotentialSolution& sol, const DomainGraph& graph) {
    const Grid& base = graph.base;
    const Grid& g = sol.grid;
    const int va = g.vertical_axis();
    const int layer_k = g.zero_layer(va);
    double cell = 1.0;
    for (int d = 0; d < base.dim(); ++d) cell *= base.spacing(d);

    auto layer_u = [&](const std::array<int, 3>& bi) {
        std::array<int, 3> ai{0, 0, 0};
        for (int d = 0; d + 1 < g.dim(); ++d) ai[static_cast<size_t>(d)] = bi[static_cast<size_t>(d)];
        ai[static_cast<size_t>(va)] = layer_k;
        return sol.u.at(g.flat(ai[0], ai[1], ai[2]));
    };

    double vol = 0;
    for (std::int64_t b = 0; b < base.size(); ++b) {
        if (!graph.in_d[static_cast<size_t>(b)]) continue;
        vol += graph.g.at(b) * cell;
        // Square-root tail beyond the last column toward the true rim.
        std::array<int, 3> c = base.unflat(b);
        for (int d = 0; d < base.dim(); ++d) {
            double hd = base.spacing(d);
            double strip = cell / hd;
            for (int sg = -1; sg <= 1; sg += 2) {
                std::array<int, 3> n = c;
                n[static_cast<size_t>(d)] += sg;
                bool outside = n[static_cast<size_t>(d)] < 0 ||
                               n[static_cast<size_t>(d)] >= base.dims(d) ||
                               !graph.in_d[static_cast<size_t>(base.flat(n[0], n[1], n[2]))];
                if (!outside) continue;
                std::array<int, 3> p = c;
                p[static_cast<size_t>(d)] -= sg;
                double se = std::sqrt(2.0 * std::max(layer_u(c), 0.0));
                double sp = se;
                if (p[static_cast<size_t>(d)] >= 0 && p[static_cast<size_t>(d)] < base.dims(d)) {
                    std::int64_t pid = base.flat(p[0], p[1], p[2]);
                    if (graph.in_d[static_cast<size_t>(pid)])
                        sp = std::sqrt(2.0 * std::max(layer_u(p), 0.0));
                }
                double delta = sp > se ? hd * se / (sp - se) : 0.5 * hd;
                delta = std::min(delta, 3.0 * hd);
                if (delta <= 0.5 * hd) continue;
                double t = 1.0 - 0.5 * hd / delta;
                vol += (2.0 / 3.0) * graph.g.at(b) * delta * std::pow(t, 1.5) * strip;
            }
        }
    }
    return vol;
}

ResidualReport residual_report(const PotentialSolution& sol, const DomainGraph& graph) {
    ResidualReport r;
    Mask m = interior_mask(sol, 2);
    ScalarField lap = laplacian(sol.u);
    double sum = 0;
    for (std::int64_t id = 0; id < sol.grid.size(); ++id) {
        if (!m[static_cast<size_t>(id)]) continue;
        double e = std::abs(lap.at(id) - 1.0);
        r.interior_max = std::max(r.interior_max, e);
        sum += e;
        ++r.interior_nodes;
    }
    r.interior_mean = r.interior_nodes ? sum / static_cast<double>(r.interior_nodes) : 0.0;

    const int va = sol.grid.vertical_axis();
    VectorField du = gradient(sol.u);
    for (std::int64_t b = 0; b < graph.base.size(); ++b) {
        if (!graph.in_d[static_cast<size_t>(b)]) continue;
        std::array<int, 3> bi = graph.base.unflat(b);
        Vec x = Vec::Zero();
        for (int d = 0; d + 1 < sol.grid.dim(); ++d)
            x[d] = graph.base.coord(d, bi[static_cast<size_t>(d)]);
        x[va] = graph.g.at(b);
        if (!sol.grid.contains(x, 1)) continue;
        InterpStencil stn = interp_stencil(sol.grid, x);
        double uv = interpolate(sol.u, stn);
        r.boundary_u_max = std::max(r.boundary_u_max, std::abs(uv));
        Eigen::VectorXd gv = interpolate(du, stn);
        r.boundary_grad_max = std::max(r.boundary_grad_max, gv.norm());
    }

    r.volume = 2.0 * domain_volume_upper(sol, graph);
    double tm = sol.measure.total_mass();
    r.mass_defect = tm > 0 ? std::abs(r.volume - tm) / tm : 0.0;
    return r;
}

Localized localize(const PotentialSolution& sol, double b) {
    if (b < 0) throw std::invalid_argument("slice height must be nonnegative");
    Localized out;
    if (b == 0) {
        out.measure = sol.measure;
        out.sol = sol;
        return out;
    }
    const Grid& g = sol.grid;
    const int va = g.vertical_axis();
    const double hv = g.spacing(va);
    const int layer_k = g.zero_layer(va);
    double t = b / hv;
    int kb = static_cast<int>(std::lround(t));
    if (std::abs(t - kb) > 1e-9)
        throw std::invalid_argument("slice height must sit on a node layer");
    int top_k = g.dims(va) - 1;
    int upper = top_k - layer_k - kb;  // nodes strictly above the slice
    if (upper < 3) throw std::invalid_argument("slice height leaves no room above");

    std::array<int, 3> dims{1, 1, 1};
    std::array<double, 3> h{1, 1, 1};
    std::array<double, 3> org{0, 0, 0};
    for (int d = 0; d < g.dim(); ++d) {
        size_t sd = static_cast<size_t>(d);
        dims[sd] = g.dims(d);
        h[sd] = g.spacing(d);
        org[sd] = g.origin(d);
    }
    dims[static_cast<size_t>(va)] = 2 * upper + 1;
    org[static_cast<size_t>(va)] = -upper * hv;
    Grid ng(g.dim(), dims, h, org);

    PotentialSolution ns;
    ns.grid = ng;
    ns.u = ScalarField(ng);
    ns.tol = sol.tol;
    ns.eps_height = sol.eps_height;
    ns.converged = sol.converged;
    ns.sweeps = sol.sweeps;
    ns.grows = sol.grows;

    const std::int64_t vs_old = stride_of(g, va);
    const std::int64_t vs_new = stride_of(ng, va);
    int nl = ng.zero_layer(va);
    for (std::int64_t nb = 0; nb < ng.size(); ++nb) {
        std::array<int, 3> c = ng.unflat(nb);
        int s = c[static_cast<size_t>(va)] - nl;
        std::array<int, 3> oc = c;
        oc[static_cast<size_t>(va)] = layer_k + kb + std::abs(s);
        ns.u.at(nb) = sol.u.at(g.flat(oc[0], oc[1], oc[2]));
    }

    // Slice density from the symmetric difference across the slice layer, so
    // the reflected field satisfies the discrete equations at the new layer.
    Grid base = g.base_grid();
    ScalarField fb(base);
    for (std::int64_t bb = 0; bb < base.size(); ++bb) {
        std::array<int, 3> bi = base.unflat(bb);
        std::array<int, 3> ai{0, 0, 0};
        for (int d = 0; d + 1 < g.dim(); ++d) ai[static_cast<size_t>(d)] = bi[static_cast<size_t>(d)];
        ai[static_cast<size_t>(va)] = layer_k + kb;
        std::int64_t lid = g.flat(ai[0], ai[1], ai[2]);
        double below = sol.u.at(lid - vs_old);
        double above = sol.u.at(lid + vs_old);
        fb.at(bb) = std::max((below - above) / hv, 0.0);
    }
    out.measure = make_density_measure(g.dim(), base, fb);
    ns.measure = out.measure;
    ns.rhs = deposit_measure(out.measure, ng);
    ns.final_residual = 0;
    ns.omega_mask.assign(static_cast<size_t>(ng.size()), 0);
    for (std::int64_t id = 0; id < ng.size(); ++id)
        if (ns.u.at(id) > ns.eps_height) ns.omega_mask[static_cast<size_t>(id)] = 1;
    for (std::int64_t id = 0; id < ng.size(); ++id)
        if (ns.rhs.at(id) < 1.0) ns.omega_mask[static_cast<size_t>(id)] = 1;
    out.sol = ns;
    (void)vs_new;
    return out;
}

}  // namespace qdlab
