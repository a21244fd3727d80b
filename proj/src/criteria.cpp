#include "qdlab/criteria.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace qdlab {
namespace {

struct Ctx {
    const SurfaceModel* m = nullptr;
    double tol = 0;
    double margin = 0;
    double scale = 1;
    bool grid = false;
    double h = 0;
    std::vector<VecXd> samples;
    std::vector<SurfaceJet> jets;
    std::vector<std::pair<int, int>> pairs;
    std::vector<VecXd> bnd;     // ambient boundary samples, upper then mirrored
    std::vector<VecXd> probes;  // ambient interior probes
    VecXd lo, hi;
};

VecXd ambient(const VecXd& s, double t) {
    VecXd x(s.size() + 1);
    x.head(s.size()) = s;
    x[s.size()] = t;
    return x;
}

double safe_height(const SurfaceModel& m, const VecXd& s) {
    if (!m.in_domain(s, 0.0)) return 0.0;
    try {
        return std::max(m.height(s), 0.0);
    } catch (const std::exception&) {
        return 0.0;
    }
}

Ctx make_ctx(const SurfaceModel& m, const CriteriaOptions& opt) {
    Ctx c;
    c.m = &m;
    m.domain_box(c.lo, c.hi);
    double half = 0;
    for (int d = 0; d < m.base_dim(); ++d) half = std::max(half, 0.5 * (c.hi[d] - c.lo[d]));
    c.scale = std::max(half, m.max_height());
    c.grid = dynamic_cast<const GraphSurface*>(&m) != nullptr;
    if (c.grid) {
        const auto& g = dynamic_cast<const GraphSurface&>(m).graph();
        for (int d = 0; d < g.base.dim(); ++d) c.h = std::max(c.h, g.base.spacing(d));
    }
    c.tol = opt.tol > 0 ? opt.tol : default_tolerance(m);
    c.margin = opt.margin > 0 ? opt.margin
                              : (c.grid ? m.rim_clearance() + 2.0 * c.h : 0.015 * c.scale);

    c.samples = sample_domain(m, opt.samples, c.margin);
    for (const auto& s : c.samples) {
        try {
            c.jets.push_back(surface_jet(m, s));
        } catch (const std::exception&) {
        }
    }
    if (c.jets.empty()) throw std::invalid_argument("no valid sample points on the surface");

    const int n = static_cast<int>(c.jets.size());
    static const int strides[] = {1, 3, 7, 17, 41, 67};
    for (int st : strides) {
        for (int i = 0; i + st < n; ++i) {
            if (static_cast<int>(c.pairs.size()) >= opt.pair_samples) break;
            c.pairs.emplace_back(i, i + st);
        }
    }

    // Boundary lattice: upper graph points and their mirror images.
    int nb = m.base_dim() == 1 ? 1600 : 120;
    if (m.base_dim() == 1) {
        for (int i = 0; i <= nb; ++i) {
            VecXd s(1);
            s[0] = c.lo[0] + (c.hi[0] - c.lo[0]) * i / nb;
            if (!m.in_domain(s, 0.0)) continue;
            double g = safe_height(m, s);
            c.bnd.push_back(ambient(s, g));
            c.bnd.push_back(ambient(s, -g));
        }
    } else {
        for (int i = 0; i <= nb; ++i)
            for (int j = 0; j <= nb; ++j) {
                VecXd s(2);
                s[0] = c.lo[0] + (c.hi[0] - c.lo[0]) * i / nb;
                s[1] = c.lo[1] + (c.hi[1] - c.lo[1]) * j / nb;
                if (!m.in_domain(s, 0.0)) continue;
                double g = safe_height(m, s);
                c.bnd.push_back(ambient(s, g));
                c.bnd.push_back(ambient(s, -g));
            }
    }

    int want = std::max(opt.probes, 4);
    for (size_t i = 0; i < c.jets.size() && static_cast<int>(c.probes.size()) < want; ++i) {
        const auto& j = c.jets[i];
        if (j.g < 0.05 * c.scale) continue;
        c.probes.push_back(ambient(j.s, (i % 2 ? 0.72 : 0.38) * j.g));
    }
    return c;
}

double dist_to_boundary(const Ctx& c, const VecXd& x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : c.bnd) best = std::min(best, (x - y).norm());
    return best;
}

double min_eig(const MatXd& a) {
    Eigen::SelfAdjointEigenSolver<MatXd> es(a);
    return es.eigenvalues().minCoeff();
}

CriterionVerdict verdict(const Ctx& c, const char* id, double margin, const VecXd& wit,
                         const std::string& note = {}) {
    CriterionVerdict v;
    v.id = id;
    v.margin = margin;
    v.pass = margin >= -c.tol;
    v.witness = wit;
    v.note = note;
    return v;
}

std::array<CriterionVerdict, 2> convexity_impl(const Ctx& c) {
    double m1 = std::numeric_limits<double>::infinity();
    VecXd w1;
    for (const auto& j : c.jets) {
        double e = min_eig(j.phi_hess);
        if (e < m1) {
            m1 = e;
            w1 = j.s;
        }
    }
    double m2 = std::numeric_limits<double>::infinity();
    VecXd w2;
    double gm = c.m->max_height();
    for (double frac : {0.25, 0.5, 0.75}) {
        double b = frac * gm;
        for (const auto& j : c.jets) {
            if (j.g <= b + 1e-12) continue;
            double e = min_eig(MatXd(j.phi_hess - b * j.d2g));
            if (e < m2) {
                m2 = e;
                w2 = j.s;
            }
        }
    }
    if (!std::isfinite(m2)) {
        m2 = m1;
        w2 = w1;
    }
    return {verdict(c, "i", m1, w1), verdict(c, "ii", m2, w2, "centers b in {1,2,3}/4 of max height")};
}

CriterionVerdict footpoint_impl(const Ctx& c) {
    const SurfaceModel& m = *c.m;
    const int dim = m.base_dim();
    double worst = std::numeric_limits<double>::infinity();
    VecXd wit;
    double step = c.grid ? 0.75 * c.h : 1e-5 * c.scale;
    auto foot_at = [&](const VecXd& s) {
        return VecXd(s + m.height(s) * m.height_grad(s));
    };
    for (const auto& j : c.jets) {
        bool ok = true;
        MatXd J(dim, dim);
        for (int d = 0; d < dim && ok; ++d) {
            VecXd sp = j.s, sm = j.s;
            sp[d] += step;
            sm[d] -= step;
            if (!m.in_domain(sp, 0.5 * c.margin) || !m.in_domain(sm, 0.5 * c.margin)) {
                ok = false;
                break;
            }
            J.col(d) = (foot_at(sp) - foot_at(sm)) / (2.0 * step);
        }
        if (!ok) continue;
        double e = min_eig(MatXd(0.5 * (J + J.transpose())));
        if (e < worst) {
            worst = e;
            wit = j.s;
        }
    }
    for (const auto& pr : c.pairs) {
        const auto& a = c.jets[static_cast<size_t>(pr.first)];
        const auto& b = c.jets[static_cast<size_t>(pr.second)];
        VecXd du = a.s - b.s;
        double L2 = du.squaredNorm();
        if (L2 < 1e-18) continue;
        bool inside = true;
        for (int q = 1; q < 8 && inside; ++q)
            inside = m.in_domain(b.s + (q / 8.0) * du, 0.0);
        if (!inside) continue;
        double e = (a.foot - b.foot).dot(du) / L2;
        if (e < worst) {
            worst = e;
            wit = a.s;
        }
    }
    return verdict(c, "iii", worst, wit);
}

std::array<CriterionVerdict, 3> ball_union_impl(const Ctx& c) {
    const SurfaceModel& m = *c.m;
    const int dim = m.base_dim();
    constexpr double kPi = 3.14159265358979323846;

    // iv: every normal ball stays inside the body, and probes are covered.
    double m4 = std::numeric_limits<double>::infinity();
    VecXd w4;
    for (const auto& j : c.jets) {
        double r = j.normal_len;
        if (r <= 0) continue;
        std::vector<VecXd> dirs;
        if (dim == 1) {
            for (int k = 0; k < 48; ++k) {
                double t = 2.0 * kPi * k / 48;
                VecXd d(2);
                d << std::cos(t), std::sin(t);
                dirs.push_back(d);
            }
        } else {
            for (int p = 1; p < 12; ++p)
                for (int q = 0; q < 24; ++q) {
                    double th = kPi * p / 12, ph = 2.0 * kPi * q / 24;
                    VecXd d(3);
                    d << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
                    dirs.push_back(d);
                }
            VecXd up(3), dn(3);
            up << 0, 0, 1;
            dn << 0, 0, -1;
            dirs.push_back(up);
            dirs.push_back(dn);
        }
        for (const auto& d : dirs) {
            VecXd x = ambient(j.foot, 0.0) + r * d;
            VecXd xp = x.head(dim);
            double gx = safe_height(m, xp);
            double e = (gx - std::abs(x[dim])) / c.scale;
            if (e < m4) {
                m4 = e;
                w4 = j.s;
            }
        }
    }
    for (const auto& x : c.probes) {
        double cover = -std::numeric_limits<double>::infinity();
        for (const auto& j : c.jets)
            cover = std::max(cover,
                             (j.normal_len - (x - ambient(j.foot, 0.0)).norm()) / c.scale);
        if (cover < m4) {
            m4 = cover;
            w4 = x;
        }
    }

    // v: the normal balls are the maximal inscribed balls at their feet, and
    // the feet stay inside the convex hull of the base domain.
    double m5 = std::numeric_limits<double>::infinity();
    VecXd w5;
    for (const auto& j : c.jets) {
        double r = dist_to_boundary(c, ambient(j.foot, 0.0));
        double e = (r - j.normal_len) / c.scale;
        if (e < m5) {
            m5 = e;
            w5 = j.s;
        }
    }
    // feet inside the convex hull of D, tested with support directions
    {
        int K = dim == 1 ? 2 : 64;
        for (const auto& j : c.jets) {
            double worst = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                VecXd th(dim);
                if (dim == 1)
                    th[0] = k == 0 ? 1.0 : -1.0;
                else {
                    double t = 2.0 * kPi * k / K;
                    th << std::cos(t), std::sin(t);
                }
                double support = -std::numeric_limits<double>::infinity();
                for (const auto& y : c.bnd) {
                    if (y[dim] < 0) continue;
                    support = std::max(support, th.dot(y.head(dim)));
                }
                worst = std::min(worst, (support - th.dot(j.foot)) / c.scale);
            }
            if (worst < m5) {
                m5 = worst;
                w5 = j.s;
            }
        }
    }

    // ix: each boundary sample is the nearest boundary point of its own foot.
    double m9 = std::numeric_limits<double>::infinity();
    VecXd w9;
    for (const auto& j : c.jets) {
        VecXd q = ambient(j.foot, 0.0);
        VecXd y = ambient(j.s, j.g);
        double e = (dist_to_boundary(c, q) - (y - q).norm()) / c.scale;
        if (e < m9) {
            m9 = e;
            w9 = y;
        }
    }
    return {verdict(c, "iv", m4, w4), verdict(c, "v", m5, w5), verdict(c, "ix", m9, w9)};
}

std::array<CriterionVerdict, 2> normals_impl(const Ctx& c) {
    const int dim = c.m->base_dim();

    double sep = c.grid ? 3.0 * c.h : 1e-3 * c.scale;
    double cross_eps = c.grid ? 20.0 * c.h * c.h : 1e-9 * c.scale;
    double best = std::numeric_limits<double>::infinity();
    bool crossing = false;
    VecXd w6;
    for (const auto& pr : c.pairs) {
        const auto& a = c.jets[static_cast<size_t>(pr.first)];
        const auto& b = c.jets[static_cast<size_t>(pr.second)];
        if ((a.s - b.s).norm() < sep) continue;
        double t = 0, s = 0;
        double d = segment_distance(ambient(a.s, a.g), ambient(a.foot, 0.0),
                                    ambient(b.s, b.g), ambient(b.foot, 0.0), &t, &s);
        bool interior = t > 0.05 && t < 0.95 && s > 0.05 && s < 0.95;
        if (!interior) continue;
        if (d < best) {
            best = d;
            w6 = a.s;
        }
        if (d < cross_eps) crossing = true;
    }
    CriterionVerdict v6;
    v6.id = "vi";
    v6.pass = !crossing;
    v6.margin = std::isfinite(best) ? best / c.scale : 1.0;
    v6.witness = w6;
    v6.note = "interior-interior closest approaches only";

    // viii: unique nearest boundary point for interior probes, detected as a
    // single sub-level cluster of the distance along the graph.
    CriterionVerdict v8;
    v8.id = "viii";
    v8.pass = true;
    v8.margin = 1.0;
    double delta = c.grid ? std::max(20.0 * c.h * c.h, 1e-10) : 1e-7 * c.scale;
    const SurfaceModel& m = *c.m;
    int nf = dim == 1 ? 2400 : 160;
    for (const auto& x : c.probes) {
        std::vector<double> dist;
        std::vector<std::array<int, 2>> cells;
        if (dim == 1) {
            for (int i = 0; i <= nf; ++i) {
                VecXd s(1);
                s[0] = c.lo[0] + (c.hi[0] - c.lo[0]) * i / nf;
                if (!m.in_domain(s, 0.0)) continue;
                double g = safe_height(m, s);
                dist.push_back((x - ambient(s, g)).norm());
                cells.push_back({i, 0});
            }
        } else {
            for (int i = 0; i <= nf; ++i)
                for (int j2 = 0; j2 <= nf; ++j2) {
                    VecXd s(2);
                    s[0] = c.lo[0] + (c.hi[0] - c.lo[0]) * i / nf;
                    s[1] = c.lo[1] + (c.hi[1] - c.lo[1]) * j2 / nf;
                    if (!m.in_domain(s, 0.0)) continue;
                    double g = safe_height(m, s);
                    dist.push_back((x - ambient(s, g)).norm());
                    cells.push_back({i, j2});
                }
        }
        if (dist.empty()) continue;
        double dmin = *std::min_element(dist.begin(), dist.end());
        std::vector<size_t> low;
        for (size_t i = 0; i < dist.size(); ++i)
            if (dist[i] <= dmin + delta) low.push_back(i);
        // connected components of the sub-level set, adjacency within 2 steps
        std::vector<int> comp(low.size(), -1);
        int ncomp = 0;
        for (size_t i = 0; i < low.size(); ++i) {
            if (comp[i] >= 0) continue;
            comp[i] = ncomp;
            std::deque<size_t> q{i};
            while (!q.empty()) {
                size_t cur = q.front();
                q.pop_front();
                for (size_t k = 0; k < low.size(); ++k) {
                    if (comp[k] >= 0) continue;
                    int di = std::abs(cells[low[cur]][0] - cells[low[k]][0]);
                    int dj = std::abs(cells[low[cur]][1] - cells[low[k]][1]);
                    if (di <= 2 && dj <= 2) {
                        comp[k] = ncomp;
                        q.push_back(k);
                    }
                }
            }
            ++ncomp;
        }
        if (ncomp > 1) {
            v8.pass = false;
            double mg = -static_cast<double>(ncomp - 1);
            if (mg < v8.margin) {
                v8.margin = mg;
                v8.witness = x;
            }
        }
    }
    if (v8.pass) v8.note = "single nearest-point cluster at every probe";
    return {v6, v8};
}

CriterionVerdict curvature_impl(const Ctx& c) {
    double worst = std::numeric_limits<double>::infinity();
    VecXd wit;
    for (const auto& j : c.jets) {
        VecXd k = principal_curvatures(j);
        double e = k.minCoeff() * j.normal_len + 1.0;
        if (e < worst) {
            worst = e;
            wit = j.s;
        }
    }
    return verdict(c, "vii", worst, wit);
}

CriterionVerdict poincare_impl(const Ctx& c, const CriteriaOptions& opt) {
    const SurfaceModel& m = *c.m;
    const int dim = m.base_dim();
    auto phi_ext = [&](const VecXd& s) {
        double g = safe_height(m, s);
        return 0.5 * (s.squaredNorm() + g * g);
    };
    VecXd clo = c.lo, chi = c.hi;
    VecXd mid = 0.5 * (clo + chi);
    clo = mid + 1.35 * (clo - mid);
    chi = mid + 1.35 * (chi - mid);
    double worst = std::numeric_limits<double>::infinity();
    VecXd wit;
    static const int bases[4] = {2, 3, 5, 7};
    for (int k = 0; k < opt.pair_samples; ++k) {
        VecXd s1(dim), s2(dim);
        for (int d = 0; d < dim; ++d) {
            s1[d] = clo[d] + (chi[d] - clo[d]) * halton(k, bases[d]);
            s2[d] = clo[d] + (chi[d] - clo[d]) * halton(k, bases[d + (dim == 1 ? 1 : 2)]);
        }
        double e = (0.5 * (phi_ext(s1) + phi_ext(s2)) - phi_ext(0.5 * (s1 + s2))) /
                   (c.scale * c.scale);
        if (e < worst) {
            worst = e;
            wit = s1;
        }
    }
    // structured axis pairs straddling the center
    for (int d = 0; d < dim; ++d) {
        for (int k = 1; k <= 24; ++k) {
            VecXd s1 = mid, s2 = mid;
            double t = (chi[d] - mid[d]) * k / 24.0;
            s1[d] = mid[d] - t;
            s2[d] = mid[d] + 0.7 * t;
            double e = (0.5 * (phi_ext(s1) + phi_ext(s2)) - phi_ext(0.5 * (s1 + s2))) /
                       (c.scale * c.scale);
            if (e < worst) {
                worst = e;
                wit = s1;
            }
        }
    }
    return verdict(c, "x", worst, wit, "midpoint convexity of the extended energy");
}

}  // namespace

double default_tolerance(const SurfaceModel& m) {
    if (const auto* gs = dynamic_cast<const GraphSurface*>(&m)) {
        double h = 0;
        for (int d = 0; d < gs->graph().base.dim(); ++d)
            h = std::max(h, gs->graph().base.spacing(d));
        return 5.0 * h;
    }
    return 1e-8;
}

std::array<CriterionVerdict, 2> check_convexity(const SurfaceModel& m,
                                                const CriteriaOptions& opt) {
    return convexity_impl(make_ctx(m, opt));
}

CriterionVerdict check_footpoint_monotone(const SurfaceModel& m, const CriteriaOptions& opt) {
    return footpoint_impl(make_ctx(m, opt));
}

std::array<CriterionVerdict, 3> check_ball_union(const SurfaceModel& m,
                                                 const CriteriaOptions& opt) {
    return ball_union_impl(make_ctx(m, opt));
}

std::array<CriterionVerdict, 2> check_normals(const SurfaceModel& m,
                                              const CriteriaOptions& opt) {
    return normals_impl(make_ctx(m, opt));
}

CriterionVerdict check_curvature_bound(const SurfaceModel& m, const CriteriaOptions& opt) {
    return curvature_impl(make_ctx(m, opt));
}

CriterionVerdict check_poincare_convex(const SurfaceModel& m, const CriteriaOptions& opt) {
    Ctx c = make_ctx(m, opt);
    return poincare_impl(c, opt);
}

const CriterionVerdict& CriteriaReport::by_id(const std::string& id) const {
    for (const auto& v : verdicts)
        if (v.id == id) return v;
    throw std::out_of_range("no verdict with id " + id);
}

CriteriaReport equivalence_report(const SurfaceModel& m, const CriteriaOptions& opt) {
    Ctx c = make_ctx(m, opt);
    CriteriaReport r;
    r.tol = c.tol;
    r.sample_margin = c.margin;
    r.samples_used = static_cast<int>(c.jets.size());
    auto c12 = convexity_impl(c);
    r.verdicts.push_back(c12[0]);
    r.verdicts.push_back(c12[1]);
    r.verdicts.push_back(footpoint_impl(c));
    auto c459 = ball_union_impl(c);
    r.verdicts.push_back(c459[0]);
    r.verdicts.push_back(c459[1]);
    auto c68 = normals_impl(c);
    r.verdicts.push_back(c68[0]);
    r.verdicts.push_back(curvature_impl(c));
    r.verdicts.push_back(c68[1]);
    r.verdicts.push_back(c459[2]);
    r.verdicts.push_back(poincare_impl(c, opt));

    r.all_pass = true;
    bool all_fail = true;
    for (const auto& v : r.verdicts) {
        r.all_pass = r.all_pass && v.pass;
        all_fail = all_fail && !v.pass;
    }
    r.equivalent = r.all_pass || all_fail;

    r.margin_signs_consistent = true;
    for (const auto& j : c.jets) {
        double a = min_eig(j.phi_hess);
        double b = principal_curvatures(j).minCoeff() * j.normal_len + 1.0;
        bool disagree = (a > c.tol && b < -c.tol) || (a < -c.tol && b > c.tol);
        if (disagree) r.margin_signs_consistent = false;
    }
    return r;
}

double segment_distance(const VecXd& p0, const VecXd& p1, const VecXd& q0, const VecXd& q1,
                        double* t_out, double* s_out) {
    VecXd d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
    double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    double t = 0, s = 0;
    const double eps = 1e-14;
    if (a <= eps && e <= eps) {
        t = s = 0;
    } else if (a <= eps) {
        s = std::clamp(f / e, 0.0, 1.0);
    } else {
        double cc = d1.dot(r);
        if (e <= eps) {
            t = std::clamp(-cc / a, 0.0, 1.0);
        } else {
            double b = d1.dot(d2);
            double den = a * e - b * b;
            t = den > eps ? std::clamp((b * f - cc * e) / den, 0.0, 1.0) : 0.0;
            s = (b * t + f) / e;
            if (s < 0) {
                s = 0;
                t = std::clamp(-cc / a, 0.0, 1.0);
            } else if (s > 1) {
                s = 1;
                t = std::clamp((b - cc) / a, 0.0, 1.0);
            }
        }
    }
    if (t_out) *t_out = t;
    if (s_out) *s_out = s;
    return (p0 + t * d1 - q0 - s * d2).norm();
}

}  // namespace qdlab
