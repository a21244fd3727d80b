#include "qdlab/surface.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdlab {
namespace {

double sq(double x) { return x * x; }

}  // namespace

HemisphereShape::HemisphereShape(double R, int base_dim) : R_(R), dim_(base_dim) {
    if (R <= 0 || base_dim < 1 || base_dim > 2)
        throw std::invalid_argument("hemisphere needs R > 0 and base dimension 1 or 2");
}

bool HemisphereShape::in_domain(const VecXd& s, double margin) const {
    return s.norm() < R_ - margin;
}

double HemisphereShape::height(const VecXd& s) const {
    return std::sqrt(std::max(R_ * R_ - s.squaredNorm(), 0.0));
}

VecXd HemisphereShape::height_grad(const VecXd& s) const {
    return -s / height(s);
}

MatXd HemisphereShape::height_hess(const VecXd& s) const {
    double g = height(s);
    MatXd h = -MatXd::Identity(dim_, dim_) / g;
    h -= s * s.transpose() / (g * g * g);
    return h;
}

void HemisphereShape::domain_box(VecXd& lo, VecXd& hi) const {
    lo = VecXd::Constant(dim_, -R_);
    hi = VecXd::Constant(dim_, R_);
}

EllipseArchShape::EllipseArchShape(double a, double b, int base_dim)
    : a_(a), b_(b), dim_(base_dim) {
    if (a <= 0 || b <= 0 || base_dim < 1 || base_dim > 2)
        throw std::invalid_argument("arch needs positive semiaxes and base dimension 1 or 2");
}

bool EllipseArchShape::in_domain(const VecXd& s, double margin) const {
    return s.norm() < a_ - margin;
}

double EllipseArchShape::height(const VecXd& s) const {
    return b_ * std::sqrt(std::max(1.0 - s.squaredNorm() / (a_ * a_), 0.0));
}

VecXd EllipseArchShape::height_grad(const VecXd& s) const {
    return -b_ * s / (a_ * a_ * std::sqrt(std::max(1.0 - s.squaredNorm() / (a_ * a_), 1e-300)));
}

MatXd EllipseArchShape::height_hess(const VecXd& s) const {
    double q = std::max(1.0 - s.squaredNorm() / (a_ * a_), 1e-300);
    double rq = std::sqrt(q);
    MatXd h = -b_ / (a_ * a_ * rq) * MatXd::Identity(dim_, dim_);
    h -= b_ / (a_ * a_ * a_ * a_ * q * rq) * (s * s.transpose());
    return h;
}

void EllipseArchShape::domain_box(VecXd& lo, VecXd& hi) const {
    lo = VecXd::Constant(dim_, -a_);
    hi = VecXd::Constant(dim_, a_);
}

bool TallCapShape::in_domain(const VecXd& s, double margin) const {
    return s.norm() < 1.0 - margin;
}

double TallCapShape::height(const VecXd& s) const { return 1.0 - s.squaredNorm(); }

VecXd TallCapShape::height_grad(const VecXd& s) const { return -2.0 * s; }

MatXd TallCapShape::height_hess(const VecXd& s) const {
    (void)s;
    return -2.0 * MatXd::Identity(dim_, dim_);
}

void TallCapShape::domain_box(VecXd& lo, VecXd& hi) const {
    lo = VecXd::Constant(dim_, -1.0);
    hi = VecXd::Constant(dim_, 1.0);
}

GraphSurface::GraphSurface(const DomainGraph& graph, int fit_halfwidth)
    : graph_(graph), hw_(fit_halfwidth) {
    if (hw_ < 1) throw std::invalid_argument("fit halfwidth must be >= 1");
    for (std::int64_t b = 0; b < graph_.base.size(); ++b)
        if (graph_.in_d[static_cast<size_t>(b)]) max_g_ = std::max(max_g_, graph_.g.at(b));
}

double GraphSurface::rim_clearance() const {
    double h = 0;
    for (int d = 0; d < graph_.base.dim(); ++d) h = std::max(h, graph_.base.spacing(d));
    return (hw_ + 1) * h;
}

bool GraphSurface::in_domain(const VecXd& s, double margin) const {
    const Grid& b = graph_.base;
    if (s.size() != b.dim()) return false;
    std::array<int, 3> c{0, 0, 0};
    std::array<int, 3> rad{0, 0, 0};
    for (int d = 0; d < b.dim(); ++d) {
        double t = (s[d] - b.origin(d)) / b.spacing(d);
        int i = static_cast<int>(std::lround(t));
        if (i < 0 || i >= b.dims(d)) return false;
        c[static_cast<size_t>(d)] = i;
        rad[static_cast<size_t>(d)] =
            static_cast<int>(std::ceil(margin / b.spacing(d) - 1e-9));
    }
    for (int di = -rad[0]; di <= rad[0]; ++di)
        for (int dj = -rad[1]; dj <= rad[1]; ++dj)
            for (int dk = -rad[2]; dk <= rad[2]; ++dk) {
                int i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
                if (i < 0 || i >= b.dims(0) || (b.dim() > 1 && (j < 0 || j >= b.dims(1))))
                    return false;
                if (b.dim() <= 1 && dj != 0) continue;
                if (b.dim() <= 2 && dk != 0) continue;
                if (!graph_.in_d[static_cast<size_t>(b.flat(i, b.dim() > 1 ? j : 0, 0))])
                    return false;
            }
    return true;
}

// Weighted quadratic fit of the height table around s; derivatives come from
// the fitted polynomial, which tolerates the threshold noise of extraction
// better than raw second differences.
void GraphSurface::fit(const VecXd& s, double* g, VecXd* dg, MatXd* d2g) const {
    const Grid& b = graph_.base;
    const int dim = b.dim();
    if (s.size() != dim) throw std::invalid_argument("base point dimension mismatch");
    std::array<int, 3> c{0, 0, 0};
    for (int d = 0; d < dim; ++d) {
        double t = (s[d] - b.origin(d)) / b.spacing(d);
        int i = static_cast<int>(std::lround(t));
        if (i < 0 || i >= b.dims(d))
            throw std::out_of_range("base point outside the graph grid");
        c[static_cast<size_t>(d)] = i;
    }
    const int ncoef = dim == 1 ? 3 : 6;
    for (int grow = 0; grow <= 2; ++grow) {
        int W = hw_ + grow;
        std::vector<std::array<int, 3>> nodes;
        for (int di = -W; di <= W; ++di) {
            int i = c[0] + di;
            if (i < 0 || i >= b.dims(0)) continue;
            if (dim == 1) {
                if (graph_.in_d[static_cast<size_t>(b.flat(i, 0, 0))])
                    nodes.push_back({i, 0, 0});
                continue;
            }
            for (int dj = -W; dj <= W; ++dj) {
                int j = c[1] + dj;
                if (j < 0 || j >= b.dims(1)) continue;
                if (graph_.in_d[static_cast<size_t>(b.flat(i, j, 0))])
                    nodes.push_back({i, j, 0});
            }
        }
        if (static_cast<int>(nodes.size()) < ncoef + 2) continue;
        MatXd A(nodes.size(), ncoef);
        VecXd y(nodes.size());
        VecXd wts(nodes.size());
        double span = (W + 1.0);
        for (size_t r = 0; r < nodes.size(); ++r) {
            double t0 = (b.coord(0, nodes[r][0]) - s[0]) / b.spacing(0);
            double t1 = dim > 1 ? (b.coord(1, nodes[r][1]) - s[1]) / b.spacing(1) : 0.0;
            double w = std::max(0.0, 1.0 - std::abs(t0) / span);
            if (dim > 1) w *= std::max(0.0, 1.0 - std::abs(t1) / span);
            wts[static_cast<Eigen::Index>(r)] = w;
            y[static_cast<Eigen::Index>(r)] =
                graph_.g.at(b.flat(nodes[r][0], nodes[r][1], 0));
            Eigen::Index rr = static_cast<Eigen::Index>(r);
            A(rr, 0) = 1.0;
            A(rr, 1) = t0;
            if (dim == 1) {
                A(rr, 2) = t0 * t0;
            } else {
                A(rr, 2) = t1;
                A(rr, 3) = t0 * t0;
                A(rr, 4) = t0 * t1;
                A(rr, 5) = t1 * t1;
            }
        }
        MatXd Aw = wts.asDiagonal() * A;
        MatXd N = A.transpose() * Aw;
        VecXd rhs = Aw.transpose() * y;
        Eigen::LDLT<MatXd> ldlt(N);
        if (ldlt.info() != Eigen::Success) continue;
        VecXd coef = ldlt.solve(rhs);
        if (g) *g = coef[0];
        if (dg) {
            dg->resize(dim);
            (*dg)[0] = coef[1] / b.spacing(0);
            if (dim > 1) (*dg)[1] = coef[2] / b.spacing(1);
        }
        if (d2g) {
            d2g->resize(dim, dim);
            if (dim == 1) {
                (*d2g)(0, 0) = 2.0 * coef[2] / sq(b.spacing(0));
            } else {
                (*d2g)(0, 0) = 2.0 * coef[3] / sq(b.spacing(0));
                (*d2g)(0, 1) = (*d2g)(1, 0) = coef[4] / (b.spacing(0) * b.spacing(1));
                (*d2g)(1, 1) = 2.0 * coef[5] / sq(b.spacing(1));
            }
        }
        return;
    }
    throw std::out_of_range("too few graph columns near the query point");
}

double GraphSurface::height(const VecXd& s) const {
    double g = 0;
    fit(s, &g, nullptr, nullptr);
    return g;
}

VecXd GraphSurface::height_grad(const VecXd& s) const {
    VecXd dg;
    fit(s, nullptr, &dg, nullptr);
    return dg;
}

MatXd GraphSurface::height_hess(const VecXd& s) const {
    MatXd d2g;
    fit(s, nullptr, nullptr, &d2g);
    return d2g;
}

void GraphSurface::domain_box(VecXd& lo, VecXd& hi) const {
    const Grid& b = graph_.base;
    lo = VecXd::Constant(b.dim(), std::numeric_limits<double>::infinity());
    hi = VecXd::Constant(b.dim(), -std::numeric_limits<double>::infinity());
    for (std::int64_t id = 0; id < b.size(); ++id) {
        if (!graph_.in_d[static_cast<size_t>(id)]) continue;
        std::array<int, 3> c = b.unflat(id);
        for (int d = 0; d < b.dim(); ++d) {
            double x = b.coord(d, c[static_cast<size_t>(d)]);
            lo[d] = std::min(lo[d], x);
            hi[d] = std::max(hi[d], x);
        }
    }
}

SurfaceJet surface_jet(const SurfaceModel& m, const VecXd& s) {
    if (!m.in_domain(s, 0.0))
        throw std::domain_error("jet requested outside the surface domain");
    SurfaceJet j;
    j.s = s;
    j.g = m.height(s);
    j.dg = m.height_grad(s);
    j.d2g = m.height_hess(s);
    const int d = m.base_dim();
    j.speed = std::sqrt(1.0 + j.dg.squaredNorm());
    j.normal_len = j.g * j.speed;
    j.foot = s + j.g * j.dg;
    j.phi = 0.5 * (s.squaredNorm() + j.g * j.g);
    j.metric = MatXd::Identity(d, d) + j.dg * j.dg.transpose();
    j.second = j.d2g / j.speed;
    j.phi_hess = j.metric + j.normal_len * j.second;
    j.normal.resize(d + 1);
    j.normal.head(d) = j.dg / j.speed;
    j.normal[d] = -1.0 / j.speed;
    return j;
}

ShiftedJet shifted_jet(const SurfaceJet& jet, const VecXd& a, double b) {
    if (jet.g <= b) throw std::domain_error("shifted jet requires g > b");
    ShiftedJet s;
    s.center_a = a;
    s.center_b = b;
    s.grad = (jet.s - a) + (jet.g - b) * jet.dg;
    s.hess = jet.phi_hess - b * jet.d2g;
    return s;
}

VecXd principal_curvatures(const SurfaceJet& jet) {
    Eigen::GeneralizedSelfAdjointEigenSolver<MatXd> es(jet.second, jet.metric);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("curvature eigensolve failed");
    return es.eigenvalues();
}

VecXd poincare_forward(const VecXd& uv) {
    const Eigen::Index n = uv.size();
    if (n < 2 || uv[n - 1] <= 0)
        throw std::domain_error("forward transform needs a point of the upper half space");
    VecXd st(n);
    st.head(n - 1) = uv.head(n - 1);
    st[n - 1] = 0.5 * uv.squaredNorm();
    return st;
}

VecXd poincare_inverse(const VecXd& st) {
    const Eigen::Index n = st.size();
    if (n < 2) throw std::domain_error("inverse transform needs at least two components");
    double q = 2.0 * st[n - 1] - st.head(n - 1).squaredNorm();
    if (q <= 0) throw std::domain_error("inverse transform target below the paraboloid");
    VecXd uv(n);
    uv.head(n - 1) = st.head(n - 1);
    uv[n - 1] = std::sqrt(q);
    return uv;
}

double halton(long index, int base) {
    double f = 1.0, r = 0.0;
    long i = index + 1;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

std::vector<VecXd> sample_domain(const SurfaceModel& m, int count, double margin) {
    const int dim = m.base_dim();
    double mar = std::max(margin, m.rim_clearance());
    VecXd lo, hi;
    m.domain_box(lo, hi);
    std::vector<VecXd> out;
    VecXd center = 0.5 * (lo + hi);
    if (m.in_domain(center, mar)) out.push_back(center);
    static const int bases[3] = {2, 3, 5};
    long idx = 0;
    long guard = 200L * count + 1000;
    while (static_cast<int>(out.size()) < count && guard-- > 0) {
        VecXd s(dim);
        for (int d = 0; d < dim; ++d)
            s[d] = lo[d] + (hi[d] - lo[d]) * halton(idx, bases[d]);
        ++idx;
        if (m.in_domain(s, mar)) out.push_back(s);
    }
    return out;
}

}  // namespace qdlab
