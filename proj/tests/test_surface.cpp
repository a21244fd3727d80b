#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qdlab/analytic.hpp"
#include "qdlab/surface.hpp"

using namespace qdlab;

namespace {

VecXd pt(double x) {
    VecXd s(1);
    s[0] = x;
    return s;
}

VecXd pt(double x, double y) {
    VecXd s(2);
    s[0] = x;
    s[1] = y;
    return s;
}

double phi_of(const SurfaceModel& m, const VecXd& s) {
    double g = m.height(s);
    return 0.5 * (s.squaredNorm() + g * g);
}

double shifted_of(const SurfaceModel& m, const VecXd& s, const VecXd& a, double b) {
    double g = m.height(s);
    return 0.5 * ((s - a).squaredNorm() + (g - b) * (g - b));
}

// Central differences of a scalar functional of the base point.
template <class F>
VecXd fd_grad(F&& f, const VecXd& s, double step) {
    VecXd g(s.size());
    for (Eigen::Index d = 0; d < s.size(); ++d) {
        VecXd p = s, q = s;
        p[d] += step;
        q[d] -= step;
        g[d] = (f(p) - f(q)) / (2 * step);
    }
    return g;
}

template <class F>
MatXd fd_hess(F&& f, const VecXd& s, double step) {
    const Eigen::Index n = s.size();
    MatXd h(n, n);
    double f0 = f(s);
    for (Eigen::Index i = 0; i < n; ++i) {
        VecXd p = s, q = s;
        p[i] += step;
        q[i] -= step;
        h(i, i) = (f(p) - 2 * f0 + f(q)) / (step * step);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            VecXd pp = s, pm = s, mp = s, mm = s;
            pp[i] += step;
            pp[j] += step;
            pm[i] += step;
            pm[j] -= step;
            mp[i] -= step;
            mp[j] += step;
            mm[i] -= step;
            mm[j] -= step;
            h(i, j) = h(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * step * step);
        }
    }
    return h;
}

}  // namespace

TEST_CASE("hemisphere jets are rotationally rigid") {
    HemisphereShape m2(2.0, 2);
    for (const VecXd& s : {pt(0.5, -0.3), pt(-1.1, 0.9), pt(0.0, 0.0)}) {
        SurfaceJet j = surface_jet(m2, s);
        CHECK(j.foot.norm() <= 1e-12);
        CHECK(j.normal_len == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(j.phi == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(j.phi_hess.norm() <= 1e-11);
        VecXd k = principal_curvatures(j);
        CHECK(k[0] == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(k[1] == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(j.normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(j.normal[2] < 0.0);
    }

    HemisphereShape m1(1.5, 1);
    SurfaceJet j = surface_jet(m1, pt(0.9));
    CHECK(j.foot.norm() <= 1e-12);
    CHECK(j.normal_len == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(j.phi == doctest::Approx(1.125).epsilon(1e-12));
    CHECK(std::abs(j.phi_hess(0, 0)) <= 1e-11);
    CHECK(principal_curvatures(j)[0] == doctest::Approx(-1.0 / 1.5).epsilon(1e-12));
}

TEST_CASE("arch jets have linear feet and constant distance curvature") {
    EllipseArchShape m1(5.0, 3.0, 1);
    for (double u : {0.0, 1.7, -3.1, 4.2}) {
        SurfaceJet j = surface_jet(m1, pt(u));
        CHECK(j.foot[0] == doctest::Approx(0.64 * u).epsilon(1e-12));
        CHECK(j.phi == doctest::Approx(0.5 * (9.0 + 0.64 * u * u)).epsilon(1e-12));
        CHECK(j.phi_hess(0, 0) == doctest::Approx(0.64).epsilon(1e-12));
    }
    CHECK(principal_curvatures(surface_jet(m1, pt(0.0)))[0] ==
          doctest::Approx(-0.12).epsilon(1e-12));

    EllipseArchShape m2(5.0, 3.0, 2);
    VecXd s = pt(1.2, -2.0);
    SurfaceJet j = surface_jet(m2, s);
    CHECK((j.foot - 0.64 * s).norm() <= 1e-12);
    CHECK(j.phi == doctest::Approx(0.5 * (9.0 + 0.64 * s.squaredNorm())).epsilon(1e-12));
    CHECK((j.phi_hess - 0.64 * MatXd::Identity(2, 2)).norm() <= 1e-11);
    VecXd k = principal_curvatures(surface_jet(m2, pt(0.0, 0.0)));
    CHECK(k[0] == doctest::Approx(-0.12).epsilon(1e-12));
    CHECK(k[1] == doctest::Approx(-0.12).epsilon(1e-12));
}

TEST_CASE("tall cap jets reverse the foot direction") {
    TallCapShape m(1);
    for (double u : {0.0, 0.3, 0.6}) {
        SurfaceJet j = surface_jet(m, pt(u));
        CHECK(j.foot[0] == doctest::Approx(-u + 2 * u * u * u).epsilon(1e-12));
    }
    SurfaceJet j0 = surface_jet(m, pt(0.0));
    CHECK(j0.phi_hess(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(j0.normal_len == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(principal_curvatures(j0)[0] == doctest::Approx(-2.0).epsilon(1e-12));

    TallCapShape m2(2);
    VecXd k = principal_curvatures(surface_jet(m2, pt(0.3, 0.1)));
    CHECK(k[0] <= k[1]);
    CHECK(k[1] < 0.0);
}

TEST_CASE("jet fields differentiate the half squared distance") {
    HemisphereShape hs(2.0, 2);
    EllipseArchShape ar(5.0, 3.0, 2);
    TallCapShape tc(2);
    const SurfaceModel* models[] = {&hs, &ar, &tc};
    VecXd pts[] = {pt(0.7, -0.4), pt(1.9, 2.2), pt(0.25, -0.45)};
    for (int i = 0; i < 3; ++i) {
        const SurfaceModel& m = *models[i];
        const VecXd& s = pts[i];
        SurfaceJet j = surface_jet(m, s);
        auto phi = [&](const VecXd& q) { return phi_of(m, q); };
        CHECK((fd_grad(phi, s, 1e-5) - j.foot).norm() <= 1e-7);
        CHECK((fd_hess(phi, s, 1e-4) - j.phi_hess).norm() <= 1e-5);
        auto hgt = [&](const VecXd& q) { return m.height(q); };
        CHECK((fd_grad(hgt, s, 1e-5) - j.dg).norm() <= 1e-7);
        CHECK(j.speed == doctest::Approx(std::sqrt(1 + j.dg.squaredNorm())).epsilon(1e-14));
        CHECK(j.normal.norm() == doctest::Approx(1.0).epsilon(1e-13));
        Eigen::SelfAdjointEigenSolver<MatXd> es(j.metric - MatXd::Identity(2, 2));
        CHECK(es.eigenvalues()[0] >= -1e-14);
    }
}

TEST_CASE("shifted jets differentiate the distance to a moved center") {
    HemisphereShape hs(1.0, 1);
    SurfaceJet j = surface_jet(hs, pt(0.0));
    ShiftedJet sh = shifted_jet(j, pt(0.0), 0.4);
    CHECK(sh.grad.norm() <= 1e-13);
    CHECK(sh.hess(0, 0) == doctest::Approx(0.4).epsilon(1e-12));

    TallCapShape tc(1);
    ShiftedJet st = shifted_jet(surface_jet(tc, pt(0.0)), pt(0.0), 0.4);
    CHECK(st.hess(0, 0) == doctest::Approx(-0.2).epsilon(1e-12));

    EllipseArchShape ar(5.0, 3.0, 2);
    VecXd s = pt(1.1, -0.6), a = pt(0.3, -0.2);
    double b = 0.4;
    ShiftedJet sj = shifted_jet(surface_jet(ar, s), a, b);
    auto psi = [&](const VecXd& q) { return shifted_of(ar, q, a, b); };
    CHECK((fd_grad(psi, s, 1e-5) - sj.grad).norm() <= 1e-7);
    CHECK((fd_hess(psi, s, 1e-4) - sj.hess).norm() <= 1e-5);

    EllipseArchShape a1(5.0, 3.0, 1);
    SurfaceJet rim = surface_jet(a1, pt(4.9));
    CHECK_THROWS_AS(shifted_jet(rim, pt(0.0), 0.7), std::domain_error);
}

TEST_CASE("paraboloid transform flattens geodesic spheres to planes") {
    VecXd x = pt(0.0, 1.0);
    VecXd y = poincare_forward(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-15));

    for (const VecXd& p : {pt(0.3, 0.7), pt(-1.4, 2.2), pt(0.0, 0.01)}) {
        VecXd back = poincare_inverse(poincare_forward(p));
        CHECK((back - p).norm() <= 1e-14);
    }
    for (const VecXd& q : {pt(0.5, 1.0), pt(-2.0, 2.5)}) {
        VecXd fwd = poincare_forward(poincare_inverse(q));
        CHECK((fwd - q).norm() <= 1e-14);
    }

    const double a = 0.7, r = 2.0;
    for (double u = -1.2; u <= 2.6; u += 0.37) {
        double v2 = r * r - (u - a) * (u - a);
        if (v2 <= 1e-4) continue;
        VecXd q = poincare_forward(pt(u, std::sqrt(v2)));
        CHECK(q[1] == doctest::Approx(u * a + 0.5 * (r * r - a * a)).epsilon(1e-12));
    }

    VecXd c = pt(0.4, -0.8);
    const double rho = 1.5;
    for (double th = 0.3; th < 3.0; th += 0.45) {
        VecXd w = pt(std::cos(1.1), std::sin(1.1));
        VecXd uv(3);
        uv.head(2) = c + rho * std::cos(th) * w;
        uv[2] = rho * std::sin(th);
        VecXd q = poincare_forward(uv);
        double want = q.head(2).dot(c) + 0.5 * (rho * rho - c.squaredNorm());
        CHECK(q[2] == doctest::Approx(want).epsilon(1e-12));
    }

    CHECK_THROWS_AS(poincare_forward(pt(1.0, 0.0)), std::domain_error);
    CHECK_THROWS_AS(poincare_inverse(pt(2.0, 1.0)), std::domain_error);
}

TEST_CASE("low discrepancy samples are deterministic and interior") {
    CHECK(halton(0, 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(halton(1, 2) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(halton(2, 2) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(halton(3, 2) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(halton(0, 3) == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(halton(1, 3) == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(halton(2, 3) == doctest::Approx(1.0 / 9).epsilon(1e-15));
    for (long i = 0; i < 200; ++i) {
        for (int b : {2, 3, 5}) {
            double v = halton(i, b);
            CHECK(v >= 0.0);
            CHECK(v < 1.0);
        }
    }

    HemisphereShape m(1.0, 2);
    auto pts1 = sample_domain(m, 60, 0.15);
    auto pts2 = sample_domain(m, 60, 0.15);
    REQUIRE(pts1.size() == 60);
    REQUIRE(pts2.size() == 60);
    CHECK(pts1[0].norm() == 0.0);
    for (size_t i = 0; i < pts1.size(); ++i) {
        CHECK((pts1[i] - pts2[i]).norm() == 0.0);
        CHECK(m.in_domain(pts1[i], 0.15 - 1e-12));
    }
    for (size_t i = 1; i < 10; ++i)
        for (size_t k = 0; k < i; ++k) CHECK((pts1[i] - pts1[k]).norm() > 0.0);
}

TEST_CASE("fitted graph surface tracks the arch it was solved from") {
    const double h = 0.1;
    Grid g = Grid::centered(2, h, {6.4, 4.0});
    MeasureSpec mu = ellipse_focal_measure(g.base_grid(), 5.0, 3.0);
    SolverConfig cfg;
    cfg.tol = 1e-9;
    PotentialSolution sol = solve_partial_balayage(mu, g, cfg);
    REQUIRE(sol.converged);
    DomainGraph graph = extract_domain(sol);
    GraphSurface gs(graph);
    EllipseArchShape arch(5.0, 3.0, 1);

    CHECK(gs.rim_clearance() == doctest::Approx(4 * h).epsilon(1e-12));
    CHECK(gs.max_height() == doctest::Approx(3.0).epsilon(0.01));
    double eh = 0, eg = 0, e2 = 0, ih = 0, ig = 0, i2 = 0;
    for (double x = -4.4; x <= 4.41; x += 0.2) {
        VecXd s = pt(x);
        double dh = std::abs(gs.height(s) - arch.height(s));
        double dg = (gs.height_grad(s) - arch.height_grad(s)).norm();
        double d2 = (gs.height_hess(s) - arch.height_hess(s)).norm();
        eh = std::max(eh, dh);
        eg = std::max(eg, dg);
        e2 = std::max(e2, d2);
        if (std::abs(x) <= 3.5) {
            ih = std::max(ih, dh);
            ig = std::max(ig, dg);
            i2 = std::max(i2, d2);
        }
    }
    CHECK(eh <= 0.03);
    CHECK(eg <= 0.15);
    CHECK(e2 <= 0.4);
    CHECK(ih <= 0.01);
    CHECK(ig <= 0.05);
    CHECK(i2 <= 0.1);

    CHECK(gs.in_domain(pt(0.0), 0.4));
    CHECK(gs.in_domain(pt(4.2), 0.4));
    CHECK(!gs.in_domain(pt(4.9), 0.4));
    CHECK_THROWS_AS(gs.height(pt(7.0)), std::out_of_range);
    CHECK_THROWS_AS(gs.height(pt(-6.0)), std::out_of_range);

    auto pts = sample_domain(gs, 40, 0.0);
    REQUIRE(pts.size() == 40);
    for (const VecXd& s : pts) CHECK(gs.in_domain(s, gs.rim_clearance() - 1e-12));

    SurfaceJet j = surface_jet(gs, pt(1.0));
    SurfaceJet je = surface_jet(arch, pt(1.0));
    CHECK(std::abs(j.phi - je.phi) <= 0.05);
    CHECK(std::abs(j.phi_hess(0, 0) - 0.64) <= 0.2);
}

TEST_CASE("flat graphs carry zero curvature") {
    std::array<int, 3> dims{31, 1, 1};
    std::array<double, 3> hh{0.1, 1.0, 1.0};
    std::array<double, 3> org{-1.5, 0.0, 0.0};
    Grid base(1, dims, hh, org);
    DomainGraph graph;
    graph.base = base;
    graph.g = ScalarField(base);
    graph.in_d.assign(static_cast<size_t>(base.size()), 0);
    for (int i = 0; i < base.dims(0); ++i) {
        if (std::abs(base.coord(0, i)) > 0.7) continue;
        graph.in_d[static_cast<size_t>(base.flat(i))] = 1;
        graph.g(i) = 0.8;
    }
    GraphSurface gs(graph);
    CHECK(gs.max_height() == doctest::Approx(0.8).epsilon(1e-14));
    SurfaceJet j = surface_jet(gs, pt(0.0));
    CHECK(j.g == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(j.dg.norm() <= 1e-9);
    CHECK(j.d2g.norm() <= 1e-8);
    CHECK((j.phi_hess - MatXd::Identity(1, 1)).norm() <= 1e-8);
    CHECK(std::abs(principal_curvatures(j)[0]) <= 1e-8);
}

TEST_CASE("jets outside the domain are refused") {
    HemisphereShape m(1.0, 2);
    CHECK_THROWS_AS(surface_jet(m, pt(0.8, 0.8)), std::domain_error);
    EllipseArchShape a1(5.0, 3.0, 1);
    CHECK_THROWS_AS(surface_jet(a1, pt(5.0)), std::domain_error);
}
