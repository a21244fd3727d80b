#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "qdlab/analytic.hpp"

using namespace qdlab;
using cplx = std::complex<double>;

TEST_CASE("planar point-mass potential vanishes smoothly at its rim") {
    const double R = 2.0;
    CHECK(disk_potential_2d(R, R, 0.0) == 0.0);
    CHECK(disk_potential_2d(R, 0.0, -R) == 0.0);
    CHECK(disk_potential_2d(R, 3.0, 1.0) == 0.0);

    double u1 = disk_potential_2d(R, 1.0, 0.0);
    CHECK(u1 == doctest::Approx(0.25 * (1 - 4) - 2.0 * std::log(0.5)).epsilon(1e-12));
    CHECK(u1 > 0);

    double d = 1e-5;
    double slope = (disk_potential_2d(R, R - d, 0.0) - disk_potential_2d(R, R - 2 * d, 0.0)) / d;
    CHECK(std::abs(slope) < 1e-4);

    CHECK(disk_potential_2d(R, 0.3, 0.4) ==
          doctest::Approx(disk_potential_2d(R, -0.5, 0.0)).epsilon(1e-12));
}

TEST_CASE("spatial point-mass potential vanishes smoothly at its rim") {
    const double R = 1.5;
    CHECK(ball_potential_3d(R, Vec(R, 0, 0)) == 0.0);
    CHECK(ball_potential_3d(R, Vec(0, 2, 0)) == 0.0);

    double u = ball_potential_3d(R, Vec(0.75, 0, 0));
    CHECK(u == doctest::Approx(0.75 * 0.75 / 6 + R * R * R / (3 * 0.75) - 0.5 * R * R)
                   .epsilon(1e-12));
    CHECK(u > 0);

    double d = 1e-5;
    double slope =
        (ball_potential_3d(R, Vec(R - d, 0, 0)) - ball_potential_3d(R, Vec(R - 2 * d, 0, 0))) / d;
    CHECK(std::abs(slope) < 1e-4);
}

TEST_CASE("focal chord density of the 5-3 ellipse") {
    EllipsePotential ep(5.0, 3.0);
    CHECK(ep.c() == doctest::Approx(4.0));
    CHECK(ep.density(0.0) == doctest::Approx(7.5));
    CHECK(ep.density(3.0) == doctest::Approx(2 * 5 * 3 / 16.0 * std::sqrt(7.0)));
    CHECK(ep.density(4.0) == 0.0);
    CHECK(ep.density(-4.5) == 0.0);
    CHECK_THROWS(EllipsePotential(3.0, 5.0));
}

TEST_CASE("cut square root branch") {
    EllipsePotential ep(5.0, 3.0);
    CHECK(ep.sqrt_branch({5.0, 0.0}).real() == doctest::Approx(3.0));
    CHECK(ep.sqrt_branch({-5.0, 0.0}).real() == doctest::Approx(-3.0));
    cplx mid = ep.sqrt_branch({0.0, 0.0});
    CHECK(mid.real() == doctest::Approx(0.0));
    CHECK(mid.imag() == doctest::Approx(4.0));

    for (cplx z : {cplx(1.2, 0.7), cplx(-3.0, 2.0), cplx(4.5, 0.1), cplx(0.0, 5.0)}) {
        cplx w = ep.sqrt_branch(z);
        CHECK(std::abs(w * w - (z * z - 16.0)) < 1e-9);
        CHECK(w.imag() >= -1e-12);
    }
    cplx far = ep.sqrt_branch({0.0, 1000.0});
    CHECK(std::abs(far - cplx(0.0, 1000.0)) < 0.01);
}

TEST_CASE("ellipse boundary is fixed by the reflection map") {
    EllipsePotential ep(5.0, 3.0);
    for (int k = 1; k < 64; ++k) {
        double th = 3.14159265358979323846 * k / 64;
        cplx z(5.0 * std::cos(th), 3.0 * std::sin(th));
        cplx s = ep.schwarz(z);
        CHECK(std::abs(s - std::conj(z)) < 1e-9);
    }
}

TEST_CASE("reflection map trace on the chord equals minus the density") {
    EllipsePotential ep(5.0, 3.0);
    for (double x : {0.0, 1.0, -2.0, 3.0, 3.9}) {
        CHECK(ep.schwarz({x, 0.0}).imag() == doctest::Approx(-ep.density(x)).epsilon(1e-12));
        CHECK(ep.schwarz({x, 1e-7}).imag() == doctest::Approx(-ep.density(x)).epsilon(1e-3));
    }
    CHECK(ep.schwarz({4.5, 0.0}).imag() == doctest::Approx(0.0));
}

TEST_CASE("ellipse potential derivatives match the reflection map") {
    EllipsePotential ep(5.0, 3.0);
    const double d = 1e-5;
    for (auto [x, y] : {std::pair{1.0, 0.8}, {-2.5, 1.2}, {3.5, 0.5}, {0.0, 2.0}}) {
        REQUIRE(ep.inside(x, y));
        double ux = (ep.value(x + d, y) - ep.value(x - d, y)) / (2 * d);
        double uy = (ep.value(x, y + d) - ep.value(x, y - d)) / (2 * d);
        cplx z(x, y);
        cplx lhs = 2.0 * cplx(ux, -uy);
        cplx rhs = std::conj(z) - ep.schwarz(z);
        CHECK(std::abs(lhs - rhs) < 1e-5);

        double r2 = x * x + y * y;
        double rho = 0.5 * r2 - (x * ux + y * uy);
        double omega = x * uy - y * ux;
        cplx hz = ep.half_zs(z);
        CHECK(hz.real() == doctest::Approx(rho).epsilon(1e-4));
        CHECK(std::abs(hz.imag() - omega) < 1e-4);
    }
}

TEST_CASE("ellipse potential vanishes outside and is positive and even inside") {
    EllipsePotential ep(5.0, 3.0);
    CHECK(ep.value(5.0, 0.0) == 0.0);
    CHECK(ep.value(0.0, 3.0) == 0.0);
    CHECK(ep.value(6.0, 2.0) == 0.0);
    CHECK(ep.value(0.0, 0.0) > 0.1);
    CHECK(ep.value(4.0, 1.0) > 0.0);
    for (auto [x, y] : {std::pair{0.7, 1.3}, {-3.0, 0.4}, {2.0, 2.0}})
        CHECK(ep.value(x, y) == doctest::Approx(ep.value(x, -y)).epsilon(1e-13));

    double d = 1e-4;
    double u_edge = ep.value(5.0 - d, 0.0);
    CHECK(u_edge < 1e-6);
    CHECK(u_edge >= 0.0);
}

TEST_CASE("injected fields are packaged like converged output") {
    Grid g = Grid::centered(2, 0.1, {3.2, 3.2});
    PotentialSolution disk = inject_disk_2d(2.0, g, 1e-4);
    CHECK(disk.converged);
    CHECK(disk.measure.total_mass() ==
          doctest::Approx(3.14159265358979323846 * 4.0).epsilon(1e-12));
    int mid_i = g.zero_layer(0), mid_j = g.zero_layer(1);
    CHECK(disk.u(mid_i + 5, mid_j) ==
          doctest::Approx(disk_potential_2d(2.0, 0.5, 0.0)).epsilon(1e-12));
    CHECK(disk.omega_mask[g.flat(mid_i, mid_j + 10)] == 1);
    CHECK(disk.omega_mask[g.flat(mid_i, mid_j + 25)] == 0);

    Grid ge = Grid::centered(2, 0.2, {6.4, 4.0});
    EllipsePotential ep(5.0, 3.0);
    PotentialSolution ell = inject_ellipse_2d(ep, ge, 1e-4);
    int zi = ge.zero_layer(0), zj = ge.zero_layer(1);
    CHECK(ell.u(zi, zj + 5) == doctest::Approx(ep.value(0.0, 1.0)).epsilon(1e-12));
    CHECK(ell.rhs(zi, zj) < 1.0);
    CHECK(ell.rhs(zi, zj + 1) == doctest::Approx(1.0));
    CHECK(ell.rhs(zi + static_cast<int>(std::lround(4.4 / 0.2)), zj) == doctest::Approx(1.0));
}
