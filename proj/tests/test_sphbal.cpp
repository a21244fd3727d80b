#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qdlab/analytic.hpp"
#include "qdlab/sphbal.hpp"

using namespace qdlab;

TEST_CASE("point masses at the center sweep to uniform densities") {
    Grid base3 = Grid::centered(2, 0.1, {1.0, 1.0});
    Vec a(0.3, -0.2, 0.0);
    PointMass p;
    p.x = a;
    p.mass = 2.5;
    MeasureSpec mu = make_point_measure(3, base3, {p});
    SphereDensity sd = poisson_balayage_density(mu, a, 1.7);
    CHECK(sd.ambient_dim == 3);
    CHECK(sd.radius == doctest::Approx(1.7));
    CHECK(sd.theta.size() == 48);
    CHECK(sd.phi.size() == 96);
    REQUIRE(sd.beta.rows() == 48);
    REQUIRE(sd.beta.cols() == 96);
    const double want = 2.5 / (4 * M_PI * 1.7 * 1.7);
    CHECK(sd.beta.maxCoeff() - sd.beta.minCoeff() <= 1e-10 * want);
    CHECK(std::abs(sd.beta(0, 0) - want) <= 1e-12);
    CHECK(sd.measure_mass == doctest::Approx(2.5));
    CHECK(std::abs(sd.quadrature_mass - sd.measure_mass) <= 1e-10 * 2.5);

    Grid base2 = Grid::centered(1, 0.1, {1.0});
    PointMass q;
    q.mass = 1.3;
    MeasureSpec mu2 = make_point_measure(2, base2, {q});
    SphereDensity sc = poisson_balayage_density(mu2, Vec::Zero(), 0.8);
    CHECK(sc.phi.empty());
    REQUIRE(sc.beta.cols() == 1);
    const double want2 = 1.3 / (2 * M_PI * 0.8);
    CHECK(sc.beta.maxCoeff() - sc.beta.minCoeff() <= 1e-10 * want2);
    CHECK(std::abs(sc.beta(0, 0) - want2) <= 1e-12);
    CHECK(std::abs(sc.quadrature_mass - 1.3) <= 1e-10);
}

TEST_CASE("off center sweeps conserve mass and see horizontal position only") {
    Grid base = Grid::centered(2, 0.1, {1.0, 1.0});
    PointMass p;
    p.x = Vec(0.6, 0.2, 0.0);
    p.mass = 1.0;
    MeasureSpec mu = make_point_measure(3, base, {p});
    const double R = 1.5;
    SphereDensity sd = poisson_balayage_density(mu, Vec::Zero(), R);
    CHECK(std::abs(sd.quadrature_mass - 1.0) <= 1e-10);

    const int mt = static_cast<int>(sd.theta.size());
    const int mp = static_cast<int>(sd.phi.size());
    double mirror = 0;
    for (int i = 0; i < mt; ++i)
        for (int j = 0; j < mp; ++j)
            mirror = std::max(mirror, std::abs(sd.beta(i, j) - sd.beta(mt - 1 - i, j)));
    CHECK(mirror <= 1e-12);

    Eigen::VectorXd y(2);
    y << 0.6, 0.2;
    for (auto [i, j] : {std::pair{10, 7}, std::pair{30, 50}}) {
        Eigen::VectorXd xp(2);
        xp << R * std::sin(sd.theta[i]) * std::cos(sd.phi[j]),
            R * std::sin(sd.theta[i]) * std::sin(sd.phi[j]);
        double qd = y.squaredNorm() - 2 * xp.dot(y) + R * R;
        double hand = (R * R - y.squaredNorm()) / (4 * M_PI * R * std::pow(qd, 1.5));
        CHECK(sd.beta(i, j) == doctest::Approx(hand).epsilon(1e-12));
    }

    Grid base2 = Grid::centered(1, 0.1, {1.0});
    PointMass q;
    q.x = Vec(0.3, 0.0, 0.0);
    q.mass = 2.0;
    MeasureSpec mu2 = make_point_measure(2, base2, {q});
    const double r2 = 0.8;
    SphereDensity s2 = poisson_balayage_density(mu2, Vec::Zero(), r2);
    CHECK(std::abs(s2.quadrature_mass - 2.0) <= 1e-10);
    for (int i : {3, 17}) {
        double qd = 0.09 - 2 * r2 * std::cos(s2.theta[i]) * 0.3 + r2 * r2;
        double hand = 2.0 * (r2 * r2 - 0.09) / (2 * M_PI * r2 * qd);
        CHECK(s2.beta(i, 0) == doctest::Approx(hand).epsilon(1e-12));
    }
}

TEST_CASE("hyperplane potentials stay convex on the hemisphere") {
    Grid base = Grid::centered(1, 0.05, {4.5});
    MeasureSpec mu = ellipse_focal_measure(base, 5.0, 3.0);
    HemisphereConvexity hc = hemisphere_potential_convexity(mu, Vec::Zero(), 6.0);
    CHECK(hc.samples == 7);
    CHECK(hc.min_second_difference >= -1e-8);
    CHECK(hc.min_second_difference >= 0.01);
    CHECK(hc.integrand_identity_err <= 1e-5);

    Eigen::VectorXd xp(1), xm(1);
    xp << 2.3;
    xm << -2.3;
    CHECK(std::abs(hemisphere_potential(mu, Vec::Zero(), 6.0, xp) -
                   hemisphere_potential(mu, Vec::Zero(), 6.0, xm)) <= 1e-12);

    Grid base2 = Grid::centered(2, 0.05, {1.3, 1.3});
    MeasureSpec disk = const_disk_measure(base2, 1.0, 1.0);
    HemisphereConvexity h3 = hemisphere_potential_convexity(disk, Vec::Zero(), 2.0);
    CHECK(h3.samples == 200);
    CHECK(h3.min_second_difference >= 0.001);
    CHECK(h3.integrand_identity_err <= 1e-5);
}

TEST_CASE("closed form second derivatives match finite differences") {
    Grid base = Grid::centered(1, 0.05, {4.5});
    MeasureSpec mu = ellipse_focal_measure(base, 5.0, 3.0);
    Eigen::VectorXd x(1), e(1);
    x << 2.3;
    e << 1.0;
    double closed = hemisphere_second_derivative(mu, Vec::Zero(), 6.0, x, e);
    CHECK(closed > 0);
    const double s = 0.01;
    Eigen::VectorXd xp = x, xm = x;
    xp[0] += s;
    xm[0] -= s;
    double fd = (hemisphere_potential(mu, Vec::Zero(), 6.0, xp) -
                 2 * hemisphere_potential(mu, Vec::Zero(), 6.0, x) +
                 hemisphere_potential(mu, Vec::Zero(), 6.0, xm)) /
                (s * s);
    CHECK(fd == doctest::Approx(closed).epsilon(1e-4));
}

TEST_CASE("invalid sweeps are rejected") {
    Grid base = Grid::centered(1, 0.1, {1.0});
    PointMass p;
    p.mass = 1.0;
    MeasureSpec mu = make_point_measure(2, base, {p});
    CHECK_THROWS_AS(poisson_balayage_density(mu, Vec::Zero(), -1.0), std::invalid_argument);
    CHECK_THROWS_AS(poisson_balayage_density(mu, Vec(0.0, 0.3, 0.0), 2.0),
                    std::invalid_argument);

    PointMass far;
    far.x = Vec(6.0, 0.0, 0.0);
    far.mass = 1.0;
    MeasureSpec rim = make_point_measure(2, base, {far});
    CHECK_THROWS_AS(poisson_balayage_density(rim, Vec::Zero(), 6.0), std::runtime_error);
    CHECK_THROWS_AS(hemisphere_potential_convexity(rim, Vec::Zero(), 6.0),
                    std::runtime_error);

    Grid base2 = Grid::centered(2, 0.1, {1.3, 1.3});
    MeasureSpec disk = const_disk_measure(base2, 1.0, 1.0);
    CHECK_THROWS_AS(poisson_balayage_density(disk, Vec::Zero(), 0.95), std::runtime_error);

    Eigen::VectorXd out(1);
    out << 6.0;
    MeasureSpec ok = ellipse_focal_measure(Grid::centered(1, 0.1, {4.5}), 5.0, 3.0);
    CHECK_THROWS_AS(hemisphere_potential(ok, Vec::Zero(), 6.0, out), std::invalid_argument);
}
