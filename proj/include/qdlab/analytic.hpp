#pragma once

#include <complex>
#include <functional>

#include "qdlab/balayage.hpp"

namespace qdlab {

// Closed-form reference potentials.  Each vanishes outside its domain, is
// even in the vertical coordinate, and satisfies the unit Poisson equation
// inside, so injected copies behave like converged solver output.

// Planar point mass pi R^2 at the origin; the domain is the disk of radius R.
double disk_potential_2d(double R, double x, double y, double r_floor = 0.0);

// Spatial point mass (4/3) pi R^3 at the origin; the domain is the ball.
double ball_potential_3d(double R, const Vec& x, double r_floor = 0.0);

// Measure (2ab/c^2) sqrt(c^2 - x^2) dx on the focal segment [-c, c]; the
// domain is the ellipse x^2/a^2 + y^2/b^2 < 1 with c^2 = a^2 - b^2.
class EllipsePotential {
  public:
    EllipsePotential(double a, double b);
    double a() const { return a_; }
    double b() const { return b_; }
    double c() const { return c_; }
    double density(double x) const;
    bool inside(double x, double y) const;
    double value(double x, double y) const;
    // sqrt(z^2 - c^2) cut along [-c, c], asymptotic to z; closed upper half
    // plane only, real points inside the cut take the upper-edge value.
    std::complex<double> sqrt_branch(std::complex<double> z) const;
    std::complex<double> big_g(std::complex<double> z) const;
    std::complex<double> big_f(std::complex<double> z) const;
    std::complex<double> schwarz(std::complex<double> z) const;
    // z S(z) / 2, whose real and imaginary parts are the moment field pair.
    std::complex<double> half_zs(std::complex<double> z) const;
    double constant() const { return C_; }

  private:
    double a_, b_, c_, C_;
};

// Samples an analytic field onto a grid and packages it as solver output.
PotentialSolution inject_potential(const MeasureSpec& mu, const Grid& grid,
                                   const std::function<double(const Vec&)>& field,
                                   double eps_height);

// Ready-made injected configurations used across the test suite.
PotentialSolution inject_disk_2d(double R, const Grid& grid, double eps_height);
PotentialSolution inject_ball_3d(double R, const Grid& grid, double eps_height);
PotentialSolution inject_ellipse_2d(const EllipsePotential& ep, const Grid& grid,
                                    double eps_height);

}  // namespace qdlab
