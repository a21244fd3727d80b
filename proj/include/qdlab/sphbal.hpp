#pragma once

#include <vector>

#include "qdlab/measure.hpp"

namespace qdlab {

// Density of classical balayage of a hyperplane measure onto the sphere
// |x - a| = R, sampled on a latitude-longitude grid. The density depends on
// the horizontal coordinates x' only, so mirrored latitudes carry equal
// values.
struct SphereDensity {
    int ambient_dim = 3;
    Vec center = Vec::Zero();  // on the hyperplane
    double radius = 0;
    std::vector<double> theta;  // n=3: colatitudes; n=2: circle angles
    std::vector<double> phi;    // n=3 only: longitudes
    Eigen::ArrayXXd beta;       // theta.size() x max(phi.size(), 1)
    double quadrature_mass = 0;  // integral of beta over the sphere
    double measure_mass = 0;     // mass of the swept measure
};

struct SphereBalOptions {
    int n_theta = 48;
    int n_phi = 96;
};

// Balayage density at a single horizontal point. Here and below, xprime is
// the horizontal offset from the center a (size n-1).
double poisson_balayage_at(const MeasureSpec& mu, const Vec& a, double R,
                           const Eigen::VectorXd& xprime);

SphereDensity poisson_balayage_density(const MeasureSpec& mu, const Vec& a, double R,
                                       const SphereBalOptions& opt = {});

// Newtonian potential of the measure evaluated on the upper hemisphere point
// above x' (logarithmic kernel when the ambient dimension is 2).
double hemisphere_potential(const MeasureSpec& mu, const Vec& a, double R,
                            const Eigen::VectorXd& xprime);

// Closed-form second derivative of the hemisphere-restricted potential along
// a horizontal direction, as a quadrature over the measure.
double hemisphere_second_derivative(const MeasureSpec& mu, const Vec& a, double R,
                                    const Eigen::VectorXd& xprime,
                                    const Eigen::VectorXd& direction);

struct HemisphereConvexity {
    double min_second_difference = 0;  // over sampled points and directions
    double integrand_identity_err = 0;  // FD second difference vs quadrature form
    int samples = 0;
};

HemisphereConvexity hemisphere_potential_convexity(const MeasureSpec& mu, const Vec& a,
                                                   double R, int dir_samples = 8);

}  // namespace qdlab
