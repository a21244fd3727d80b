#pragma once

#include <vector>

#include "qdlab/fields.hpp"

namespace qdlab {

struct PointMass {
    Vec x = Vec::Zero();  // must lie on the base hyperplane
    double mass = 0.0;
};

// Mass distribution carried by the hyperplane {x_n = 0}: a nonnegative density
// table on an (n-1)-dimensional grid plus optional point masses.
struct MeasureSpec {
    int ambient_dim = 2;
    Grid base;            // grid of dimension ambient_dim - 1
    ScalarField density;  // f >= 0 on base nodes
    std::vector<PointMass> points;

    // Mass as deposited on the grid: node-cell sums plus point masses.
    double total_mass() const;

    // Smallest/largest coordinate per base axis over {f > 0} and the points.
    // Returns false when the measure is empty.
    bool support_box(Vec& lo, Vec& hi) const;

    void validate() const;  // shapes, nonnegativity, points on the plane
};

MeasureSpec make_density_measure(int ambient_dim, const Grid& base, const ScalarField& f);
MeasureSpec make_point_measure(int ambient_dim, const Grid& base, const std::vector<PointMass>& pts);

// Named instances used across tests and the command line.
// Focal-chord density f(x) = (2ab/c^2) sqrt(c^2 - x^2), c^2 = a^2 - b^2:
// its grown domain is the ellipse with semi-axes a > b.
MeasureSpec ellipse_focal_measure(const Grid& base, double a, double b);
// Single point mass at the base origin.
MeasureSpec center_point_measure(int ambient_dim, const Grid& base, double mass);
// Constant density on a base ball of given radius.
MeasureSpec const_disk_measure(const Grid& base, double value, double radius);

}  // namespace qdlab
