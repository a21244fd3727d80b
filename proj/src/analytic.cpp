#include "qdlab/analytic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdlab {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Principal log pushed onto the branch whose argument lies in (-pi/2, 3pi/2),
// continuous on the closed upper half plane including the negative real axis.
std::complex<double> log_up(std::complex<double> zeta) {
    double th = std::atan2(zeta.imag(), zeta.real());
    if (th < -0.5 * kPi) th += 2.0 * kPi;
    return {std::log(std::abs(zeta)), th};
}

}  // namespace

double disk_potential_2d(double R, double x, double y, double r_floor) {
    double r = std::hypot(x, y);
    if (r >= R) return 0.0;
    r = std::max(r, r_floor);
    if (r <= 0.0) return std::numeric_limits<double>::infinity();
    return 0.25 * (r * r - R * R) - 0.5 * R * R * std::log(r / R);
}

double ball_potential_3d(double R, const Vec& x, double r_floor) {
    double r = x.norm();
    if (r >= R) return 0.0;
    r = std::max(r, r_floor);
    if (r <= 0.0) return std::numeric_limits<double>::infinity();
    return r * r / 6.0 + R * R * R / (3.0 * r) - 0.5 * R * R;
}

EllipsePotential::EllipsePotential(double a, double b) : a_(a), b_(b) {
    if (!(a > b && b > 0)) throw std::invalid_argument("ellipse needs a > b > 0");
    c_ = std::sqrt(a * a - b * b);
    C_ = 0.0;
    C_ = 0.5 * big_f(std::complex<double>(a_, 0.0)).real() - 0.25 * a_ * a_;
}

double EllipsePotential::density(double x) const {
    if (std::abs(x) >= c_) return 0.0;
    return 2.0 * a_ * b_ / (c_ * c_) * std::sqrt(c_ * c_ - x * x);
}

bool EllipsePotential::inside(double x, double y) const {
    return x * x / (a_ * a_) + y * y / (b_ * b_) < 1.0;
}

std::complex<double> EllipsePotential::sqrt_branch(std::complex<double> z) const {
    double x = z.real(), y = z.imag();
    if (y == 0.0) {
        if (x >= c_) return {std::sqrt(x * x - c_ * c_), 0.0};
        if (x <= -c_) return {-std::sqrt(x * x - c_ * c_), 0.0};
        return {0.0, std::sqrt(c_ * c_ - x * x)};
    }
    std::complex<double> q = 1.0 - (c_ / z) * (c_ / z);
    return z * std::sqrt(q);
}

std::complex<double> EllipsePotential::big_g(std::complex<double> z) const {
    std::complex<double> w = sqrt_branch(z);
    return 0.5 * (z * w - c_ * c_ * log_up(z + w));
}

std::complex<double> EllipsePotential::big_f(std::complex<double> z) const {
    return (0.5 * (a_ * a_ + b_ * b_) * z * z - 2.0 * a_ * b_ * big_g(z)) / (c_ * c_);
}

std::complex<double> EllipsePotential::schwarz(std::complex<double> z) const {
    return ((a_ * a_ + b_ * b_) * z - 2.0 * a_ * b_ * sqrt_branch(z)) / (c_ * c_);
}

std::complex<double> EllipsePotential::half_zs(std::complex<double> z) const {
    return 0.5 * z * schwarz(z);
}

double EllipsePotential::value(double x, double y) const {
    if (!inside(x, y)) return 0.0;
    std::complex<double> z(x, std::abs(y));
    double u = 0.25 * (x * x + y * y) - 0.5 * big_f(z).real() + C_;
    return std::max(u, 0.0);
}

PotentialSolution inject_potential(const MeasureSpec& mu, const Grid& grid,
                                   const std::function<double(const Vec&)>& field,
                                   double eps_height) {
    mu.validate();
    if (mu.ambient_dim != grid.dim())
        throw std::invalid_argument("grid dimension does not match the measure");
    PotentialSolution sol;
    sol.grid = grid;
    sol.measure = mu;
    sol.u = ScalarField(grid);
    for (std::int64_t id = 0; id < grid.size(); ++id) {
        std::array<int, 3> c = grid.unflat(id);
        sol.u.at(id) = field(grid.node(c[0], c[1], c[2]));
    }
    sol.rhs = deposit_measure(mu, grid);
    sol.eps_height = eps_height;
    sol.tol = 0.0;
    sol.final_residual = 0.0;
    sol.converged = true;
    sol.omega_mask.assign(static_cast<size_t>(grid.size()), 0);
    for (std::int64_t id = 0; id < grid.size(); ++id)
        if (sol.u.at(id) > eps_height) sol.omega_mask[static_cast<size_t>(id)] = 1;
    for (std::int64_t id = 0; id < grid.size(); ++id)
        if (sol.rhs.at(id) < 1.0) sol.omega_mask[static_cast<size_t>(id)] = 1;
    return sol;
}

PotentialSolution inject_disk_2d(double R, const Grid& grid, double eps_height) {
    Grid base = grid.base_grid();
    MeasureSpec mu = center_point_measure(2, base, kPi * R * R);
    double floor = 0.25 * grid.spacing(0);
    return inject_potential(mu, grid, [R, floor](const Vec& x) {
        return disk_potential_2d(R, x[0], x[1], floor);
    }, eps_height);
}

PotentialSolution inject_ball_3d(double R, const Grid& grid, double eps_height) {
    Grid base = grid.base_grid();
    MeasureSpec mu = center_point_measure(3, base, 4.0 / 3.0 * kPi * R * R * R);
    double floor = 0.25 * grid.spacing(0);
    return inject_potential(mu, grid, [R, floor](const Vec& x) {
        return ball_potential_3d(R, x, floor);
    }, eps_height);
}

PotentialSolution inject_ellipse_2d(const EllipsePotential& ep, const Grid& grid,
                                    double eps_height) {
    Grid base = grid.base_grid();
    ScalarField f(base);
    for (std::int64_t b = 0; b < base.size(); ++b)
        f.at(b) = ep.density(base.coord(0, base.unflat(b)[0]));
    MeasureSpec mu = make_density_measure(2, base, f);
    return inject_potential(mu, grid, [&ep](const Vec& x) {
        return ep.value(x[0], x[1]);
    }, eps_height);
}

}  // namespace qdlab
