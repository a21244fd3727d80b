#include "qdlab/sphbal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdlab {

namespace {

double sphere_area(int n) { return n == 3 ? 4 * M_PI : 2 * M_PI; }

// Visit (horizontal offset from the center, mass) for every atom of the
// measure: density nodes weighted by their cell volume, then point masses.
template <class F>
void for_each_atom(const MeasureSpec& mu, const Vec& a, F&& fn) {
    const Grid& base = mu.base;
    const int nb = base.dim();
    double cell = 1;
    for (int d = 0; d < nb; ++d) cell *= base.spacing(d);
    for (std::int64_t id = 0; id < base.size(); ++id) {
        double f = mu.density.at(id);
        if (f <= 0) continue;
        auto c = base.unflat(id);
        Eigen::VectorXd y(nb);
        for (int d = 0; d < nb; ++d) y[d] = base.coord(d, c[d]) - a[d];
        fn(y, f * cell);
    }
    for (const auto& p : mu.points) {
        Eigen::VectorXd y(nb);
        for (int d = 0; d < nb; ++d) y[d] = p.x[d] - a[d];
        fn(y, p.mass);
    }
}

void check_support(const MeasureSpec& mu, const Vec& a, double R) {
    if (R <= 0) throw std::invalid_argument("sphere balayage: radius must be positive");
    if (std::abs(a[mu.ambient_dim - 1]) > 1e-12)
        throw std::invalid_argument("sphere balayage: center must lie on the hyperplane");
    double margin = 1e-7 * R;
    bool bad = false;
    for_each_atom(mu, a, [&](const Eigen::VectorXd& y, double) {
        if (y.norm() >= R - margin) bad = true;
    });
    if (bad) throw std::runtime_error("sphere balayage: measure support touches the sphere");
}

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
    x.assign(m, 0);
    w.assign(m, 0);
    for (int i = 0; i < m; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (m + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int j = 0; j < m; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
            }
            double dp = m * (t * p0 - p1) / (t * t - 1);
            double dt = p0 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        double p0 = 1, p1 = 0;
        for (int j = 0; j < m; ++j) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
        }
        double dp = m * (t * p0 - p1) / (t * t - 1);
        x[i] = t;
        w[i] = 2 / ((1 - t * t) * dp * dp);
    }
}

}  // namespace

double poisson_balayage_at(const MeasureSpec& mu, const Vec& a, double R,
                           const Eigen::VectorXd& xprime) {
    const int n = mu.ambient_dim;
    double acc = 0;
    for_each_atom(mu, a, [&](const Eigen::VectorXd& y, double m) {
        double q = y.squaredNorm() - 2 * xprime.dot(y) + R * R;
        acc += m * (R * R - y.squaredNorm()) / std::pow(q, 0.5 * n);
    });
    return acc / (sphere_area(n) * R);
}

SphereDensity poisson_balayage_density(const MeasureSpec& mu, const Vec& a, double R,
                                       const SphereBalOptions& opt) {
    mu.validate();
    check_support(mu, a, R);
    const int n = mu.ambient_dim;
    if (n != 2 && n != 3) throw std::invalid_argument("sphere balayage: ambient dimension 2 or 3");

    SphereDensity out;
    out.ambient_dim = n;
    out.center = a;
    out.radius = R;
    out.measure_mass = mu.total_mass();

    if (n == 2) {
        int m = std::max(8, opt.n_theta);
        out.theta.resize(m);
        out.beta.resize(m, 1);
        Eigen::VectorXd xp(1);
        for (int i = 0; i < m; ++i) {
            double t = 2 * M_PI * i / m;
            out.theta[i] = t;
            xp[0] = R * std::cos(t);
            out.beta(i, 0) = poisson_balayage_at(mu, a, R, xp);
        }
        double mass = 0;
        for (int i = 0; i < m; ++i) mass += out.beta(i, 0);
        out.quadrature_mass = mass * (2 * M_PI / m) * R;
        return out;
    }

    int mt = std::max(8, opt.n_theta), mp = std::max(8, opt.n_phi);
    std::vector<double> gx, gw;
    gauss_legendre(mt, gx, gw);
    out.theta.resize(mt);
    out.phi.resize(mp);
    out.beta.resize(mt, mp);
    for (int j = 0; j < mp; ++j) out.phi[j] = 2 * M_PI * j / mp;
    Eigen::VectorXd xp(2);
    double mass = 0;
    for (int i = 0; i < mt; ++i) {
        out.theta[i] = std::acos(gx[i]);
        double s = std::sqrt(std::max(0.0, 1 - gx[i] * gx[i]));
        for (int j = 0; j < mp; ++j) {
            xp[0] = R * s * std::cos(out.phi[j]);
            xp[1] = R * s * std::sin(out.phi[j]);
            out.beta(i, j) = poisson_balayage_at(mu, a, R, xp);
            mass += gw[i] * out.beta(i, j);
        }
    }
    out.quadrature_mass = mass * (2 * M_PI / mp) * R * R;
    return out;
}

double hemisphere_potential(const MeasureSpec& mu, const Vec& a, double R,
                            const Eigen::VectorXd& xprime) {
    const int n = mu.ambient_dim;
    if (xprime.norm() >= R)
        throw std::invalid_argument("hemisphere potential: sample outside the open disk");
    double acc = 0;
    for_each_atom(mu, a, [&](const Eigen::VectorXd& y, double m) {
        double q = y.squaredNorm() - 2 * xprime.dot(y) + R * R;
        if (n == 2)
            acc += -m * 0.5 * std::log(q);
        else
            acc += m * std::pow(q, -0.5 * (n - 2));
    });
    if (n == 2) return acc / (2 * M_PI);
    return acc / ((n - 2) * sphere_area(n));
}

double hemisphere_second_derivative(const MeasureSpec& mu, const Vec& a, double R,
                                    const Eigen::VectorXd& xprime,
                                    const Eigen::VectorXd& direction) {
    const int n = mu.ambient_dim;
    Eigen::VectorXd e = direction.normalized();
    double acc = 0;
    for_each_atom(mu, a, [&](const Eigen::VectorXd& y, double m) {
        double q = y.squaredNorm() - 2 * xprime.dot(y) + R * R;
        double ye = e.dot(y);
        if (n == 2)
            acc += m * ye * ye / (q * q);
        else
            acc += m * n * ye * ye * std::pow(q, -0.5 * (n + 2));
    });
    if (n == 2) return acc / M_PI;
    return acc / sphere_area(n);
}

HemisphereConvexity hemisphere_potential_convexity(const MeasureSpec& mu, const Vec& a,
                                                   double R, int dir_samples) {
    mu.validate();
    check_support(mu, a, R);
    const int n = mu.ambient_dim;
    const int nb = n - 1;

    std::vector<Eigen::VectorXd> dirs;
    if (nb == 1) {
        dirs.push_back(Eigen::VectorXd::Ones(1));
    } else {
        int nd = std::max(2, dir_samples);
        for (int k = 0; k < nd; ++k) {
            double t = M_PI * k / nd;
            Eigen::VectorXd e(2);
            e << std::cos(t), std::sin(t);
            dirs.push_back(e);
        }
    }

    std::vector<Eigen::VectorXd> pts;
    const double shells[] = {0.0, 0.25, 0.5, 0.7};
    for (double r : shells) {
        if (nb == 1) {
            Eigen::VectorXd p(1);
            p << r * R;
            pts.push_back(p);
            if (r > 0) {
                p << -r * R;
                pts.push_back(p);
            }
        } else {
            int na = (r == 0) ? 1 : 8;
            for (int k = 0; k < na; ++k) {
                double t = 2 * M_PI * k / na;
                Eigen::VectorXd p(2);
                p << r * R * std::cos(t), r * R * std::sin(t);
                pts.push_back(p);
            }
        }
    }

    HemisphereConvexity out;
    out.min_second_difference = std::numeric_limits<double>::infinity();
    const double s = 0.05 * R;
    for (const auto& p : pts)
        for (const auto& e : dirs) {
            if ((p + s * e).norm() >= R || (p - s * e).norm() >= R) continue;
            double d2 = (hemisphere_potential(mu, a, R, p + s * e) -
                         2 * hemisphere_potential(mu, a, R, p) +
                         hemisphere_potential(mu, a, R, p - s * e)) /
                        (s * s);
            out.min_second_difference = std::min(out.min_second_difference, d2);
            ++out.samples;
        }
    if (out.samples == 0) out.min_second_difference = 0;

    {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(nb);
        p[0] = 0.3 * R;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(nb);
        e[0] = 1;
        double fs = 1e-3 * R;
        double fd = (hemisphere_potential(mu, a, R, p + fs * e) -
                     2 * hemisphere_potential(mu, a, R, p) +
                     hemisphere_potential(mu, a, R, p - fs * e)) /
                    (fs * fs);
        double cf = hemisphere_second_derivative(mu, a, R, p, e);
        out.integrand_identity_err = std::abs(fd - cf) / std::max(std::abs(cf), 1e-12);
    }
    return out;
}

}  // namespace qdlab
