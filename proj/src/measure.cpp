#include "qdlab/measure.hpp"

namespace qdlab {

double MeasureSpec::total_mass() const {
    double cell = 1.0;
    for (int d = 0; d < base.dim(); ++d) cell *= base.spacing(d);
    double m = density.data().sum() * cell;
    for (const auto& p : points) m += p.mass;
    return m;
}

bool MeasureSpec::support_box(Vec& lo, Vec& hi) const {
    bool any = false;
    lo = Vec::Constant(1e300);
    hi = Vec::Constant(-1e300);
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            if (density(i, j) <= 0.0) continue;
            any = true;
            Vec x = base.node(i, j);
            for (int d = 0; d < base.dim(); ++d) {
                lo[d] = std::min(lo[d], x[d]);
                hi[d] = std::max(hi[d], x[d]);
            }
        }
    for (const auto& p : points) {
        any = true;
        for (int d = 0; d < base.dim(); ++d) {
            lo[d] = std::min(lo[d], p.x[d]);
            hi[d] = std::max(hi[d], p.x[d]);
        }
    }
    return any;
}

void MeasureSpec::validate() const {
    if (ambient_dim < 2 || ambient_dim > 3)
        throw std::invalid_argument("measure: ambient dimension must be 2 or 3");
    if (base.dim() != ambient_dim - 1)
        throw std::invalid_argument("measure: base grid dimension must be ambient - 1");
    if (!base.same_layout(density.grid()))
        throw std::invalid_argument("measure: density table does not match base grid");
    for (std::int64_t id = 0; id < base.size(); ++id)
        if (density.at(id) < 0.0) throw std::invalid_argument("measure: density must be nonnegative");
    for (const auto& p : points) {
        if (p.mass <= 0.0) throw std::invalid_argument("measure: point masses must be positive");
        if (std::abs(p.x[ambient_dim - 1]) > 1e-12)
            throw std::invalid_argument("measure: point mass off the base hyperplane");
    }
}

MeasureSpec make_density_measure(int ambient_dim, const Grid& base, const ScalarField& f) {
    MeasureSpec m;
    m.ambient_dim = ambient_dim;
    m.base = base;
    m.density = f;
    m.validate();
    return m;
}

MeasureSpec make_point_measure(int ambient_dim, const Grid& base, const std::vector<PointMass>& pts) {
    MeasureSpec m;
    m.ambient_dim = ambient_dim;
    m.base = base;
    m.density = ScalarField(base);
    m.points = pts;
    m.validate();
    return m;
}

MeasureSpec ellipse_focal_measure(const Grid& base, double a, double b) {
    if (base.dim() != 1) throw std::invalid_argument("ellipse focal measure needs a 1-d base");
    if (!(a > b && b > 0)) throw std::invalid_argument("ellipse focal measure needs a > b > 0");
    const double c2 = a * a - b * b;
    ScalarField f(base);
    for (int i = 0; i < base.dims(0); ++i) {
        double x = base.coord(0, i);
        double s = c2 - x * x;
        f(i) = s > 0.0 ? 2.0 * a * b / c2 * std::sqrt(s) : 0.0;
    }
    return make_density_measure(2, base, f);
}

MeasureSpec center_point_measure(int ambient_dim, const Grid& base, double mass) {
    PointMass p;
    p.x = Vec::Zero();
    p.mass = mass;
    return make_point_measure(ambient_dim, base, {p});
}

MeasureSpec const_disk_measure(const Grid& base, double value, double radius) {
    ScalarField f(base);
    for (int i = 0; i < base.dims(0); ++i)
        for (int j = 0; j < base.dims(1); ++j) {
            Vec x = base.node(i, j);
            double r2 = 0.0;
            for (int d = 0; d < base.dim(); ++d) r2 += x[d] * x[d];
            f(i, j) = r2 < radius * radius ? value : 0.0;
        }
    return make_density_measure(base.dim() + 1, base, f);
}

}  // namespace qdlab
