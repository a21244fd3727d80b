#pragma once

#include "qdlab/fields.hpp"

namespace qdlab {

inline std::int64_t stride_of(const Grid& g, int axis) {
    switch (axis) {
        case 0: return static_cast<std::int64_t>(g.dims(1)) * g.dims(2);
        case 1: return g.dims(2);
        default: return 1;
    }
}

// Second-order first derivative along one axis: central stencils inside,
// one-sided three-point stencils on the faces.
template <typename Scalar>
void derivative_axis(const ScalarFieldT<Scalar>& f, int axis, ScalarFieldT<Scalar>& out) {
    const Grid& g = f.grid();
    const std::int64_t s = stride_of(g, axis);
    const int m = g.dims(axis);
    const Scalar ih = Scalar(1) / Scalar(g.spacing(axis));
    const auto& a = f.data();
    auto& o = out.data();
    const std::int64_t total = g.size();
    for (std::int64_t id = 0; id < total; ++id) {
        int pos;
        switch (axis) {
            case 0: pos = static_cast<int>(id / (g.dims(1) * static_cast<std::int64_t>(g.dims(2)))); break;
            case 1: pos = static_cast<int>((id / g.dims(2)) % g.dims(1)); break;
            default: pos = static_cast<int>(id % g.dims(2));
        }
        if (pos == 0)
            o[id] = (Scalar(-3) * a[id] + Scalar(4) * a[id + s] - a[id + 2 * s]) * Scalar(0.5) * ih;
        else if (pos == m - 1)
            o[id] = (Scalar(3) * a[id] - Scalar(4) * a[id - s] + a[id - 2 * s]) * Scalar(0.5) * ih;
        else
            o[id] = (a[id + s] - a[id - s]) * Scalar(0.5) * ih;
    }
}

template <typename Scalar>
VectorFieldT<Scalar> gradient(const ScalarFieldT<Scalar>& f) {
    const Grid& g = f.grid();
    VectorFieldT<Scalar> out(g, g.dim());
    ScalarFieldT<Scalar> tmp(g);
    for (int d = 0; d < g.dim(); ++d) {
        derivative_axis(f, d, tmp);
        out.comp(d) = tmp.data();
    }
    return out;
}

// Pure second derivative along one axis; face nodes fall back to a one-sided
// four-point stencil and are first-order there (callers should stay interior).
template <typename Scalar>
void second_derivative_axis(const ScalarFieldT<Scalar>& f, int axis, ScalarFieldT<Scalar>& out) {
    const Grid& g = f.grid();
    const std::int64_t s = stride_of(g, axis);
    const int m = g.dims(axis);
    const Scalar ih2 = Scalar(1) / Scalar(g.spacing(axis) * g.spacing(axis));
    const auto& a = f.data();
    auto& o = out.data();
    const std::int64_t total = g.size();
    for (std::int64_t id = 0; id < total; ++id) {
        int pos;
        switch (axis) {
            case 0: pos = static_cast<int>(id / (g.dims(1) * static_cast<std::int64_t>(g.dims(2)))); break;
            case 1: pos = static_cast<int>((id / g.dims(2)) % g.dims(1)); break;
            default: pos = static_cast<int>(id % g.dims(2));
        }
        if (pos == 0)
            o[id] = (Scalar(2) * a[id] - Scalar(5) * a[id + s] + Scalar(4) * a[id + 2 * s] - a[id + 3 * s]) * ih2;
        else if (pos == m - 1)
            o[id] = (Scalar(2) * a[id] - Scalar(5) * a[id - s] + Scalar(4) * a[id - 2 * s] - a[id - 3 * s]) * ih2;
        else
            o[id] = (a[id + s] - Scalar(2) * a[id] + a[id - s]) * ih2;
    }
}

template <typename Scalar>
ScalarFieldT<Scalar> laplacian(const ScalarFieldT<Scalar>& f) {
    const Grid& g = f.grid();
    ScalarFieldT<Scalar> out(g), tmp(g);
    for (int d = 0; d < g.dim(); ++d) {
        second_derivative_axis(f, d, tmp);
        out.data() += tmp.data();
    }
    return out;
}

template <typename Scalar>
TensorFieldT<Scalar> hessian_field(const ScalarFieldT<Scalar>& f) {
    const Grid& g = f.grid();
    TensorFieldT<Scalar> out(g, g.dim());
    ScalarFieldT<Scalar> tmp(g), tmp2(g);
    for (int a = 0; a < g.dim(); ++a) {
        second_derivative_axis(f, a, tmp);
        out.comp(a, a) = tmp.data();
        for (int b = a + 1; b < g.dim(); ++b) {
            derivative_axis(f, a, tmp);
            derivative_axis(tmp, b, tmp2);
            out.comp(a, b) = tmp2.data();
        }
    }
    return out;
}

// Multilinear interpolation; throws for points outside the box.
struct InterpStencil {
    std::int64_t ids[8];
    double wts[8];
    int count;
};

inline InterpStencil interp_stencil(const Grid& g, const Vec& x) {
    int base[3] = {0, 0, 0};
    double w[3] = {0.0, 0.0, 0.0};
    for (int d = 0; d < g.dim(); ++d) {
        double t = (x[d] - g.origin(d)) / g.spacing(d);
        if (t < -1e-9 || t > g.dims(d) - 1 + 1e-9)
            throw std::out_of_range("interpolate: point outside grid box");
        t = std::min(std::max(t, 0.0), static_cast<double>(g.dims(d) - 1));
        int i = static_cast<int>(std::floor(t));
        i = std::min(i, g.dims(d) - 2);
        base[d] = i;
        w[d] = t - i;
    }
    InterpStencil st;
    st.count = 1 << g.dim();
    for (int c = 0; c < st.count; ++c) {
        double wt = 1.0;
        int id[3] = {base[0], base[1], base[2]};
        for (int d = 0; d < g.dim(); ++d) {
            if (c & (1 << d)) { id[d] += 1; wt *= w[d]; }
            else wt *= (1.0 - w[d]);
        }
        st.ids[c] = g.flat(id[0], id[1], id[2]);
        st.wts[c] = wt;
    }
    return st;
}

template <typename Scalar>
Scalar interpolate(const ScalarFieldT<Scalar>& f, const InterpStencil& st) {
    Scalar acc = Scalar(0);
    for (int c = 0; c < st.count; ++c) acc += Scalar(st.wts[c]) * f.at(st.ids[c]);
    return acc;
}

template <typename Scalar>
Eigen::VectorXd interpolate(const VectorFieldT<Scalar>& f, const InterpStencil& st) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(f.components());
    for (int c = 0; c < st.count; ++c)
        for (int q = 0; q < f.components(); ++q) out[q] += st.wts[c] * f.comp(q)[st.ids[c]];
    return out;
}

template <typename Scalar>
Eigen::MatrixXd interpolate(const TensorFieldT<Scalar>& f, const InterpStencil& st) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(f.dim(), f.dim());
    for (int a = 0; a < f.dim(); ++a)
        for (int b = a; b < f.dim(); ++b) {
            double acc = 0.0;
            for (int c = 0; c < st.count; ++c) acc += st.wts[c] * f.comp(a, b)[st.ids[c]];
            out(a, b) = out(b, a) = acc;
        }
    return out;
}

template <typename Scalar>
Scalar interpolate(const ScalarFieldT<Scalar>& f, const Vec& x) {
    return interpolate(f, interp_stencil(f.grid(), x));
}

template <typename Scalar>
Eigen::VectorXd interpolate(const VectorFieldT<Scalar>& f, const Vec& x) {
    return interpolate(f, interp_stencil(f.grid(), x));
}

template <typename Scalar>
Eigen::MatrixXd interpolate(const TensorFieldT<Scalar>& f, const Vec& x) {
    return interpolate(f, interp_stencil(f.grid(), x));
}

// Mask utilities ------------------------------------------------------------

inline Mask erode(const Grid& g, const Mask& in, int rounds) {
    Mask cur = in;
    for (int r = 0; r < rounds; ++r) {
        Mask next = cur;
        for (int i = 0; i < g.dims(0); ++i)
            for (int j = 0; j < g.dims(1); ++j)
                for (int k = 0; k < g.dims(2); ++k) {
                    std::int64_t id = g.flat(i, j, k);
                    if (!cur[id]) continue;
                    bool keep = true;
                    int idx[3] = {i, j, k};
                    for (int d = 0; d < g.dim() && keep; ++d) {
                        for (int sgn = -1; sgn <= 1 && keep; sgn += 2) {
                            int nb = idx[d] + sgn;
                            if (nb < 0 || nb >= g.dims(d)) { keep = false; break; }
                            int q[3] = {i, j, k};
                            q[d] = nb;
                            if (!cur[g.flat(q[0], q[1], q[2])]) keep = false;
                        }
                    }
                    next[id] = keep ? 1 : 0;
                }
        cur.swap(next);
    }
    return cur;
}

}  // namespace qdlab
