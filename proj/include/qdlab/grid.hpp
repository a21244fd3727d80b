#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qdlab {

using Vec = Eigen::Vector3d;

// Node-centered uniform grid in 1, 2 or 3 dimensions.  Axis dim-1 is the
// vertical axis when the grid is used as an ambient grid over the base
// hyperplane; flat indexing runs fastest along the last axis, so a vertical
// column of an ambient grid is contiguous in memory.
class Grid {
public:
    Grid() = default;

    Grid(int dim, std::array<int, 3> dims, std::array<double, 3> spacing,
         std::array<double, 3> origin)
        : dim_(dim), dims_(dims), h_(spacing), origin_(origin) {
        if (dim < 1 || dim > 3) throw std::invalid_argument("grid: dim must be 1, 2 or 3");
        for (int d = 0; d < dim; ++d) {
            if (dims_[d] < 3) throw std::invalid_argument("grid: need at least 3 nodes per axis");
            if (!(h_[d] > 0.0)) throw std::invalid_argument("grid: spacing must be positive");
        }
        for (int d = dim; d < 3; ++d) { dims_[d] = 1; h_[d] = 1.0; origin_[d] = 0.0; }
    }

    // Symmetric box [-half[d], half[d]] with spacing h; extents are rounded
    // outward to a whole number of cells.
    static Grid centered(int dim, double h, std::array<double, 3> half) {
        std::array<int, 3> dims{1, 1, 1};
        std::array<double, 3> hh{1.0, 1.0, 1.0}, org{0.0, 0.0, 0.0};
        for (int d = 0; d < dim; ++d) {
            int m = static_cast<int>(std::ceil(half[d] / h - 1e-12));
            m = std::max(m, 1);
            dims[d] = 2 * m + 1;
            hh[d] = h;
            org[d] = -m * h;
        }
        return Grid(dim, dims, hh, org);
    }

    int dim() const { return dim_; }
    const std::array<int, 3>& dims() const { return dims_; }
    int dims(int d) const { return dims_[d]; }
    double spacing(int d) const { return h_[d]; }
    double origin(int d) const { return origin_[d]; }
    int vertical_axis() const { return dim_ - 1; }

    std::int64_t size() const {
        return static_cast<std::int64_t>(dims_[0]) * dims_[1] * dims_[2];
    }

    std::int64_t flat(int i, int j = 0, int k = 0) const {
        return (static_cast<std::int64_t>(i) * dims_[1] + j) * dims_[2] + k;
    }

    std::array<int, 3> unflat(std::int64_t id) const {
        std::array<int, 3> out;
        out[2] = static_cast<int>(id % dims_[2]); id /= dims_[2];
        out[1] = static_cast<int>(id % dims_[1]); id /= dims_[1];
        out[0] = static_cast<int>(id);
        return out;
    }

    double coord(int d, int i) const { return origin_[d] + h_[d] * i; }

    Vec node(int i, int j = 0, int k = 0) const {
        return Vec(coord(0, i), coord(1, j), coord(2, k));
    }

    // Index of the node layer sitting exactly on {x_d = 0}; throws when the
    // plane does not coincide with a node layer.
    int zero_layer(int d) const {
        double t = -origin_[d] / h_[d];
        int k = static_cast<int>(std::llround(t));
        if (std::abs(t - k) > 1e-9 || k < 0 || k >= dims_[d])
            throw std::runtime_error("grid: plane x_" + std::to_string(d + 1) +
                                     " = 0 is not on a node layer");
        return k;
    }

    bool has_zero_layer(int d) const {
        double t = -origin_[d] / h_[d];
        int k = static_cast<int>(std::llround(t));
        return std::abs(t - k) <= 1e-9 && k >= 0 && k < dims_[d];
    }

    // Nearest node to a point; throws when the point is outside the box.
    std::array<int, 3> nearest(const Vec& x) const {
        std::array<int, 3> id{0, 0, 0};
        for (int d = 0; d < dim_; ++d) {
            double t = (x[d] - origin_[d]) / h_[d];
            if (t < -1e-9 || t > dims_[d] - 1 + 1e-9)
                throw std::out_of_range("grid: point outside box");
            id[d] = static_cast<int>(std::llround(t));
            id[d] = std::min(std::max(id[d], 0), dims_[d] - 1);
        }
        return id;
    }

    bool contains(const Vec& x, double pad = 0.0) const {
        for (int d = 0; d < dim_; ++d) {
            if (x[d] < origin_[d] + pad || x[d] > coord(d, dims_[d] - 1) - pad) return false;
        }
        return true;
    }

    bool same_layout(const Grid& o) const {
        if (dim_ != o.dim_) return false;
        for (int d = 0; d < dim_; ++d) {
            if (dims_[d] != o.dims_[d]) return false;
            if (std::abs(h_[d] - o.h_[d]) > 1e-12) return false;
            if (std::abs(origin_[d] - o.origin_[d]) > 1e-12) return false;
        }
        return true;
    }

    // Horizontal sub-grid (drops the vertical axis); only valid for dim >= 2.
    Grid base_grid() const {
        if (dim_ < 2) throw std::logic_error("grid: no base grid for a 1-d grid");
        std::array<int, 3> d{dims_[0], 1, 1};
        std::array<double, 3> hh{h_[0], 1.0, 1.0}, org{origin_[0], 0.0, 0.0};
        if (dim_ == 3) { d[1] = dims_[1]; hh[1] = h_[1]; org[1] = origin_[1]; }
        return Grid(dim_ - 1, d, hh, org);
    }

private:
    int dim_ = 2;
    std::array<int, 3> dims_{3, 3, 1};
    std::array<double, 3> h_{1.0, 1.0, 1.0};
    std::array<double, 3> origin_{0.0, 0.0, 0.0};
};

}  // namespace qdlab
