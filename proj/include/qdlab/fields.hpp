#pragma once

#include <vector>

#include "qdlab/grid.hpp"

namespace qdlab {

// Dense node data over a Grid.  Values are kept in one Eigen array per
// component so expression-style whole-field arithmetic stays cheap.
template <typename Scalar>
class ScalarFieldT {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    ScalarFieldT() = default;
    explicit ScalarFieldT(const Grid& g, Scalar fill = Scalar(0))
        : grid_(g), v_(Array::Constant(g.size(), fill)) {}

    const Grid& grid() const { return grid_; }
    Array& data() { return v_; }
    const Array& data() const { return v_; }

    Scalar& operator()(int i, int j = 0, int k = 0) { return v_[grid_.flat(i, j, k)]; }
    Scalar operator()(int i, int j = 0, int k = 0) const { return v_[grid_.flat(i, j, k)]; }
    Scalar& at(std::int64_t id) { return v_[id]; }
    Scalar at(std::int64_t id) const { return v_[id]; }

private:
    Grid grid_;
    Array v_;
};

template <typename Scalar>
class VectorFieldT {
public:
    VectorFieldT() = default;
    VectorFieldT(const Grid& g, int comps) : grid_(g), c_(comps) {
        for (auto& a : c_) a.setZero(g.size());
    }

    const Grid& grid() const { return grid_; }
    int components() const { return static_cast<int>(c_.size()); }
    auto& comp(int c) { return c_[c]; }
    const auto& comp(int c) const { return c_[c]; }
    Scalar& at(int c, std::int64_t id) { return c_[c][id]; }
    Scalar at(int c, std::int64_t id) const { return c_[c][id]; }

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> value(std::int64_t id) const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(components());
        for (int c = 0; c < components(); ++c) out[c] = c_[c][id];
        return out;
    }

private:
    Grid grid_;
    std::vector<typename ScalarFieldT<Scalar>::Array> c_;
};

// Symmetric rank-2 node data; unique entries are stored once in row-major
// upper-triangle order.
template <typename Scalar>
class TensorFieldT {
public:
    TensorFieldT() = default;
    TensorFieldT(const Grid& g, int dim)
        : grid_(g), dim_(dim), c_(dim * (dim + 1) / 2) {
        for (auto& a : c_) a.setZero(g.size());
    }

    const Grid& grid() const { return grid_; }
    int dim() const { return dim_; }
    int packed(int a, int b) const {
        if (a > b) std::swap(a, b);
        return a * dim_ - a * (a - 1) / 2 + (b - a);
    }
    Scalar& at(int a, int b, std::int64_t id) { return c_[packed(a, b)][id]; }
    Scalar at(int a, int b, std::int64_t id) const { return c_[packed(a, b)][id]; }
    auto& comp(int a, int b) { return c_[packed(a, b)]; }
    const auto& comp(int a, int b) const { return c_[packed(a, b)]; }

    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> value(std::int64_t id) const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(dim_, dim_);
        for (int a = 0; a < dim_; ++a)
            for (int b = a; b < dim_; ++b) out(a, b) = out(b, a) = at(a, b, id);
        return out;
    }

private:
    Grid grid_;
    int dim_ = 0;
    std::vector<typename ScalarFieldT<Scalar>::Array> c_;
};

using ScalarField = ScalarFieldT<double>;
using VectorField = VectorFieldT<double>;
using TensorField = TensorFieldT<double>;
using Mask = std::vector<std::uint8_t>;

}  // namespace qdlab
