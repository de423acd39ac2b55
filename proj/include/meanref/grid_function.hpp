#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "meanref/time_grid.hpp"

namespace meanref {

/// A function sampled at the nodes of a TimeGrid and interpolated linearly
/// in between. Value is double, Eigen::VectorXd or Eigen::MatrixXd.
template <class Value>
class GridFunction {
public:
    GridFunction(TimeGrid grid, std::vector<Value> values)
        : grid_(grid), values_(std::move(values)) {
        if (static_cast<int>(values_.size()) != grid_.node_count())
            throw std::invalid_argument("GridFunction: need one value per node");
    }

    static GridFunction constant(const TimeGrid& grid, const Value& v) {
        return GridFunction(grid, std::vector<Value>(grid.node_count(), v));
    }

    template <class Fn>
    static GridFunction sampled(const TimeGrid& grid, Fn&& fn) {
        std::vector<Value> v;
        v.reserve(grid.node_count());
        for (int i = 0; i <= grid.steps(); ++i) v.push_back(fn(grid.node(i)));
        return GridFunction(grid, std::move(v));
    }

    const TimeGrid& grid() const { return grid_; }
    int node_count() const { return grid_.node_count(); }
    const Value& operator[](int i) const { return values_[i]; }
    Value& operator[](int i) { return values_[i]; }
    const std::vector<Value>& values() const { return values_; }

    /// Piecewise-linear evaluation; exact at nodes.
    Value operator()(double t) const {
        if (!grid_.contains(t))
            throw std::out_of_range("GridFunction: t outside [0, T]");
        int i = grid_.interval(t);
        if (t == grid_.node(i)) return values_[i];
        if (t == grid_.node(i + 1)) return values_[i + 1];
        double theta = (t - grid_.node(i)) / grid_.spacing();
        return (1.0 - theta) * values_[i] + theta * values_[i + 1];
    }

    /// Resample onto another grid over the same horizon by linear
    /// interpolation (exact when the sampled function is affine in t).
    GridFunction resample(const TimeGrid& target) const {
        if (target.horizon() != grid_.horizon())
            throw std::invalid_argument("GridFunction: resample must keep the horizon");
        if (target == grid_) return *this;
        return sampled(target, [this](double t) { return (*this)(t); });
    }

private:
    TimeGrid grid_;
    std::vector<Value> values_;
};

using ScalarGrid = GridFunction<double>;
using VectorGrid = GridFunction<Eigen::VectorXd>;
using MatrixGrid = GridFunction<Eigen::MatrixXd>;

inline double min_value(const ScalarGrid& f) {
    return *std::min_element(f.values().begin(), f.values().end());
}

inline double max_value(const ScalarGrid& f) {
    return *std::max_element(f.values().begin(), f.values().end());
}

inline double sup_norm(const ScalarGrid& f) {
    double s = 0.0;
    for (double v : f.values()) s = std::max(s, std::abs(v));
    return s;
}

inline double sup_distance(const ScalarGrid& f, const ScalarGrid& g) {
    if (!(f.grid() == g.grid()))
        throw std::invalid_argument("sup_distance: grids differ");
    double s = 0.0;
    for (int i = 0; i < f.node_count(); ++i) s = std::max(s, std::abs(f[i] - g[i]));
    return s;
}

/// Trapezoid quadrature of the nodal values over [0, T].
inline double trapezoid(const ScalarGrid& f) {
    const double h = f.grid().spacing();
    double s = 0.0;
    for (int i = 0; i + 1 < f.node_count(); ++i) s += 0.5 * h * (f[i] + f[i + 1]);
    return s;
}

}  // namespace meanref
