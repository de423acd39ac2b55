#pragma once

#include "meanref/grid_function.hpp"

namespace meanref {

/// Nonnegative measure on [0, T] represented by its cumulative mass
/// function on a grid: c(t) = mu([0, t]). A jump of c across a node is an
/// atom; in particular c(0) > 0 encodes an atom at t = 0.
class Compensator {
public:
    explicit Compensator(ScalarGrid cumulative);

    static Compensator zero(const TimeGrid& grid);

    /// Cumulative function of a nodal density (trapezoid antiderivative).
    /// Requires density >= 0 at every node.
    static Compensator from_density(const ScalarGrid& density);

    const TimeGrid& grid() const { return c_.grid(); }
    const ScalarGrid& cumulative() const { return c_; }

    double mass() const { return c_[c_.node_count() - 1]; }
    double atom_at_origin() const { return c_[0]; }

    /// Mass of the cell (t_i, t_{i+1}].
    double increment(int i) const { return c_[i + 1] - c_[i]; }

    /// The cadlag normalization mu_t = mu([0,t]) - mu([0,T]); vanishes at T.
    double cadlag(double t) const { return c_(t) - mass(); }

    /// Largest single-cell mass divided by the spacing; large values flag
    /// mass concentrating in O(h) cells.
    double peak_density() const;

private:
    ScalarGrid c_;
};

}  // namespace meanref
