#pragma once

#include <stdexcept>

namespace meanref {

/// Uniform partition of [0, T] into N steps (N + 1 nodes t_i = i*T/N).
class TimeGrid {
public:
    TimeGrid(double horizon, int steps) : T_(horizon), N_(steps) {
        if (!(horizon > 0.0))
            throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (steps < 1)
            throw std::invalid_argument("TimeGrid: need at least one step");
        h_ = horizon / steps;
    }

    double horizon() const { return T_; }
    int steps() const { return N_; }
    int node_count() const { return N_ + 1; }
    double spacing() const { return h_; }

    /// The last node is exactly T regardless of rounding in i*h.
    double node(int i) const { return i == N_ ? T_ : i * h_; }

    bool contains(double t) const { return t >= 0.0 && t <= T_; }

    /// Index of the step interval containing t, clamped to [0, N-1].
    int interval(double t) const {
        int i = static_cast<int>(t / h_);
        if (i < 0) i = 0;
        if (i > N_ - 1) i = N_ - 1;
        return i;
    }

    bool operator==(const TimeGrid& other) const {
        return T_ == other.T_ && N_ == other.N_;
    }

private:
    double T_;
    int N_;
    double h_;
};

}  // namespace meanref
