#include "meanref/compensator.hpp"

#include <cmath>
#include <stdexcept>

namespace meanref {

Compensator::Compensator(ScalarGrid cumulative) : c_(std::move(cumulative)) {
    if (c_[0] < 0.0)
        throw std::invalid_argument("Compensator: cumulative mass must start >= 0");
    for (int i = 0; i + 1 < c_.node_count(); ++i) {
        if (!(c_[i + 1] >= c_[i]))
            throw std::invalid_argument("Compensator: cumulative mass must be nondecreasing");
    }
}

Compensator Compensator::zero(const TimeGrid& grid) {
    return Compensator(ScalarGrid::constant(grid, 0.0));
}

Compensator Compensator::from_density(const ScalarGrid& density) {
    const double h = density.grid().spacing();
    std::vector<double> c(density.node_count());
    c[0] = 0.0;
    for (int i = 0; i + 1 < density.node_count(); ++i) {
        if (density[i] < 0.0 || density[i + 1] < 0.0)
            throw std::invalid_argument("Compensator: density must be nonnegative");
        c[i + 1] = c[i] + 0.5 * h * (density[i] + density[i + 1]);
    }
    return Compensator(ScalarGrid(density.grid(), std::move(c)));
}

double Compensator::peak_density() const {
    double peak = 0.0;
    for (int i = 0; i + 1 < c_.node_count(); ++i)
        peak = std::max(peak, increment(i));
    return peak / c_.grid().spacing();
}

}  // namespace meanref
