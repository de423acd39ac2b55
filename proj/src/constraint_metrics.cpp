#include "meanref/constraint_metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace meanref {

double distance_to_cone(const ScalarGrid& X) {
    double d = 0.0;
    for (double v : X.values()) d = std::max(d, -v);
    return std::max(d, 0.0);
}

ComplementarityResidual complementarity_residual(const ScalarGrid& m,
                                                 const ScalarGrid& L,
                                                 const Compensator& mu) {
    if (!(m.grid() == L.grid()) || !(m.grid() == mu.grid()))
        throw std::invalid_argument("complementarity_residual: grids differ");

    ComplementarityResidual r{0.0, 0.0};
    // Atom at the origin pairs with the slack at t = 0.
    r.integral = (m[0] - L[0]) * mu.atom_at_origin();
    for (int i = 0; i + 1 < m.node_count(); ++i) {
        const double slack_mid = 0.5 * ((m[i] - L[i]) + (m[i + 1] - L[i + 1]));
        r.integral += slack_mid * mu.increment(i);
    }
    for (int i = 0; i < m.node_count(); ++i)
        r.feasibility_defect = std::max(r.feasibility_defect, L[i] - m[i]);
    r.feasibility_defect = std::max(r.feasibility_defect, 0.0);
    return r;
}

}  // namespace meanref
