#pragma once

#include "meanref/compensator.hpp"
#include "meanref/grid_function.hpp"

namespace meanref {

/// Sup-norm distance of a grid function to the cone of nonnegative grid
/// functions: d(X) = max_i max(-X_i, 0), the largest negative part.
double distance_to_cone(const ScalarGrid& X);

struct ComplementarityResidual {
    double integral;            // int (m - L) d(mu), midpoint-paired
    double feasibility_defect;  // max_i (L_i - m_i)_+
};

/// Slackness of the pair (mean path, compensator) against the floor L.
ComplementarityResidual complementarity_residual(const ScalarGrid& m,
                                                 const ScalarGrid& L,
                                                 const Compensator& mu);

}  // namespace meanref
