#pragma once

#include <Eigen/Core>

#include "meanref/problem_spec.hpp"

namespace meanref {

/// Decoupling field for the backward equation: with the ansatz
/// Y = P X + p the pair (Y, Z) collapses to the scalar backward ODE
///     P' = -(2 A P + |C|^2 P + Q - P^2 w^T S^-1 w),   P_T = G,
/// where w = B + D^T C and S = R + P D^T D, and the state feedback becomes
/// u = -K X - k with K = S^-1 w P.
struct RiccatiSolution {
    ScalarGrid P;  // decoupling field, >= 0
    VectorGrid K;  // feedback gain, in R^l
    MatrixGrid S;  // regularized control weight R + P D^T D, >= delta I
};

/// Integrates the Riccati equation backward from P_T = G with the classical
/// 4-stage one-step method; coefficients are evaluated at stage times by
/// linear interpolation. Throws on loss of positive definiteness of S or on
/// non-finite values.
RiccatiSolution solve_riccati(const ProblemSpec& spec);

/// Piecewise-linear interpolation of the gain; throws for t outside [0, T].
Eigen::VectorXd gain_at(const RiccatiSolution& sol, double t);

}  // namespace meanref
