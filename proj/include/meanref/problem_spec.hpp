#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "meanref/grid_function.hpp"

namespace meanref {

/// Controlled scalar SDE
///     dX = (A X + B^T u) dt + (C X + D u)^T dW,   X_0 = x0,
/// with running cost (1/2)(Q X^2 + u^T R u), terminal cost (1/2) G X_T^2 and
/// the mean path constraint E[X_t] >= L_t. All coefficients are
/// deterministic functions of time sampled on one grid.
struct ProblemSpec {
    TimeGrid grid;
    int control_dim;  // l
    int noise_dim;    // m

    ScalarGrid A;  // drift state gain
    VectorGrid B;  // drift control gain, in R^l
    VectorGrid C;  // diffusion state gain, in R^m
    MatrixGrid D;  // diffusion control gain, in R^{m x l}
    ScalarGrid Q;  // state cost weight, >= 0
    MatrixGrid R;  // control cost weight, symmetric, >= delta I
    ScalarGrid L;  // constraint floor

    double G;   // terminal cost weight, >= 0
    double x0;  // initial state

    /// All coefficients re-sampled onto a grid with N steps (same horizon).
    ProblemSpec resample(int steps) const;
};

/// Constant-coefficient problem with general dimensions.
ProblemSpec make_spec(double T, int steps, const Eigen::VectorXd& B,
                      const Eigen::VectorXd& C, const Eigen::MatrixXd& D,
                      const Eigen::MatrixXd& R, double A, double Q, double G,
                      double L, double x0);

/// Constant-coefficient problem with l = m = 1.
ProblemSpec make_scalar_spec(double T, int steps, double A, double B, double C,
                             double D, double Q, double R, double G, double L,
                             double x0);

struct AssumptionCheck {
    std::string name;
    bool pass;
    double margin;     // worst-case slack; negative when the check fails
    std::string note;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    bool all_pass() const;
    std::string summary() const;
};

/// Checks the standing assumptions on one grid: R - delta I psd, Q >= 0,
/// G >= 0 and B^T B >= eps. Throws std::invalid_argument on structural
/// defects (nonsymmetric R, dimension mismatches among B, C, D, R).
ValidationReport validate_spec(const ProblemSpec& spec, double delta, double eps);

}  // namespace meanref
