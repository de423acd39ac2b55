#pragma once

#include <Eigen/Core>
#include <vector>

#include "meanref/montecarlo.hpp"
#include "meanref/problem_spec.hpp"

namespace meanref {

/// Desk-scale brute-force optimizer for the penalized problem on a binary
/// tree: a single Brownian driver with increments +-sqrt(h), one control
/// vector per tree node (adapted), expectations as exact node-probability
/// sums. Controls are flattened level by level; level i holds 2^i nodes.
struct TreeProblem {
    int steps;        // <= 12
    int control_dim;  // l
    double h, x, G, penalty_n;
    std::vector<double> A, C, Q, L;    // coefficients at the tree times
    std::vector<Eigen::VectorXd> B, D; // D is the single diffusion row
    std::vector<Eigen::MatrixXd> R;

    /// Samples the spec at t_i = i T / steps. Requires a single Brownian
    /// driver and steps <= 12.
    static TreeProblem build(const ProblemSpec& spec, int steps, double penalty_n);

    int control_count() const { return ((1 << steps) - 1) * control_dim; }
    int level_offset(int level) const { return ((1 << level) - 1) * control_dim; }
};

/// J_n = (1/2) sum_i h (Q_i E[X_i^2] + E[u_i^T R_i u_i]) + (1/2) G E[X_N^2]
///     + (n/2) sum_i h ((E[X_i] - L_i)_-)^2, left-endpoint sums, exact
/// expectations over the tree.
double tree_objective(const TreeProblem& tp, const Eigen::VectorXd& controls);

struct TreeGradient {
    Eigen::VectorXd grad;
    double root_adjoint;  // dJ/dx at fixed controls; the discrete Y_0
};

/// Exact gradient by reverse accumulation through the tree. The penalty
/// contributes -n h (E[X_i] - L_i)_- dE[X_i]/du (d/dz (1/2)(z_-)^2 = -z_-).
TreeGradient tree_gradient(const TreeProblem& tp, const Eigen::VectorXd& controls);

struct TreeMinimizeOptions {
    int max_iter = 50000;
    double grad_tol = 1e-8;  // stop at |grad|_2 <= grad_tol * (1 + |J|)
    bool barzilai_borwein = true;  // initial trial step; backtracking either way
};

struct TreeMinimizeResult {
    Eigen::VectorXd controls;
    double objective;
    int iterations;
    double grad_norm;
    double root_adjoint;
    bool converged;
};

/// Gradient descent with backtracking line search; the problem is convex
/// (quadratic plus a convex penalty of affine maps), so the stationary
/// point is the global optimum.
TreeMinimizeResult tree_minimize(const TreeProblem& tp, const Eigen::VectorXd& init,
                                 const TreeMinimizeOptions& opts = {});

/// E[X_i] for i = 0..steps under the given controls.
std::vector<double> tree_mean_path(const TreeProblem& tp, const Eigen::VectorXd& controls);

/// Controls induced by an affine feedback policy on the tree states
/// (the projection of a solver policy onto the tree's control space).
Eigen::VectorXd tree_controls_from_policy(const TreeProblem& tp, const FeedbackPolicy& policy);

}  // namespace meanref
