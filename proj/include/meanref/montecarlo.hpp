#pragma once

#include <cstdint>
#include <vector>

#include "meanref/obstacle.hpp"
#include "meanref/problem_spec.hpp"
#include "meanref/riccati.hpp"

namespace meanref {

/// Affine feedback law u_t = -K_t X_t - k_t.
struct FeedbackPolicy {
    VectorGrid K;
    VectorGrid k;
};

/// Unconstrained LQ policy (zero offset).
FeedbackPolicy policy_from(const RiccatiSolution& ric);

/// Policy of a constrained solve.
FeedbackPolicy policy_from(const RiccatiSolution& ric, const MeanSolution& sol);

FeedbackPolicy resample(const FeedbackPolicy& policy, const TimeGrid& grid);

struct MCConfig {
    long paths = 10000;
    std::uint64_t seed = 0;
    TimeGrid grid;
    bool antithetic = false;
};

/// Estimates; standard errors are over independent samples (antithetic
/// pairs count as one sample). Bit-identical for fixed (seed, paths, grid,
/// antithetic) regardless of scheduling: path noise is a pure function of
/// (seed, path index) and paths are reduced in index order.
struct MCResult {
    double cost_mean = 0.0;
    double cost_se = 0.0;
    ScalarGrid mean_path;
    ScalarGrid mean_path_se;
    double terminal_second_moment = 0.0;
};

/// Euler-Maruyama on cfg.grid with left-endpoint cost quadrature
///   X_{i+1} = X_i + (A_i X_i + B_i^T u_i) h + (C_i X_i + D_i u_i)^T dW_i.
/// Throws on antithetic with odd path count, paths < 2, mismatched grids or
/// a non-finite trajectory (message carries the path index).
MCResult simulate(const ProblemSpec& spec, const FeedbackPolicy& policy, const MCConfig& cfg);

/// Exact first/second moments and expected cost of the Euler chain under an
/// affine policy (what `simulate` estimates, without sampling noise).
struct EulerMoments {
    ScalarGrid mean;
    ScalarGrid second_moment;
    double cost = 0.0;
};
EulerMoments euler_moments(const ProblemSpec& spec, const FeedbackPolicy& policy,
                           const TimeGrid& grid);

struct ParallelogramResult {
    double lhs;  // J(u) + J(v) - 2 J((u + v)/2)
    double rhs;  // (1/4) E[int Q (Xu - Xv)^2 + (u - v)^T R (u - v) dt + G (...)^2]
    double gap;  // lhs - rhs
};

/// Quadratic-cost identity under common random numbers. The midpoint
/// control is the pathwise average of the two induced control processes,
/// which makes the identity exact per sample; applying the averaged
/// feedback to its own state would break it whenever the gains differ.
ParallelogramResult parallelogram_check(const ProblemSpec& spec, const FeedbackPolicy& u_policy,
                                        const FeedbackPolicy& v_policy, const MCConfig& cfg);

struct FuzzSettings {
    double amplitude = 0.1;      // bump size relative to 1 + the gain scale
    int bumps = 3;               // Gaussian bumps per perturbation
    double bias_fraction = 0.6;  // fraction of trials biased toward feasibility
};

struct FuzzTrial {
    bool admissible;
    double cost;
    double se;
    double gap;  // cost - optimal cost (meaningful when admissible)
};

struct FuzzReport {
    int trials = 0;
    int admissible = 0;
    int excluded = 0;    // mean path below L beyond Monte Carlo noise
    int violations = 0;  // admissible with gap < -3 * combined SE
    double min_gap = 0.0;
    double optimal_cost = 0.0;
    double optimal_se = 0.0;
    std::vector<FuzzTrial> rows;
};

/// Perturbs (K, k) by smooth random bumps, screens out perturbations whose
/// simulated mean path violates E[X] >= L beyond Monte Carlo noise
/// (estimate minus 2 SE) and checks J(perturbed) >= J(optimal) - 3 SE with
/// common random numbers.
FuzzReport verification_fuzz(const ProblemSpec& spec, const FeedbackPolicy& optimal, int trials,
                             const MCConfig& cfg, const FuzzSettings& settings = {});

}  // namespace meanref
