#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "meanref/compensator.hpp"
#include "meanref/constraint_metrics.hpp"
#include "meanref/riccati.hpp"

namespace meanref {

/// The floor starts above the initial state, so no control can satisfy
/// E[X_0] = x >= L_0.
struct InfeasibleProblem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PenaltySettings {
    double tol_fp = 1e-10;  // sup-norm fixed-point residual target on p
    int max_iter = 10000;
};

struct PenalizedSolution {
    ScalarGrid m;  // mean path of the penalized problem
    ScalarGrid p;  // deterministic offset in Y = P X + p
    int iterations;
    double residual;  // sup-norm |F(p) - p| at the returned iterate
    bool converged;
};

/// Fixed point of the Picard map for the penalized deterministic system:
/// given p, set k = S^-1 B p, integrate the mean forward
///     m' = (A - B^T K) m - B^T k,             m_0 = x,
/// form the penalty source nu = n (m - L)_-, and integrate backward
///     p' = -A p + P w^T S^-1 B p + nu,        p_T = 0,
/// with w = B + D^T C. The map is piecewise linear in p; each iteration
/// freezes the active set {m < L} and solves the resulting linear two-point
/// system exactly (the map's spectral radius grows like n T^2, so plain
/// damped iteration stalls once the penalty is large). Damped steps with
/// the given damping in (0, 1] act as the safeguard between active-set
/// updates, and the reported residual is always |F(p) - p| of the genuine
/// map at the returned iterate.
PenalizedSolution solve_penalized(const ProblemSpec& spec, const RiccatiSolution& ric,
                                  double penalty_n, const ScalarGrid& p_init,
                                  double damping, const PenaltySettings& settings = {});

struct PenaltyStage {
    double n;
    double value;         // V_n via the penalized value formula
    double penalty_mass;  // n * int (m - L)_-^2 dt
    int iterations;
    double residual;
};

struct PenaltyTrace {
    std::vector<PenaltyStage> stages;
    bool converged = false;
    std::string message;
};

struct SolveTolerances {
    double feas_rel = 1e-4;  // defect tolerance, scaled by 1 + |L|_inf
    double comp_rel = 1e-4;  // complementarity tolerance, scaled by 1 + |V|
};

struct MeanSolution {
    ScalarGrid m;   // optimal mean path
    ScalarGrid p;   // offset in Y = P X + p
    VectorGrid k;   // feedback offset S^-1 B p, in R^l
    Compensator mu;
    double n_final;
    double Y0;      // P_0 x + p_0
};

/// n_j = n0 * ratio^j for j = 0..stages-1.
std::vector<double> geometric_schedule(double n0, double ratio, int stages);

/// Runs solve_penalized along an increasing schedule with warm starts,
/// builds the compensator from the final penalty source and stops early
/// once feasibility and complementarity tolerances hold. Throws
/// InfeasibleProblem when L_0 > x. When the schedule is exhausted without
/// meeting the tolerances the best solution is returned with
/// trace.converged = false.
std::pair<MeanSolution, PenaltyTrace> solve_constrained(
    const ProblemSpec& spec, const RiccatiSolution& ric,
    const std::vector<double>& schedule, const SolveTolerances& tol = {},
    const PenaltySettings& settings = {}, double damping = 0.5);

/// Optimal value (1/2) Y_0 x + (1/2) int L d(mu).
double optimal_value(const MeanSolution& sol, const ProblemSpec& spec);

/// Penalized value (1/2) Y_0^n x + (n/2) int (m - L)_- L dt.
double penalized_value(const ProblemSpec& spec, const RiccatiSolution& ric,
                       const ScalarGrid& m, const ScalarGrid& p, double penalty_n);

/// n * int (m - L)_-^2 dt.
double penalty_mass(const ProblemSpec& spec, const ScalarGrid& m, double penalty_n);

/// Independent cost evaluation of the affine policy u = -K X - k through
/// the closed first/second moment ODEs; does not touch Y0 or mu.
double cost_via_moments(const ProblemSpec& spec, const RiccatiSolution& ric,
                        const MeanSolution& sol);

}  // namespace meanref
