#pragma once

#include <cstdint>
#include <string>

namespace meanref {

/// One batch run: load a problem, execute a command, leave CSV artifacts in
/// the output directory. Identical configs produce byte-identical CSVs.
struct RunConfig {
    std::string command;  // solve | simulate | verify | sweep-n | oracle-compare
    std::string problem_path;
    std::string out_dir = ".";

    int grid = 0;  // override N when > 0

    long paths = 20000;
    std::uint64_t seed = 12345;
    bool antithetic = false;

    double n0 = 100.0;  // penalty schedule n0 * ratio^j
    double ratio = 4.0;
    int stages = 9;

    double feas_rel = 1e-4;  // feasibility tolerance, scaled by 1 + |L|_inf
    double comp_rel = 1e-4;  // complementarity tolerance, scaled by 1 + |V|
    double delta = 1e-8;     // assumption margin for R
    double eps = 1e-8;       // assumption margin for B^T B

    int tree_steps = 10;  // oracle-compare
    int trials = 100;     // verify (fuzz trials)
};

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kAssumptionFailure = 3,
    kSolverFailure = 4,
    kInfeasible = 5,
};

/// Returns an ExitCode; on failure a single machine-parsable line
/// "error: <kind>: <detail>" goes to stderr.
int run(const RunConfig& config);

}  // namespace meanref
