#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "meanref/montecarlo.hpp"
#include "meanref/obstacle.hpp"
#include "meanref/problem_spec.hpp"
#include "meanref/riccati.hpp"

namespace meanref {

/// Malformed problem file; `field` names the offending entry.
struct ProblemParseError : std::runtime_error {
    explicit ProblemParseError(const std::string& field_name, const std::string& what)
        : std::runtime_error("field '" + field_name + "': " + what), field(field_name) {}
    std::string field;
};

/// Loads a JSON problem file with entries
///   {T, N, l, m, A, B, C, D, Q, R, G, L, x}.
/// Scalar coefficients (A, Q, L) are a number or an array of N+1 nodal
/// values; vector coefficients (B, C) are a number (dim 1), an array of dim
/// numbers, or an array of N+1 such arrays; matrix coefficients (D, R) are
/// a number (1x1), a nested array of rows, or an array of N+1 matrices.
/// grid_override resamples everything onto that many steps.
ProblemSpec load_problem(const std::string& path, int grid_override = 0);

/// 17 significant digits, shortest form ("%.17g").
std::string format_g17(double v);

void write_solution_csv(std::ostream& os, const ProblemSpec& spec, const RiccatiSolution& ric,
                        const MeanSolution& sol);

void write_meanpath_csv(std::ostream& os, const MCResult& result, const ScalarGrid& L);

void write_trace_csv(std::ostream& os, const PenaltyTrace& trace);

struct CompareRow {
    double n;
    double value_solver;
    double value_tree;
    double gap;
};
void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows);

struct VerifyRow {
    std::string check;
    double value;
    double threshold;
    bool pass;
};
void write_verify_csv(std::ostream& os, const std::vector<VerifyRow>& rows);

}  // namespace meanref
