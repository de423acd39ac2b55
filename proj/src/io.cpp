#include "meanref/io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace meanref {

namespace {

using nlohmann::json;

double require_number(const json& j, const std::string& field) {
    if (!j.is_number()) throw ProblemParseError(field, "expected a number");
    return j.get<double>();
}

int require_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ProblemParseError(field, "expected an integer");
    return j.get<int>();
}

const json& require_field(const json& root, const std::string& field) {
    auto it = root.find(field);
    if (it == root.end()) throw ProblemParseError(field, "missing");
    return *it;
}

// A, Q, L: number or array of N+1 numbers.
ScalarGrid parse_scalar(const json& j, const std::string& field, const TimeGrid& grid) {
    if (j.is_number()) return ScalarGrid::constant(grid, j.get<double>());
    if (j.is_array()) {
        if (static_cast<int>(j.size()) != grid.node_count())
            throw ProblemParseError(field, "nodal array must have N+1 entries");
        std::vector<double> v;
        v.reserve(j.size());
        for (const auto& e : j) v.push_back(require_number(e, field));
        return ScalarGrid(grid, std::move(v));
    }
    throw ProblemParseError(field, "expected a number or an array of N+1 numbers");
}

Eigen::VectorXd parse_vector_entry(const json& j, const std::string& field, int dim) {
    if (static_cast<int>(j.size()) != dim)
        throw ProblemParseError(field, "vector entry has the wrong dimension");
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = require_number(j.at(i), field);
    return v;
}

// B, C: number (dim 1), array of dim numbers, or array of N+1 such arrays.
VectorGrid parse_vector(const json& j, const std::string& field, int dim, const TimeGrid& grid) {
    if (j.is_number()) {
        if (dim != 1) throw ProblemParseError(field, "a bare number needs dimension 1");
        Eigen::VectorXd v(1);
        v << j.get<double>();
        return VectorGrid::constant(grid, v);
    }
    if (!j.is_array() || j.empty()) throw ProblemParseError(field, "expected an array");
    if (j.at(0).is_number()) {
        return VectorGrid::constant(grid, parse_vector_entry(j, field, dim));
    }
    if (static_cast<int>(j.size()) != grid.node_count())
        throw ProblemParseError(field, "nodal array must have N+1 entries");
    std::vector<Eigen::VectorXd> values;
    values.reserve(j.size());
    for (const auto& e : j) values.push_back(parse_vector_entry(e, field, dim));
    return VectorGrid(grid, std::move(values));
}

Eigen::MatrixXd parse_matrix_entry(const json& j, const std::string& field, int rows, int cols) {
    if (static_cast<int>(j.size()) != rows)
        throw ProblemParseError(field, "matrix entry has the wrong row count");
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j.at(r);
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ProblemParseError(field, "matrix entry has the wrong column count");
        for (int c = 0; c < cols; ++c) m(r, c) = require_number(row.at(c), field);
    }
    return m;
}

// D, R: number (1x1), nested array of rows, or array of N+1 matrices.
MatrixGrid parse_matrix(const json& j, const std::string& field, int rows, int cols,
                        const TimeGrid& grid) {
    if (j.is_number()) {
        if (rows != 1 || cols != 1)
            throw ProblemParseError(field, "a bare number needs a 1x1 matrix");
        Eigen::MatrixXd m(1, 1);
        m << j.get<double>();
        return MatrixGrid::constant(grid, m);
    }
    if (!j.is_array() || j.empty()) throw ProblemParseError(field, "expected an array");
    const json& first = j.at(0);
    if (first.is_array() && !first.empty() && first.at(0).is_number()) {
        return MatrixGrid::constant(grid, parse_matrix_entry(j, field, rows, cols));
    }
    if (static_cast<int>(j.size()) != grid.node_count())
        throw ProblemParseError(field, "nodal array must have N+1 entries");
    std::vector<Eigen::MatrixXd> values;
    values.reserve(j.size());
    for (const auto& e : j) values.push_back(parse_matrix_entry(e, field, rows, cols));
    return MatrixGrid(grid, std::move(values));
}

}  // namespace

ProblemSpec load_problem(const std::string& path, int grid_override) {
    std::ifstream in(path);
    if (!in) throw ProblemParseError("file", "cannot open '" + path + "'");
    json root;
    try {
        in >> root;
    } catch (const json::parse_error& e) {
        throw ProblemParseError("file", std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ProblemParseError("file", "top level must be an object");

    const double T = require_number(require_field(root, "T"), "T");
    const int N = require_int(require_field(root, "N"), "N");
    const int l = require_int(require_field(root, "l"), "l");
    const int m = require_int(require_field(root, "m"), "m");
    if (!(T > 0.0)) throw ProblemParseError("T", "must be positive");
    if (N < 1) throw ProblemParseError("N", "must be at least 1");
    if (l < 1) throw ProblemParseError("l", "must be at least 1");
    if (m < 1) throw ProblemParseError("m", "must be at least 1");

    TimeGrid grid(T, N);
    ProblemSpec spec{grid,
                     l,
                     m,
                     parse_scalar(require_field(root, "A"), "A", grid),
                     parse_vector(require_field(root, "B"), "B", l, grid),
                     parse_vector(require_field(root, "C"), "C", m, grid),
                     parse_matrix(require_field(root, "D"), "D", m, l, grid),
                     parse_scalar(require_field(root, "Q"), "Q", grid),
                     parse_matrix(require_field(root, "R"), "R", l, l, grid),
                     parse_scalar(require_field(root, "L"), "L", grid),
                     require_number(require_field(root, "G"), "G"),
                     require_number(require_field(root, "x"), "x")};
    if (grid_override > 0 && grid_override != N) return spec.resample(grid_override);
    return spec;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_solution_csv(std::ostream& os, const ProblemSpec& spec, const RiccatiSolution& ric,
                        const MeanSolution& sol) {
    const int l = spec.control_dim;
    os << "t,m,p";
    for (int j = 1; j <= l; ++j) os << ",K" << j;
    for (int j = 1; j <= l; ++j) os << ",k" << j;
    os << ",c,L\n";
    for (int i = 0; i < spec.grid.node_count(); ++i) {
        os << format_g17(spec.grid.node(i)) << ',' << format_g17(sol.m[i]) << ','
           << format_g17(sol.p[i]);
        for (int j = 0; j < l; ++j) os << ',' << format_g17(ric.K[i](j));
        for (int j = 0; j < l; ++j) os << ',' << format_g17(sol.k[i](j));
        os << ',' << format_g17(sol.mu.cumulative()[i]) << ',' << format_g17(spec.L[i]) << '\n';
    }
}

void write_meanpath_csv(std::ostream& os, const MCResult& result, const ScalarGrid& L) {
    os << "t,mean,se,L\n";
    const TimeGrid& g = result.mean_path.grid();
    for (int i = 0; i < g.node_count(); ++i) {
        os << format_g17(g.node(i)) << ',' << format_g17(result.mean_path[i]) << ','
           << format_g17(result.mean_path_se[i]) << ',' << format_g17(L(g.node(i))) << '\n';
    }
}

void write_trace_csv(std::ostream& os, const PenaltyTrace& trace) {
    os << "n,V_n,penalty_mass,iterations\n";
    for (const auto& s : trace.stages) {
        os << format_g17(s.n) << ',' << format_g17(s.value) << ',' << format_g17(s.penalty_mass)
           << ',' << s.iterations << '\n';
    }
}

void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
    os << "n,V_n_solver,V_n_tree,gap\n";
    for (const auto& r : rows) {
        os << format_g17(r.n) << ',' << format_g17(r.value_solver) << ','
           << format_g17(r.value_tree) << ',' << format_g17(r.gap) << '\n';
    }
}

void write_verify_csv(std::ostream& os, const std::vector<VerifyRow>& rows) {
    os << "check,value,threshold,pass\n";
    for (const auto& r : rows) {
        os << r.check << ',' << format_g17(r.value) << ',' << format_g17(r.threshold) << ','
           << (r.pass ? 1 : 0) << '\n';
    }
}

}  // namespace meanref
