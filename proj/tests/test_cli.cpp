#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "meanref/cli.hpp"
#include "meanref/io.hpp"

using namespace meanref;
namespace fs = std::filesystem;

namespace {

fs::path problems_dir() { return fs::path(MEANREF_PROBLEMS_DIR); }

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("meanref_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_problem(const fs::path& dir, const std::string& name, const std::string& body) {
    fs::path p = dir / name;
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("format_g17 prints 17 significant digits") {
    CHECK(format_g17(1.0 / 3.0) == "0.33333333333333331");
    CHECK(format_g17(0.0) == "0");
    CHECK(format_g17(-2.5) == "-2.5");
}

TEST_CASE("problem files parse in all coefficient forms") {
    auto dir = temp_dir("parse");
    auto path = write_problem(dir, "p.json", R"({
        "T": 2.0, "N": 4, "l": 2, "m": 1,
        "A": [0.0, 0.1, 0.2, 0.3, 0.4],
        "B": [1.0, -0.5],
        "C": 0.3,
        "D": [[0.2, 0.1]],
        "Q": 1.0,
        "R": [[1.0, 0.0], [0.0, 2.0]],
        "G": 0.5,
        "L": [-1.0, -0.9, -0.8, -0.7, -0.6],
        "x": 1.5
    })");
    auto spec = load_problem(path.string());
    CHECK(spec.control_dim == 2);
    CHECK(spec.noise_dim == 1);
    CHECK(spec.grid.steps() == 4);
    CHECK(spec.A[2] == 0.2);
    CHECK(spec.B[0](1) == -0.5);
    CHECK(spec.D[0](0, 1) == 0.1);
    CHECK(spec.R[0](1, 1) == 2.0);
    CHECK(spec.L[4] == -0.6);
    CHECK(spec.x0 == 1.5);

    // Grid override resamples; the nodal linear ramp stays exact.
    auto fine = load_problem(path.string(), 8);
    CHECK(fine.grid.steps() == 8);
    CHECK(fine.A[1] == doctest::Approx(0.05));

    auto varying = write_problem(dir, "v.json", R"({
        "T": 1.0, "N": 2, "l": 1, "m": 1,
        "A": 0.0,
        "B": [[1.0], [1.1], [1.2]],
        "C": [0.2],
        "D": [[[0.5]], [[0.6]], [[0.7]]],
        "Q": 0.0, "R": 1.0, "G": 0.0, "L": -1.0, "x": 1.0
    })");
    auto vspec = load_problem(varying.string());
    CHECK(vspec.B[1](0) == 1.1);
    CHECK(vspec.D[2](0, 0) == 0.7);
}

TEST_CASE("parse errors name the offending field") {
    auto dir = temp_dir("parse_err");
    auto missing = write_problem(dir, "missing.json",
                                 R"({"T": 1.0, "N": 2, "l": 1, "m": 1})");
    CHECK_THROWS_WITH_AS(load_problem(missing.string()), doctest::Contains("'A'"),
                         ProblemParseError);

    auto short_arr = write_problem(dir, "short.json", R"({
        "T": 1.0, "N": 4, "l": 1, "m": 1,
        "A": [0.0, 0.1], "B": 1.0, "C": 0.0, "D": 0.0,
        "Q": 0.0, "R": 1.0, "G": 0.0, "L": -1.0, "x": 1.0
    })");
    CHECK_THROWS_WITH_AS(load_problem(short_arr.string()), doctest::Contains("'A'"),
                         ProblemParseError);

    auto bad_json = write_problem(dir, "bad.json", "{ not json");
    CHECK_THROWS_AS(load_problem(bad_json.string()), ProblemParseError);

    auto bad_T = write_problem(dir, "badT.json", R"({
        "T": -1.0, "N": 4, "l": 1, "m": 1,
        "A": 0.0, "B": 1.0, "C": 0.0, "D": 0.0,
        "Q": 0.0, "R": 1.0, "G": 0.0, "L": -1.0, "x": 1.0
    })");
    CHECK_THROWS_WITH_AS(load_problem(bad_T.string()), doctest::Contains("'T'"),
                         ProblemParseError);

    CHECK_THROWS_AS(load_problem((dir / "nonexistent.json").string()), ProblemParseError);
}

TEST_CASE("solve command writes deterministic artifacts") {
    RunConfig cfg;
    cfg.command = "solve";
    cfg.problem_path = (problems_dir() / "binding.json").string();
    cfg.grid = 400;

    auto out1 = temp_dir("solve1");
    auto out2 = temp_dir("solve2");
    cfg.out_dir = out1.string();
    REQUIRE(run(cfg) == kOk);
    cfg.out_dir = out2.string();
    REQUIRE(run(cfg) == kOk);

    const std::string csv = slurp(out1 / "solution.csv");
    CHECK(csv == slurp(out2 / "solution.csv"));
    CHECK(slurp(out1 / "report.txt") == slurp(out2 / "report.txt"));
    CHECK(csv.rfind("t,m,p,K1,k1,c,L\n", 0) == 0);  // header row
    CHECK(slurp(out1 / "report.txt").find("value_formula") != std::string::npos);
}

TEST_CASE("unconstrained problem reports zero compensator mass") {
    RunConfig cfg;
    cfg.command = "solve";
    cfg.problem_path = (problems_dir() / "unconstrained.json").string();
    cfg.grid = 400;
    auto out = temp_dir("solve_unconstrained");
    cfg.out_dir = out.string();
    REQUIRE(run(cfg) == kOk);
    const std::string report = slurp(out / "report.txt");
    CHECK(report.find("mu_mass 0\n") != std::string::npos);
    CHECK(report.find("mu_atom_at_origin 0\n") != std::string::npos);
}

TEST_CASE("simulate and sweep-n emit their artifacts") {
    RunConfig cfg;
    cfg.command = "simulate";
    cfg.problem_path = (problems_dir() / "binding.json").string();
    cfg.grid = 300;
    cfg.paths = 2000;
    auto out = temp_dir("simulate");
    cfg.out_dir = out.string();
    REQUIRE(run(cfg) == kOk);
    CHECK(slurp(out / "meanpath.csv").rfind("t,mean,se,L\n", 0) == 0);
    CHECK(slurp(out / "summary.txt").find("cost_mean") != std::string::npos);

    cfg.command = "sweep-n";
    cfg.stages = 6;
    auto out_sweep = temp_dir("sweep");
    cfg.out_dir = out_sweep.string();
    REQUIRE(run(cfg) == kOk);
    const std::string trace = slurp(out_sweep / "trace.csv");
    CHECK(trace.rfind("n,V_n,penalty_mass,iterations\n", 0) == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 7);  // header + 6 stages

    // The V_n column is nondecreasing.
    std::istringstream rows(trace);
    std::string line;
    std::getline(rows, line);
    double prev = -1e300;
    while (std::getline(rows, line)) {
        const auto a = line.find(','), b = line.find(',', line.find(',') + 1);
        const double vn = std::stod(line.substr(a + 1, b - a - 1));
        CHECK(vn >= prev);
        prev = vn;
    }
}

TEST_CASE("oracle-compare emits the gap") {
    RunConfig cfg;
    cfg.command = "oracle-compare";
    cfg.problem_path = (problems_dir() / "binding.json").string();
    cfg.grid = 500;
    cfg.n0 = 1000.0;
    cfg.tree_steps = 8;
    auto out = temp_dir("oracle");
    cfg.out_dir = out.string();
    REQUIRE(run(cfg) == kOk);
    CHECK(slurp(out / "compare.csv").rfind("n,V_n_solver,V_n_tree,gap\n", 0) == 0);
}

TEST_CASE("exit codes") {
    auto dir = temp_dir("exit");
    RunConfig cfg;
    cfg.out_dir = (dir / "out").string();

    SUBCASE("unknown command") {
        cfg.command = "explode";
        cfg.problem_path = (problems_dir() / "binding.json").string();
        CHECK(run(cfg) == kConfigError);
    }
    SUBCASE("malformed problem") {
        cfg.command = "solve";
        cfg.problem_path = (problems_dir() / "malformed.json").string();
        CHECK(run(cfg) == kConfigError);
    }
    SUBCASE("assumption failure") {
        auto bad = write_problem(dir, "bad_r.json", R"({
            "T": 1.0, "N": 50, "l": 1, "m": 1,
            "A": 0.0, "B": 1.0, "C": 0.2, "D": 1.0,
            "Q": 1.0, "R": 0.0, "G": 0.0, "L": -1.0, "x": 1.0
        })");
        cfg.command = "solve";
        cfg.problem_path = bad.string();
        CHECK(run(cfg) == kAssumptionFailure);
    }
    SUBCASE("oracle-compare rejects multiple drivers") {
        auto multi = write_problem(dir, "multi_driver.json", R"({
            "T": 1.0, "N": 50, "l": 1, "m": 2,
            "A": 0.0, "B": 1.0, "C": [0.2, 0.1],
            "D": [[1.0], [0.5]],
            "Q": 1.0, "R": 1.0, "G": 0.0, "L": -1.0, "x": 1.0
        })");
        cfg.command = "oracle-compare";
        cfg.problem_path = multi.string();
        CHECK(run(cfg) == kConfigError);
    }
    SUBCASE("unwritable output directory") {
        auto blocker = write_problem(dir, "blocker", "");
        cfg.command = "solve";
        cfg.problem_path = (problems_dir() / "closed_form.json").string();
        cfg.grid = 50;
        cfg.out_dir = blocker.string();  // a regular file, not a directory
        CHECK(run(cfg) == kConfigError);
    }
    SUBCASE("infeasible start") {
        auto infeasible = write_problem(dir, "infeasible.json", R"({
            "T": 1.0, "N": 50, "l": 1, "m": 1,
            "A": 0.0, "B": 1.0, "C": 0.2, "D": 1.0,
            "Q": 1.0, "R": 1.0, "G": 0.0, "L": 2.0, "x": 1.0
        })");
        cfg.command = "solve";
        cfg.problem_path = infeasible.string();
        CHECK(run(cfg) == kInfeasible);
    }
}
