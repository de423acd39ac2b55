#include "meanref/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "meanref/io.hpp"
#include "meanref/tree_oracle.hpp"

namespace meanref {

namespace {

void error_line(const char* kind, const std::string& detail) {
    std::cerr << "error: " << kind << ": " << detail << "\n";
}

struct ArtifactError {
    std::string message;
};

std::ofstream open_artifact(const std::filesystem::path& dir, const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw ArtifactError{std::string("cannot write ") + name};
    return os;
}

void write_report(std::ostream& os, const ProblemSpec& spec, const RiccatiSolution& ric,
                  const MeanSolution& sol, const PenaltyTrace& trace,
                  const ValidationReport& validation) {
    const double v_formula = optimal_value(sol, spec);
    const double v_moments = cost_via_moments(spec, ric, sol);
    const ComplementarityResidual cr = complementarity_residual(sol.m, spec.L, sol.mu);

    os << "assumptions:\n" << validation.summary();
    os << "value_formula " << format_g17(v_formula) << "\n";
    os << "value_moments " << format_g17(v_moments) << "\n";
    os << "value_gap " << format_g17(v_formula - v_moments) << "\n";
    os << "Y0 " << format_g17(sol.Y0) << "\n";
    os << "mu_mass " << format_g17(sol.mu.mass()) << "\n";
    os << "mu_atom_at_origin " << format_g17(sol.mu.atom_at_origin()) << "\n";
    os << "mu_peak_density " << format_g17(sol.mu.peak_density()) << "\n";
    os << "feasibility_defect " << format_g17(cr.feasibility_defect) << "\n";
    os << "complementarity_residual " << format_g17(cr.integral) << "\n";
    os << "n_final " << format_g17(sol.n_final) << "\n";
    os << "converged " << (trace.converged ? 1 : 0) << "\n";
    os << "trace n,V_n,penalty_mass,iterations,residual\n";
    for (const auto& s : trace.stages) {
        os << "trace " << format_g17(s.n) << ',' << format_g17(s.value) << ','
           << format_g17(s.penalty_mass) << ',' << s.iterations << ',' << format_g17(s.residual)
           << "\n";
    }
}

int run_checked(const RunConfig& config) {
    static const char* kCommands[] = {"solve", "simulate", "verify", "sweep-n", "oracle-compare"};
    bool known = false;
    for (const char* c : kCommands) known = known || config.command == c;
    if (!known) {
        error_line("config", "unknown command '" + config.command + "'");
        return kConfigError;
    }

    ProblemSpec spec = [&] {
        try {
            return load_problem(config.problem_path, config.grid);
        } catch (const ProblemParseError& e) {
            error_line("config", std::string("problem file: ") + e.what());
            throw ExitCode(kConfigError);
        }
    }();

    std::filesystem::path out(config.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) {
        error_line("config", "cannot create output directory '" + config.out_dir + "'");
        return kConfigError;
    }

    const ValidationReport validation = validate_spec(spec, config.delta, config.eps);
    if (!validation.all_pass()) {
        std::string failed;
        for (const auto& c : validation.checks)
            if (!c.pass) failed += (failed.empty() ? "" : "; ") + c.name;
        error_line("assumptions", failed);
        return kAssumptionFailure;
    }

    const RiccatiSolution ric = solve_riccati(spec);
    const std::vector<double> schedule =
        geometric_schedule(config.n0, config.ratio, config.stages);
    const SolveTolerances tol{config.feas_rel, config.comp_rel};

    if (config.command == "sweep-n") {
        // Full schedule, no early stopping.
        PenaltyTrace trace;
        ScalarGrid p = ScalarGrid::constant(spec.grid, 0.0);
        for (double n : schedule) {
            PenalizedSolution stage = solve_penalized(spec, ric, n, p, 0.5);
            p = stage.p;
            trace.stages.push_back({n, penalized_value(spec, ric, stage.m, stage.p, n),
                                    penalty_mass(spec, stage.m, n), stage.iterations,
                                    stage.residual});
            if (!stage.converged) {
                error_line("solver", "penalized stage did not converge at n=" + format_g17(n));
                return kSolverFailure;
            }
        }
        auto os = open_artifact(out, "trace.csv");
        write_trace_csv(os, trace);
        std::cout << "sweep-n: " << trace.stages.size() << " stages written to trace.csv\n";
        return kOk;
    }

    if (config.command == "oracle-compare") {
        if (spec.noise_dim != 1) {
            error_line("config", "oracle-compare needs a single Brownian driver (m = 1)");
            return kConfigError;
        }
        const double n_cmp = config.n0;
        PenalizedSolution pen =
            solve_penalized(spec, ric, n_cmp, ScalarGrid::constant(spec.grid, 0.0), 0.5);
        if (!pen.converged) {
            error_line("solver", "penalized solve did not converge for oracle comparison");
            return kSolverFailure;
        }
        const double v_solver = penalized_value(spec, ric, pen.m, pen.p, n_cmp);
        const TreeProblem tp = TreeProblem::build(spec, config.tree_steps, n_cmp);
        const TreeMinimizeResult tree =
            tree_minimize(tp, Eigen::VectorXd::Zero(tp.control_count()));
        if (!tree.converged) {
            error_line("solver", "tree oracle minimization did not converge");
            return kSolverFailure;
        }
        std::vector<CompareRow> rows{{n_cmp, v_solver, tree.objective, v_solver - tree.objective}};
        auto os = open_artifact(out, "compare.csv");
        write_compare_csv(os, rows);
        std::cout << "oracle-compare: solver " << format_g17(v_solver) << ", tree "
                  << format_g17(tree.objective) << "\n";
        return kOk;
    }

    auto [sol, trace] = solve_constrained(spec, ric, schedule, tol);
    if (!trace.converged) {
        error_line("solver", trace.message.empty() ? "did not converge" : trace.message);
        return kSolverFailure;
    }

    if (config.command == "solve") {
        {
            auto os = open_artifact(out, "solution.csv");
            write_solution_csv(os, spec, ric, sol);
        }
        auto os = open_artifact(out, "report.txt");
        write_report(os, spec, ric, sol, trace, validation);
        std::cout << "solve: value " << format_g17(optimal_value(sol, spec)) << ", mu mass "
                  << format_g17(sol.mu.mass()) << "\n";
        return kOk;
    }

    const FeedbackPolicy policy = policy_from(ric, sol);
    const MCConfig cfg{config.paths, config.seed, spec.grid, config.antithetic};

    if (config.command == "simulate") {
        const MCResult result = simulate(spec, policy, cfg);
        {
            auto os = open_artifact(out, "meanpath.csv");
            write_meanpath_csv(os, result, spec.L);
        }
        auto os = open_artifact(out, "summary.txt");
        os << "cost_mean " << format_g17(result.cost_mean) << "\n";
        os << "cost_se " << format_g17(result.cost_se) << "\n";
        os << "terminal_second_moment " << format_g17(result.terminal_second_moment) << "\n";
        os << "value_formula " << format_g17(optimal_value(sol, spec)) << "\n";
        std::cout << "simulate: cost " << format_g17(result.cost_mean) << " +- "
                  << format_g17(result.cost_se) << "\n";
        return kOk;
    }

    // verify
    {
        std::vector<VerifyRow> rows;
        const double value = optimal_value(sol, spec);

        // Parallelogram identity on random affine policy pairs.
        std::mt19937_64 rng(config.seed ^ 0xC0FFEEull);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        double worst_gap = 0.0, worst_scale = 1.0;
        MCConfig pcfg = cfg;
        pcfg.paths = std::min<long>(cfg.paths, 4000);
        for (int pair = 0; pair < 5; ++pair) {
            auto randomized = [&](const FeedbackPolicy& base) {
                FeedbackPolicy q = base;
                for (int i = 0; i < q.K.node_count(); ++i) {
                    for (int j = 0; j < q.K[i].size(); ++j) {
                        q.K[i](j) += 0.3 * unif(rng);
                        q.k[i](j) += 0.3 * unif(rng);
                    }
                }
                return q;
            };
            const ParallelogramResult pr =
                parallelogram_check(spec, randomized(policy), randomized(policy), pcfg);
            if (std::abs(pr.gap) > worst_gap) {
                worst_gap = std::abs(pr.gap);
                worst_scale = 1.0 + std::abs(pr.lhs);
            }
        }
        rows.push_back({"parallelogram_gap", worst_gap, 1e-10 * worst_scale,
                        worst_gap <= 1e-10 * worst_scale});

        // Optimality inequality under random admissible perturbations.
        const FuzzReport fuzz = verification_fuzz(spec, policy, config.trials, cfg);
        rows.push_back({"fuzz_violations", static_cast<double>(fuzz.violations), 0.0,
                        fuzz.violations == 0});
        rows.push_back({"fuzz_min_gap", fuzz.min_gap,
                        -3.0 * std::sqrt(2.0) * fuzz.optimal_se, true});

        // Deterministic complementarity of the solution itself.
        const ComplementarityResidual cr = complementarity_residual(sol.m, spec.L, sol.mu);
        const double tol_feas = config.feas_rel * (1.0 + sup_norm(spec.L));
        const double tol_comp = config.comp_rel * (1.0 + std::abs(value));
        rows.push_back(
            {"feasibility_defect", cr.feasibility_defect, tol_feas, cr.feasibility_defect <= tol_feas});
        rows.push_back({"complementarity_residual", cr.integral, tol_comp,
                        std::abs(cr.integral) <= tol_comp});

        // Duality surrogate: the simulated mean path against the compensator.
        const MCResult sim = simulate(spec, policy, cfg);
        const ComplementarityResidual sim_cr =
            complementarity_residual(sim.mean_path.resample(spec.grid), spec.L, sol.mu);
        double se_sup = 0.0;
        for (int i = 0; i < sim.mean_path_se.node_count(); ++i)
            se_sup = std::max(se_sup, sim.mean_path_se[i]);
        const double duality_tol = 3.0 * se_sup * (1.0 + sol.mu.mass()) + tol_comp;
        rows.push_back({"duality_integral", sim_cr.integral, duality_tol,
                        std::abs(sim_cr.integral) <= duality_tol});

        auto os = open_artifact(out, "verify.csv");
        write_verify_csv(os, rows);
        bool all = true;
        for (const auto& r : rows) all = all && r.pass;
        std::cout << "verify: " << (all ? "all checks passed" : "CHECKS FAILED") << "\n";
        return all ? kOk : kSolverFailure;
    }
}

}  // namespace

int run(const RunConfig& config) {
    try {
        return run_checked(config);
    } catch (ExitCode code) {
        return code;
    } catch (const ArtifactError& e) {
        error_line("config", e.message);
        return kConfigError;
    } catch (const InfeasibleProblem& e) {
        error_line("infeasible", e.what());
        return kInfeasible;
    } catch (const ProblemParseError& e) {
        error_line("config", e.what());
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        error_line("config", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        error_line("solver", e.what());
        return kSolverFailure;
    }
}

}  // namespace meanref
