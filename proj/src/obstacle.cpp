#include "meanref/obstacle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

namespace meanref {

namespace {

double negative_part(double z) { return z < 0.0 ? -z : 0.0; }

/// Scalar coefficient tables for the (m, p) sweeps, precomputed once per
/// solve: the Picard loop itself is pure scalar arithmetic.
struct SweepTables {
    int N;
    double h;
    double x0;
    std::vector<double> drift;  // A - B^T K
    std::vector<double> gain;   // B^T S^-1 B       (mean response to p)
    std::vector<double> alpha;  // -A + P w^T S^-1 B (p-equation coefficient)
    std::vector<double> floor_L;
};

SweepTables build_tables(const ProblemSpec& spec, const RiccatiSolution& ric) {
    const int N = spec.grid.steps();
    SweepTables tb;
    tb.N = N;
    tb.h = spec.grid.spacing();
    tb.x0 = spec.x0;
    tb.drift.resize(N + 1);
    tb.gain.resize(N + 1);
    tb.alpha.resize(N + 1);
    tb.floor_L.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
        const Eigen::VectorXd& B = spec.B[i];
        const Eigen::VectorXd w = B + spec.D[i].transpose() * spec.C[i];
        Eigen::LLT<Eigen::MatrixXd> llt(ric.S[i]);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("solve_penalized: S lost positive definiteness");
        const Eigen::VectorXd SinvB = llt.solve(B);
        tb.drift[i] = spec.A[i] - B.dot(ric.K[i]);
        tb.gain[i] = B.dot(SinvB);
        tb.alpha[i] = -spec.A[i] + ric.P[i] * w.dot(SinvB);
        tb.floor_L[i] = spec.L[i];
    }
    return tb;
}

// m' = drift * m - gain * p, m_0 = x; RK4 with midpoint coefficients
// averaged from the nodes.
void forward_mean(const SweepTables& tb, const Eigen::VectorXd& p, Eigen::VectorXd& m) {
    const double h = tb.h;
    m[0] = tb.x0;
    for (int i = 0; i < tb.N; ++i) {
        const double a0 = tb.drift[i], a1 = tb.drift[i + 1], am = 0.5 * (a0 + a1);
        const double b0 = -tb.gain[i] * p[i];
        const double b1 = -tb.gain[i + 1] * p[i + 1];
        const double bm = 0.5 * (b0 + b1);
        const double k1 = a0 * m[i] + b0;
        const double k2 = am * (m[i] + 0.5 * h * k1) + bm;
        const double k3 = am * (m[i] + 0.5 * h * k2) + bm;
        const double k4 = a1 * (m[i] + h * k3) + b1;
        m[i + 1] = m[i] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
}

// p' = alpha * p + nu, p_T = 0; integrated backward.
void backward_offset(const SweepTables& tb, const Eigen::VectorXd& nu, Eigen::VectorXd& p) {
    const double h = tb.h;
    p[tb.N] = 0.0;
    for (int i = tb.N; i >= 1; --i) {
        const double a1 = tb.alpha[i], a0 = tb.alpha[i - 1], am = 0.5 * (a0 + a1);
        const double n1 = nu[i], n0 = nu[i - 1], nm = 0.5 * (n0 + n1);
        const double k1 = a1 * p[i] + n1;
        const double k2 = am * (p[i] - 0.5 * h * k1) + nm;
        const double k3 = am * (p[i] - 0.5 * h * k2) + nm;
        const double k4 = a0 * (p[i] - h * k3) + n0;
        p[i - 1] = p[i] - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
}

// One application of the Picard map p -> F(p); also yields m and nu.
void picard_map(const SweepTables& tb, double penalty_n, const Eigen::VectorXd& p,
                Eigen::VectorXd& m, Eigen::VectorXd& nu, Eigen::VectorXd& p_new) {
    forward_mean(tb, p, m);
    for (int i = 0; i <= tb.N; ++i)
        nu[i] = penalty_n * negative_part(m[i] - tb.floor_L[i]);
    backward_offset(tb, nu, p_new);
}

ScalarGrid to_grid(const TimeGrid& g, const Eigen::VectorXd& v) {
    return ScalarGrid(g, std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

namespace {

/// Per-interval linear forms of the RK4 one-step maps:
///   m_{i+1} = fm_m[i] m_i + fm_p0[i] p_i + fm_p1[i] p_{i+1}
///   p_i     = bp_p[i] p_{i+1} + bp_n0[i] nu_i + bp_n1[i] nu_{i+1}
/// extracted from the same stage arithmetic as the sweeps.
struct StepForms {
    std::vector<double> fm_m, fm_p0, fm_p1;
    std::vector<double> bp_p, bp_n0, bp_n1;
};

StepForms build_step_forms(const SweepTables& tb) {
    const double h = tb.h;
    StepForms f;
    f.fm_m.resize(tb.N);
    f.fm_p0.resize(tb.N);
    f.fm_p1.resize(tb.N);
    f.bp_p.resize(tb.N);
    f.bp_n0.resize(tb.N);
    f.bp_n1.resize(tb.N);
    for (int i = 0; i < tb.N; ++i) {
        const double a0 = tb.drift[i], a1 = tb.drift[i + 1], am = 0.5 * (a0 + a1);
        auto fstep = [&](double m, double p0, double p1) {
            const double b0 = -tb.gain[i] * p0;
            const double b1 = -tb.gain[i + 1] * p1;
            const double bm = 0.5 * (b0 + b1);
            const double k1 = a0 * m + b0;
            const double k2 = am * (m + 0.5 * h * k1) + bm;
            const double k3 = am * (m + 0.5 * h * k2) + bm;
            const double k4 = a1 * (m + h * k3) + b1;
            return m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        };
        f.fm_m[i] = fstep(1.0, 0.0, 0.0);
        f.fm_p0[i] = fstep(0.0, 1.0, 0.0);
        f.fm_p1[i] = fstep(0.0, 0.0, 1.0);

        const double l1 = tb.alpha[i + 1], l0 = tb.alpha[i], lm = 0.5 * (l0 + l1);
        auto bstep = [&](double p1, double n0, double n1) {
            const double nm = 0.5 * (n0 + n1);
            const double k1 = l1 * p1 + n1;
            const double k2 = lm * (p1 - 0.5 * h * k1) + nm;
            const double k3 = lm * (p1 - 0.5 * h * k2) + nm;
            const double k4 = l0 * (p1 - h * k3) + n0;
            return p1 - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        };
        f.bp_p[i] = bstep(1.0, 0.0, 0.0);
        f.bp_n0[i] = bstep(0.0, 1.0, 0.0);
        f.bp_n1[i] = bstep(0.0, 0.0, 1.0);
    }
    return f;
}

/// Solves the coupled (m, p) system exactly for a frozen active set, where
/// nu_j = n (L_j - m_j) on the set and 0 elsewhere. Block-tridiagonal
/// elimination over the per-node unknowns z_i = (m_i, p_i). Returns false
/// on a singular pivot.
bool solve_active_set(const SweepTables& tb, const StepForms& sf, double penalty_n,
                      const std::vector<char>& active, Eigen::VectorXd& m_out,
                      Eigen::VectorXd& p_out) {
    const int N = tb.N;
    using Mat2 = Eigen::Matrix2d;
    using Vec2 = Eigen::Vector2d;
    std::vector<Mat2> diag(N + 1), upper(N + 1, Mat2::Zero()), lower(N + 1, Mat2::Zero());
    std::vector<Vec2> rhs(N + 1, Vec2::Zero());

    auto weight = [&](int j) { return active[j] ? penalty_n : 0.0; };

    for (int i = 0; i <= N; ++i) {
        Mat2 D = Mat2::Zero(), U = Mat2::Zero(), Lo = Mat2::Zero();
        Vec2 r = Vec2::Zero();
        if (i == 0) {
            D(0, 0) = 1.0;  // m_0 = x
            r(0) = tb.x0;
        } else {
            // m_i - fm_m m_{i-1} - fm_p0 p_{i-1} - fm_p1 p_i = 0
            Lo(0, 0) = -sf.fm_m[i - 1];
            Lo(0, 1) = -sf.fm_p0[i - 1];
            D(0, 0) = 1.0;
            D(0, 1) = -sf.fm_p1[i - 1];
        }
        if (i == N) {
            D(1, 1) = 1.0;  // p_N = 0
        } else {
            // p_i - bp_p p_{i+1} - bp_n0 nu_i - bp_n1 nu_{i+1} = 0 with
            // nu_j = w_j (L_j - m_j).
            const double w0 = weight(i), w1 = weight(i + 1);
            D(1, 0) = sf.bp_n0[i] * w0;
            D(1, 1) = 1.0;
            U(1, 0) = sf.bp_n1[i] * w1;
            U(1, 1) = -sf.bp_p[i];
            r(1) = sf.bp_n0[i] * w0 * tb.floor_L[i] + sf.bp_n1[i] * w1 * tb.floor_L[i + 1];
        }
        diag[i] = D;
        upper[i] = U;
        lower[i] = Lo;
        rhs[i] = r;
    }

    // Block Thomas sweep.
    for (int i = 1; i <= N; ++i) {
        const Mat2& Dp = diag[i - 1];
        const double det = Dp(0, 0) * Dp(1, 1) - Dp(0, 1) * Dp(1, 0);
        if (!(std::abs(det) > 1e-300)) return false;
        Mat2 inv;
        inv << Dp(1, 1), -Dp(0, 1), -Dp(1, 0), Dp(0, 0);
        inv /= det;
        const Mat2 W = lower[i] * inv;
        diag[i] -= W * upper[i - 1];
        rhs[i] -= W * rhs[i - 1];
    }
    std::vector<Vec2> z(N + 1);
    for (int i = N; i >= 0; --i) {
        Vec2 r = rhs[i];
        if (i < N) r -= upper[i] * z[i + 1];
        const Mat2& D = diag[i];
        const double det = D(0, 0) * D(1, 1) - D(0, 1) * D(1, 0);
        if (!(std::abs(det) > 1e-300)) return false;
        z[i](0) = (D(1, 1) * r(0) - D(0, 1) * r(1)) / det;
        z[i](1) = (D(0, 0) * r(1) - D(1, 0) * r(0)) / det;
    }
    m_out.resize(N + 1);
    p_out.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
        m_out(i) = z[i](0);
        p_out(i) = z[i](1);
        if (!std::isfinite(m_out(i)) || !std::isfinite(p_out(i))) return false;
    }
    return true;
}

}  // namespace

PenalizedSolution solve_penalized(const ProblemSpec& spec, const RiccatiSolution& ric,
                                  double penalty_n, const ScalarGrid& p_init,
                                  double damping, const PenaltySettings& settings) {
    if (!(penalty_n >= 0.0))
        throw std::invalid_argument("solve_penalized: penalty weight must be >= 0");
    if (!(damping > 0.0 && damping <= 1.0))
        throw std::invalid_argument("solve_penalized: damping must be in (0, 1]");
    if (settings.max_iter < 1)
        throw std::invalid_argument("solve_penalized: max_iter must be at least 1");
    if (!(p_init.grid() == spec.grid))
        throw std::invalid_argument("solve_penalized: p_init must live on the problem grid");

    const SweepTables tb = build_tables(spec, ric);
    const StepForms sf = build_step_forms(tb);
    const int n_nodes = tb.N + 1;

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(p_init.values().data(), n_nodes);
    Eigen::VectorXd m(n_nodes), nu(n_nodes), fx(n_nodes), m_lin(n_nodes), p_lin(n_nodes);

    Eigen::VectorXd x_best = x, m_best(n_nodes);
    double best_res = std::numeric_limits<double>::infinity();
    std::vector<char> active(n_nodes, 0), prev1, prev2;
    int iterations = 0;

    for (int iter = 1; iter <= settings.max_iter; ++iter) {
        iterations = iter;
        picard_map(tb, penalty_n, x, m, nu, fx);
        const double res = (fx - x).lpNorm<Eigen::Infinity>();
        if (!std::isfinite(res)) {
            if (!std::isfinite(best_res))
                throw std::runtime_error("solve_penalized: non-finite values in the Picard sweep");
            x = x_best;
            continue;
        }
        if (res < best_res) {
            best_res = res;
            x_best = x;
            m_best = m;
        }
        if (res <= settings.tol_fp)
            return PenalizedSolution{to_grid(spec.grid, m), to_grid(spec.grid, x), iter, res,
                                     true};

        for (int i = 0; i < n_nodes; ++i) active[i] = m(i) < tb.floor_L[i] ? 1 : 0;

        // A repeated active set means the exact piecewise-linear solve has
        // converged to the arithmetic floor of the map (nu = n (m - L)_-
        // amplifies rounding in m by n); accept the best iterate there.
        const bool cycling = !prev2.empty() && active == prev2 && active != prev1;
        if (!prev1.empty() && active == prev1) {
            const double fp_floor =
                64.0 * std::numeric_limits<double>::epsilon() *
                (1.0 + penalty_n * spec.grid.horizon() *
                           std::max(1.0, m_best.lpNorm<Eigen::Infinity>()));
            return PenalizedSolution{to_grid(spec.grid, m_best), to_grid(spec.grid, x_best),
                                     iter, best_res, best_res <= std::max(settings.tol_fp,
                                                                          fp_floor)};
        }

        if (cycling || !solve_active_set(tb, sf, penalty_n, active, m_lin, p_lin)) {
            x += damping * (fx - x);  // damped Picard step off the cycle
            prev1.clear();
            prev2.clear();
            continue;
        }
        prev2 = prev1;
        prev1 = active;
        x = p_lin;
    }

    return PenalizedSolution{to_grid(spec.grid, m_best), to_grid(spec.grid, x_best), iterations,
                             best_res, false};
}

std::vector<double> geometric_schedule(double n0, double ratio, int stages) {
    if (!(n0 > 0.0) || !(ratio > 1.0) || stages < 1)
        throw std::invalid_argument("geometric_schedule: need n0 > 0, ratio > 1, stages >= 1");
    std::vector<double> s(stages);
    double n = n0;
    for (int j = 0; j < stages; ++j, n *= ratio) s[j] = n;
    return s;
}

namespace {

ScalarGrid penalty_density(const ProblemSpec& spec, const ScalarGrid& m, double penalty_n) {
    std::vector<double> nu(m.node_count());
    for (int i = 0; i < m.node_count(); ++i)
        nu[i] = penalty_n * negative_part(m[i] - spec.L[i]);
    return ScalarGrid(spec.grid, std::move(nu));
}

VectorGrid feedback_offset(const ProblemSpec& spec, const RiccatiSolution& ric,
                           const ScalarGrid& p) {
    std::vector<Eigen::VectorXd> k(p.node_count());
    for (int i = 0; i < p.node_count(); ++i) {
        Eigen::LLT<Eigen::MatrixXd> llt(ric.S[i]);
        k[i] = llt.solve(spec.B[i]) * p[i];
    }
    return VectorGrid(spec.grid, std::move(k));
}

}  // namespace

std::pair<MeanSolution, PenaltyTrace> solve_constrained(
    const ProblemSpec& spec, const RiccatiSolution& ric,
    const std::vector<double>& schedule, const SolveTolerances& tol,
    const PenaltySettings& settings, double damping) {
    if (schedule.empty())
        throw std::invalid_argument("solve_constrained: empty schedule");
    for (size_t j = 1; j < schedule.size(); ++j)
        if (!(schedule[j] > schedule[j - 1]))
            throw std::invalid_argument("solve_constrained: schedule must be strictly increasing");
    if (spec.L[0] > spec.x0) {
        std::ostringstream os;
        os << "solve_constrained: infeasible at t = 0 (L_0 = " << spec.L[0]
           << " > x = " << spec.x0 << ")";
        throw InfeasibleProblem(os.str());
    }

    const double tol_feas = tol.feas_rel * (1.0 + sup_norm(spec.L));
    PenaltyTrace trace;
    ScalarGrid p = ScalarGrid::constant(spec.grid, 0.0);

    auto assemble = [&](const PenalizedSolution& stage, double n) {
        Compensator mu = Compensator::from_density(penalty_density(spec, stage.m, n));
        const double Y0 = ric.P[0] * spec.x0 + stage.p[0];
        return MeanSolution{stage.m, stage.p, feedback_offset(spec, ric, stage.p),
                            std::move(mu), n, Y0};
    };

    PenalizedSolution last{p, p, 0, 0.0, false};
    bool have_stage = false;
    for (double n : schedule) {
        PenalizedSolution stage = solve_penalized(spec, ric, n, p, damping, settings);
        p = stage.p;
        const double value = penalized_value(spec, ric, stage.m, stage.p, n);
        const double mass = penalty_mass(spec, stage.m, n);
        trace.stages.push_back({n, value, mass, stage.iterations, stage.residual});
        last = stage;
        have_stage = true;
        if (!stage.converged) continue;

        MeanSolution candidate = assemble(stage, n);
        const ComplementarityResidual cr =
            complementarity_residual(candidate.m, spec.L, candidate.mu);
        const double tol_comp = tol.comp_rel * (1.0 + std::abs(value));
        if (cr.feasibility_defect <= tol_feas && std::abs(cr.integral) <= tol_comp) {
            trace.converged = true;
            return {std::move(candidate), std::move(trace)};
        }
    }

    trace.converged = false;
    trace.message = "schedule exhausted before feasibility/complementarity tolerances were met";
    if (!have_stage) throw std::runtime_error("solve_constrained: no stage was solved");
    return {assemble(last, schedule.back()), std::move(trace)};
}

double optimal_value(const MeanSolution& sol, const ProblemSpec& spec) {
    // int L d(mu) with midpoint pairing; the origin atom pairs with L_0.
    double int_L = spec.L[0] * sol.mu.atom_at_origin();
    for (int i = 0; i + 1 < spec.L.node_count(); ++i)
        int_L += 0.5 * (spec.L[i] + spec.L[i + 1]) * sol.mu.increment(i);
    return 0.5 * sol.Y0 * spec.x0 + 0.5 * int_L;
}

double penalized_value(const ProblemSpec& spec, const RiccatiSolution& ric,
                       const ScalarGrid& m, const ScalarGrid& p, double penalty_n) {
    std::vector<double> integrand(m.node_count());
    for (int i = 0; i < m.node_count(); ++i)
        integrand[i] = negative_part(m[i] - spec.L[i]) * spec.L[i];
    const double Y0 = ric.P[0] * spec.x0 + p[0];
    return 0.5 * Y0 * spec.x0 +
           0.5 * penalty_n * trapezoid(ScalarGrid(spec.grid, std::move(integrand)));
}

double penalty_mass(const ProblemSpec& spec, const ScalarGrid& m, double penalty_n) {
    std::vector<double> integrand(m.node_count());
    for (int i = 0; i < m.node_count(); ++i) {
        const double neg = negative_part(m[i] - spec.L[i]);
        integrand[i] = neg * neg;
    }
    return penalty_n * trapezoid(ScalarGrid(spec.grid, std::move(integrand)));
}

double cost_via_moments(const ProblemSpec& spec, const RiccatiSolution& ric,
                        const MeanSolution& sol) {
    const TimeGrid& g = spec.grid;
    const int N = g.steps();
    const double h = g.spacing();

    // v' = 2(A - B^T K) v - 2 B^T k m + |C - D K|^2 v - 2 (C - D K)^T D k m
    //      + |D k|^2, v = E[X^2], v_0 = x^2.
    struct VStage {
        double lin;   // coefficient of v
        double mixm;  // coefficient of m
        double cnst;
    };
    auto v_stage = [&](double t, double m_t) {
        const Eigen::VectorXd B = spec.B(t);
        const Eigen::VectorXd C = spec.C(t);
        const Eigen::MatrixXd D = spec.D(t);
        const Eigen::VectorXd K = ric.K(t);
        const Eigen::VectorXd k = sol.k(t);
        const Eigen::VectorXd CDK = C - D * K;
        const Eigen::VectorXd Dk = D * k;
        VStage s;
        s.lin = 2.0 * (spec.A(t) - B.dot(K)) + CDK.squaredNorm();
        s.mixm = (-2.0 * B.dot(k) - 2.0 * CDK.dot(Dk)) * m_t;
        s.cnst = Dk.squaredNorm();
        return s;
    };
    auto v_rhs = [](const VStage& s, double v) { return s.lin * v + s.mixm + s.cnst; };

    std::vector<double> v(N + 1);
    v[0] = spec.x0 * spec.x0;
    for (int i = 0; i < N; ++i) {
        const double t0 = g.node(i), t1 = g.node(i + 1), tm = 0.5 * (t0 + t1);
        const double mm = 0.5 * (sol.m[i] + sol.m[i + 1]);
        const VStage s0 = v_stage(t0, sol.m[i]);
        const VStage sm = v_stage(tm, mm);
        const VStage s1 = v_stage(t1, sol.m[i + 1]);
        const double k1 = v_rhs(s0, v[i]);
        const double k2 = v_rhs(sm, v[i] + 0.5 * h * k1);
        const double k3 = v_rhs(sm, v[i] + 0.5 * h * k2);
        const double k4 = v_rhs(s1, v[i] + h * k3);
        v[i + 1] = v[i] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(v[i + 1]))
            throw std::runtime_error("cost_via_moments: non-finite second moment");
    }

    std::vector<double> integrand(N + 1);
    for (int i = 0; i <= N; ++i) {
        const Eigen::VectorXd& K = ric.K[i];
        const Eigen::VectorXd& k = sol.k[i];
        const Eigen::MatrixXd& R = spec.R[i];
        integrand[i] = spec.Q[i] * v[i] + K.dot(R * K) * v[i] + 2.0 * k.dot(R * K) * sol.m[i] +
                       k.dot(R * k);
    }
    return 0.5 * trapezoid(ScalarGrid(g, std::move(integrand))) + 0.5 * spec.G * v[N];
}

}  // namespace meanref
