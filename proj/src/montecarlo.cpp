#include "meanref/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "meanref/philox.hpp"

namespace meanref {

FeedbackPolicy policy_from(const RiccatiSolution& ric) {
    const TimeGrid& g = ric.K.grid();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ric.K[0].size());
    return FeedbackPolicy{ric.K, VectorGrid::constant(g, zero)};
}

FeedbackPolicy policy_from(const RiccatiSolution& ric, const MeanSolution& sol) {
    return FeedbackPolicy{ric.K, sol.k};
}

FeedbackPolicy resample(const FeedbackPolicy& policy, const TimeGrid& grid) {
    return FeedbackPolicy{policy.K.resample(grid), policy.k.resample(grid)};
}

namespace {

struct PathTables {
    // Scalar fast path (l = m = 1); empty when the generic path is used.
    std::vector<double> a, b, c, d, q, r, gK, gk;
};

bool scalar_problem(const ProblemSpec& spec) {
    return spec.control_dim == 1 && spec.noise_dim == 1;
}

PathTables build_scalar_tables(const ProblemSpec& spec, const FeedbackPolicy& policy) {
    const int n = spec.grid.node_count();
    PathTables t;
    t.a.resize(n);
    t.b.resize(n);
    t.c.resize(n);
    t.d.resize(n);
    t.q.resize(n);
    t.r.resize(n);
    t.gK.resize(n);
    t.gk.resize(n);
    for (int i = 0; i < n; ++i) {
        t.a[i] = spec.A[i];
        t.b[i] = spec.B[i](0);
        t.c[i] = spec.C[i](0);
        t.d[i] = spec.D[i](0, 0);
        t.q[i] = spec.Q[i];
        t.r[i] = spec.R[i](0, 0);
        t.gK[i] = policy.K[i](0);
        t.gk[i] = policy.k[i](0);
    }
    return t;
}

// One Euler path; noise comes from the prefilled buffer scaled by sign.
// Returns the left-endpoint running cost plus terminal cost and fills the
// nodal state values.
double run_path_scalar(const ProblemSpec& spec, const PathTables& t,
                       const std::vector<double>& z, double sign, std::vector<double>& xs) {
    const int N = spec.grid.steps();
    const double h = spec.grid.spacing();
    const double sqrt_h = std::sqrt(h);
    double X = spec.x0;
    double cost = 0.0;
    xs[0] = X;
    for (int i = 0; i < N; ++i) {
        const double u = -(t.gK[i] * X + t.gk[i]);
        cost += 0.5 * h * (t.q[i] * X * X + t.r[i] * u * u);
        const double dw = sign * z[i] * sqrt_h;
        X += (t.a[i] * X + t.b[i] * u) * h + (t.c[i] * X + t.d[i] * u) * dw;
        xs[i + 1] = X;
    }
    cost += 0.5 * spec.G * X * X;
    return cost;
}

double run_path_generic(const ProblemSpec& spec, const FeedbackPolicy& policy,
                        const std::vector<double>& z, double sign, std::vector<double>& xs) {
    const int N = spec.grid.steps();
    const int m = spec.noise_dim;
    const double h = spec.grid.spacing();
    const double sqrt_h = std::sqrt(h);
    double X = spec.x0;
    double cost = 0.0;
    xs[0] = X;
    Eigen::VectorXd u, diff;
    for (int i = 0; i < N; ++i) {
        u = -(policy.K[i] * X + policy.k[i]);
        cost += 0.5 * h * (spec.Q[i] * X * X + u.dot(spec.R[i] * u));
        diff = spec.C[i] * X + spec.D[i] * u;
        double noise = 0.0;
        for (int j = 0; j < m; ++j) noise += diff(j) * z[i * m + j];
        X += (spec.A[i] * X + spec.B[i].dot(u)) * h + sign * sqrt_h * noise;
        xs[i + 1] = X;
    }
    cost += 0.5 * spec.G * X * X;
    return cost;
}

void check_policy_grid(const FeedbackPolicy& policy, const TimeGrid& grid, const char* who) {
    if (!(policy.K.grid() == grid) || !(policy.k.grid() == grid)) {
        std::ostringstream os;
        os << who << ": policy must live on the simulation grid";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

MCResult simulate(const ProblemSpec& spec_in, const FeedbackPolicy& policy, const MCConfig& cfg) {
    check_policy_grid(policy, cfg.grid, "simulate");
    if (cfg.paths < 2)
        throw std::invalid_argument("simulate: at least two paths are needed for standard errors");
    if (cfg.antithetic && cfg.paths % 2 != 0)
        throw std::invalid_argument("simulate: antithetic pairing requires an even path count");

    const ProblemSpec spec =
        (spec_in.grid == cfg.grid) ? spec_in : spec_in.resample(cfg.grid.steps());
    const int N = spec.grid.steps();
    const int m = spec.noise_dim;
    const long samples = cfg.antithetic ? cfg.paths / 2 : cfg.paths;
    const bool scalar = scalar_problem(spec);
    const PathTables tables = scalar ? build_scalar_tables(spec, policy) : PathTables{};

    std::vector<double> node_sum(N + 1, 0.0), node_sumsq(N + 1, 0.0);
    double cost_sum = 0.0, cost_sumsq = 0.0, x2_sum = 0.0;
    std::vector<double> z(static_cast<size_t>(N) * m);
    std::vector<double> xs(N + 1), xs2(N + 1);

    for (long s = 0; s < samples; ++s) {
        const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(2 * s)
                                                    : static_cast<std::uint64_t>(s);
        NormalStream ns(cfg.seed, stream);
        for (double& v : z) v = ns.next();

        double sample_cost;
        if (cfg.antithetic) {
            const double c0 = scalar ? run_path_scalar(spec, tables, z, 1.0, xs)
                                     : run_path_generic(spec, policy, z, 1.0, xs);
            const double c1 = scalar ? run_path_scalar(spec, tables, z, -1.0, xs2)
                                     : run_path_generic(spec, policy, z, -1.0, xs2);
            if (!std::isfinite(c0) || !std::isfinite(c1)) {
                std::ostringstream os;
                os << "simulate: non-finite trajectory at path " << 2 * s;
                throw std::runtime_error(os.str());
            }
            sample_cost = 0.5 * (c0 + c1);
            x2_sum += xs[N] * xs[N] + xs2[N] * xs2[N];
            for (int i = 0; i <= N; ++i) {
                const double v = 0.5 * (xs[i] + xs2[i]);
                node_sum[i] += v;
                node_sumsq[i] += v * v;
            }
        } else {
            sample_cost = scalar ? run_path_scalar(spec, tables, z, 1.0, xs)
                                 : run_path_generic(spec, policy, z, 1.0, xs);
            if (!std::isfinite(sample_cost) || !std::isfinite(xs[N])) {
                std::ostringstream os;
                os << "simulate: non-finite trajectory at path " << s;
                throw std::runtime_error(os.str());
            }
            x2_sum += xs[N] * xs[N];
            for (int i = 0; i <= N; ++i) {
                node_sum[i] += xs[i];
                node_sumsq[i] += xs[i] * xs[i];
            }
        }
        cost_sum += sample_cost;
        cost_sumsq += sample_cost * sample_cost;
    }

    const double ns = static_cast<double>(samples);
    auto standard_error = [ns](double sum, double sumsq) {
        const double mean = sum / ns;
        const double var = std::max(0.0, (sumsq - ns * mean * mean) / (ns - 1.0));
        return std::sqrt(var / ns);
    };

    std::vector<double> mean(N + 1), se(N + 1);
    for (int i = 0; i <= N; ++i) {
        mean[i] = node_sum[i] / ns;
        se[i] = standard_error(node_sum[i], node_sumsq[i]);
    }

    MCResult r{cost_sum / ns,
               standard_error(cost_sum, cost_sumsq),
               ScalarGrid(spec.grid, std::move(mean)),
               ScalarGrid(spec.grid, std::move(se)),
               x2_sum / static_cast<double>(cfg.paths)};
    return r;
}

EulerMoments euler_moments(const ProblemSpec& spec_in, const FeedbackPolicy& policy,
                           const TimeGrid& grid) {
    check_policy_grid(policy, grid, "euler_moments");
    const ProblemSpec spec = (spec_in.grid == grid) ? spec_in : spec_in.resample(grid.steps());
    const int N = grid.steps();
    const double h = grid.spacing();

    std::vector<double> mean(N + 1), second(N + 1);
    mean[0] = spec.x0;
    second[0] = spec.x0 * spec.x0;
    double cost = 0.0;
    for (int i = 0; i < N; ++i) {
        const Eigen::VectorXd& K = policy.K[i];
        const Eigen::VectorXd& k = policy.k[i];
        const Eigen::VectorXd& B = spec.B[i];
        const Eigen::MatrixXd& R = spec.R[i];
        const Eigen::VectorXd CDK = spec.C[i] - spec.D[i] * K;
        const Eigen::VectorXd Dk = spec.D[i] * k;

        cost += 0.5 * h *
                (spec.Q[i] * second[i] + K.dot(R * K) * second[i] +
                 2.0 * k.dot(R * K) * mean[i] + k.dot(R * k));

        const double a = 1.0 + (spec.A[i] - B.dot(K)) * h;
        const double b = h * B.dot(k);
        mean[i + 1] = a * mean[i] - b;
        second[i + 1] = a * a * second[i] - 2.0 * a * b * mean[i] + b * b +
                        h * (CDK.squaredNorm() * second[i] - 2.0 * CDK.dot(Dk) * mean[i] +
                             Dk.squaredNorm());
    }
    cost += 0.5 * spec.G * second[N];
    return EulerMoments{ScalarGrid(grid, std::move(mean)), ScalarGrid(grid, std::move(second)),
                        cost};
}

ParallelogramResult parallelogram_check(const ProblemSpec& spec_in,
                                        const FeedbackPolicy& u_policy,
                                        const FeedbackPolicy& v_policy, const MCConfig& cfg) {
    check_policy_grid(u_policy, cfg.grid, "parallelogram_check");
    check_policy_grid(v_policy, cfg.grid, "parallelogram_check");
    if (cfg.paths < 1)
        throw std::invalid_argument("parallelogram_check: need at least one path");

    const ProblemSpec spec =
        (spec_in.grid == cfg.grid) ? spec_in : spec_in.resample(cfg.grid.steps());
    const int N = spec.grid.steps();
    const int m = spec.noise_dim;
    const double h = spec.grid.spacing();
    const double sqrt_h = std::sqrt(h);

    double lhs_sum = 0.0, rhs_sum = 0.0;
    std::vector<double> z(static_cast<size_t>(N) * m);
    Eigen::VectorXd uu, uv, um, du, diff;

    for (long path = 0; path < cfg.paths; ++path) {
        NormalStream nsr(cfg.seed, static_cast<std::uint64_t>(path));
        for (double& v : z) v = nsr.next();

        double Xu = spec.x0, Xv = spec.x0, Xm = spec.x0;
        double ju = 0.0, jv = 0.0, jm = 0.0, rhs = 0.0;
        for (int i = 0; i < N; ++i) {
            const Eigen::MatrixXd& R = spec.R[i];
            uu = -(u_policy.K[i] * Xu + u_policy.k[i]);
            uv = -(v_policy.K[i] * Xv + v_policy.k[i]);
            um = 0.5 * (uu + uv);  // midpoint control process, not midpoint feedback
            du = uu - uv;

            ju += 0.5 * h * (spec.Q[i] * Xu * Xu + uu.dot(R * uu));
            jv += 0.5 * h * (spec.Q[i] * Xv * Xv + uv.dot(R * uv));
            jm += 0.5 * h * (spec.Q[i] * Xm * Xm + um.dot(R * um));
            rhs += h * (spec.Q[i] * (Xu - Xv) * (Xu - Xv) + du.dot(R * du));

            double wu = 0.0, wv = 0.0, wm = 0.0;
            for (int j = 0; j < m; ++j) {
                const double dw = z[i * m + j] * sqrt_h;
                diff = spec.C[i] * Xu + spec.D[i] * uu;
                wu += diff(j) * dw;
                diff = spec.C[i] * Xv + spec.D[i] * uv;
                wv += diff(j) * dw;
                diff = spec.C[i] * Xm + spec.D[i] * um;
                wm += diff(j) * dw;
            }
            Xu += (spec.A[i] * Xu + spec.B[i].dot(uu)) * h + wu;
            Xv += (spec.A[i] * Xv + spec.B[i].dot(uv)) * h + wv;
            Xm += (spec.A[i] * Xm + spec.B[i].dot(um)) * h + wm;
        }
        ju += 0.5 * spec.G * Xu * Xu;
        jv += 0.5 * spec.G * Xv * Xv;
        jm += 0.5 * spec.G * Xm * Xm;
        rhs += spec.G * (Xu - Xv) * (Xu - Xv);

        lhs_sum += ju + jv - 2.0 * jm;
        rhs_sum += 0.25 * rhs;
    }

    const double n = static_cast<double>(cfg.paths);
    ParallelogramResult r{lhs_sum / n, rhs_sum / n, 0.0};
    r.gap = r.lhs - r.rhs;
    return r;
}

namespace {

VectorGrid bump_grid(const VectorGrid& base, std::mt19937_64& rng, double amplitude, int bumps,
                     const Eigen::VectorXd& direction) {
    const TimeGrid& g = base.grid();
    const double T = g.horizon();
    const int dim = static_cast<int>(base[0].size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Eigen::VectorXd> values(base.values());
    for (int b = 0; b < bumps; ++b) {
        const double center = unit(rng) * T;
        const double width = (0.05 + 0.2 * unit(rng)) * T;
        Eigen::VectorXd amp(dim);
        for (int j = 0; j < dim; ++j) {
            double a = amplitude * (2.0 * unit(rng) - 1.0);
            if (direction.size() == dim && direction(j) != 0.0)
                a = -std::abs(a) * direction(j);
            amp(j) = a;
        }
        for (int i = 0; i < base.node_count(); ++i) {
            const double t = g.node(i);
            const double shape = std::exp(-0.5 * (t - center) * (t - center) / (width * width));
            values[i] += amp * shape;
        }
    }
    return VectorGrid(g, std::move(values));
}

}  // namespace

FuzzReport verification_fuzz(const ProblemSpec& spec, const FeedbackPolicy& optimal, int trials,
                             const MCConfig& cfg, const FuzzSettings& settings) {
    const MCResult base = simulate(spec, optimal, cfg);
    const ScalarGrid L = spec.L.resample(cfg.grid);

    double k_scale = 0.0, K_scale = 0.0;
    for (int i = 0; i < optimal.k.node_count(); ++i) {
        k_scale = std::max(k_scale, optimal.k[i].cwiseAbs().maxCoeff());
        K_scale = std::max(K_scale, optimal.K[i].cwiseAbs().maxCoeff());
    }
    // Sign of the time-averaged B: pushing u along it raises the mean, which
    // biases a fraction of the trials toward admissibility.
    Eigen::VectorXd b_avg = Eigen::VectorXd::Zero(spec.control_dim);
    for (int i = 0; i < spec.B.node_count(); ++i) b_avg += spec.B[i];
    const Eigen::VectorXd b_sign = b_avg.unaryExpr([](double v) {
        return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    });
    const Eigen::VectorXd unbiased = Eigen::VectorXd::Zero(0);

    std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    FuzzReport report;
    report.trials = trials;
    report.optimal_cost = base.cost_mean;
    report.optimal_se = base.cost_se;
    report.min_gap = std::numeric_limits<double>::infinity();

    for (int trial = 0; trial < trials; ++trial) {
        const bool biased = unit(rng) < settings.bias_fraction;
        FeedbackPolicy perturbed{
            bump_grid(optimal.K, rng, settings.amplitude * (1.0 + K_scale), settings.bumps,
                      biased ? b_sign : unbiased),
            bump_grid(optimal.k, rng, settings.amplitude * (1.0 + k_scale), settings.bumps,
                      biased ? b_sign : unbiased)};

        const MCResult sim = simulate(spec, perturbed, cfg);
        bool admissible = true;
        for (int i = 0; i < sim.mean_path.node_count(); ++i) {
            if (sim.mean_path[i] < L[i] - 2.0 * sim.mean_path_se[i]) {
                admissible = false;
                break;
            }
        }

        const double gap = sim.cost_mean - base.cost_mean;
        report.rows.push_back({admissible, sim.cost_mean, sim.cost_se, gap});
        if (!admissible) {
            ++report.excluded;
            continue;
        }
        ++report.admissible;
        report.min_gap = std::min(report.min_gap, gap);
        const double combined = std::sqrt(sim.cost_se * sim.cost_se + base.cost_se * base.cost_se);
        if (gap < -3.0 * combined) ++report.violations;
    }
    if (report.admissible == 0) report.min_gap = 0.0;
    return report;
}

}  // namespace meanref
