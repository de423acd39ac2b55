#include "meanref/tree_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace meanref {

namespace {

double negative_part(double z) { return z < 0.0 ? -z : 0.0; }

// States at every tree node, level by level: states[i] has 2^i entries.
using TreeStates = std::vector<std::vector<double>>;

TreeStates forward_states(const TreeProblem& tp, const Eigen::VectorXd& controls) {
    TreeStates X(tp.steps + 1);
    X[0] = {tp.x};
    const double sqrt_h = std::sqrt(tp.h);
    for (int i = 0; i < tp.steps; ++i) {
        const int count = 1 << i;
        X[i + 1].resize(2 * count);
        const double drift_gain = 1.0 + tp.A[i] * tp.h;
        for (int j = 0; j < count; ++j) {
            const auto u = controls.segment(tp.level_offset(i) + j * tp.control_dim,
                                            tp.control_dim);
            const double bu = tp.h * tp.B[i].dot(u);
            const double du = tp.D[i].dot(u);
            const double x = X[i][j];
            X[i + 1][2 * j] = drift_gain * x + bu + sqrt_h * (tp.C[i] * x + du);
            X[i + 1][2 * j + 1] = drift_gain * x + bu - sqrt_h * (tp.C[i] * x + du);
        }
    }
    return X;
}

std::vector<double> level_means(const TreeProblem& tp, const TreeStates& X) {
    std::vector<double> mean(tp.steps + 1);
    for (int i = 0; i <= tp.steps; ++i) {
        const double prob = std::ldexp(1.0, -i);  // 2^-i
        double s = 0.0;
        for (double x : X[i]) s += x;
        mean[i] = prob * s;
    }
    return mean;
}

}  // namespace

TreeProblem TreeProblem::build(const ProblemSpec& spec, int steps, double penalty_n) {
    if (spec.noise_dim != 1)
        throw std::invalid_argument("TreeProblem: the tree oracle needs a single Brownian driver");
    if (steps < 1 || steps > 12)
        throw std::invalid_argument("TreeProblem: steps must be in [1, 12]");

    TreeProblem tp;
    tp.steps = steps;
    tp.control_dim = spec.control_dim;
    tp.h = spec.grid.horizon() / steps;
    tp.x = spec.x0;
    tp.G = spec.G;
    tp.penalty_n = penalty_n;
    tp.A.resize(steps + 1);
    tp.C.resize(steps + 1);
    tp.Q.resize(steps + 1);
    tp.L.resize(steps + 1);
    tp.B.resize(steps + 1);
    tp.D.resize(steps + 1);
    tp.R.resize(steps + 1);
    for (int i = 0; i <= steps; ++i) {
        const double t = std::min(i * tp.h, spec.grid.horizon());
        tp.A[i] = spec.A(t);
        tp.C[i] = spec.C(t)(0);
        tp.Q[i] = spec.Q(t);
        tp.L[i] = spec.L(t);
        tp.B[i] = spec.B(t);
        tp.D[i] = spec.D(t).row(0).transpose();
        tp.R[i] = spec.R(t);
    }
    return tp;
}

double tree_objective(const TreeProblem& tp, const Eigen::VectorXd& controls) {
    if (controls.size() != tp.control_count())
        throw std::invalid_argument("tree_objective: control vector has the wrong size");
    const TreeStates X = forward_states(tp, controls);
    const std::vector<double> mean = level_means(tp, X);

    double J = 0.0;
    for (int i = 0; i < tp.steps; ++i) {
        const int count = 1 << i;
        const double prob = std::ldexp(1.0, -i);
        double ex2 = 0.0, eur = 0.0;
        for (int j = 0; j < count; ++j) {
            const auto u = controls.segment(tp.level_offset(i) + j * tp.control_dim,
                                            tp.control_dim);
            ex2 += X[i][j] * X[i][j];
            eur += u.dot(tp.R[i] * u);
        }
        J += 0.5 * tp.h * prob * (tp.Q[i] * ex2 + eur);
        const double neg = negative_part(mean[i] - tp.L[i]);
        J += 0.5 * tp.penalty_n * tp.h * neg * neg;
    }
    const double prob_T = std::ldexp(1.0, -tp.steps);
    double ex2 = 0.0;
    for (double x : X[tp.steps]) ex2 += x * x;
    J += 0.5 * tp.G * prob_T * ex2;
    return J;
}

TreeGradient tree_gradient(const TreeProblem& tp, const Eigen::VectorXd& controls) {
    if (controls.size() != tp.control_count())
        throw std::invalid_argument("tree_gradient: control vector has the wrong size");
    const TreeStates X = forward_states(tp, controls);
    const std::vector<double> mean = level_means(tp, X);
    const double sqrt_h = std::sqrt(tp.h);

    TreeGradient out;
    out.grad.resize(controls.size());

    // lambda[j] = dJ/dX at the nodes of the current level (probability
    // weighted); swept backward from the terminal level.
    const int leaves = 1 << tp.steps;
    std::vector<double> lambda(leaves), lambda_next;
    const double prob_T = std::ldexp(1.0, -tp.steps);
    for (int j = 0; j < leaves; ++j) lambda[j] = prob_T * tp.G * X[tp.steps][j];

    for (int i = tp.steps - 1; i >= 0; --i) {
        const int count = 1 << i;
        const double prob = std::ldexp(1.0, -i);
        const double penalty_pull = -tp.penalty_n * tp.h * negative_part(mean[i] - tp.L[i]);
        const double a_plus = 1.0 + tp.A[i] * tp.h + tp.C[i] * sqrt_h;
        const double a_minus = 1.0 + tp.A[i] * tp.h - tp.C[i] * sqrt_h;

        lambda_next.assign(count, 0.0);
        for (int j = 0; j < count; ++j) {
            const double lp = lambda[2 * j];
            const double lm = lambda[2 * j + 1];
            const auto u = controls.segment(tp.level_offset(i) + j * tp.control_dim,
                                            tp.control_dim);
            out.grad.segment(tp.level_offset(i) + j * tp.control_dim, tp.control_dim) =
                prob * tp.h * (tp.R[i] * u) + (lp + lm) * tp.h * tp.B[i] +
                (lp - lm) * sqrt_h * tp.D[i];
            lambda_next[j] = prob * (tp.h * tp.Q[i] * X[i][j] + penalty_pull) +
                             lp * a_plus + lm * a_minus;
        }
        lambda.swap(lambda_next);
    }
    out.root_adjoint = lambda[0];
    return out;
}

TreeMinimizeResult tree_minimize(const TreeProblem& tp, const Eigen::VectorXd& init,
                                 const TreeMinimizeOptions& opts) {
    Eigen::VectorXd u = init;
    if (u.size() != tp.control_count())
        throw std::invalid_argument("tree_minimize: init has the wrong size");

    double J = tree_objective(tp, u);
    TreeGradient g = tree_gradient(tp, u);
    Eigen::VectorXd u_prev, g_prev;
    double step = 1.0 / (1.0 + g.grad.norm());

    // Nonmonotone Armijo backtracking (memory of the last few objectives)
    // with a Barzilai-Borwein trial step; plain descent crawls on the
    // penalty-dominated curvature scales.
    constexpr int memory = 10;
    std::vector<double> recent{J};

    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        const double gnorm = g.grad.norm();
        if (gnorm <= opts.grad_tol * (1.0 + std::abs(J))) break;

        if (opts.barzilai_borwein && iter > 0) {
            const Eigen::VectorXd s = u - u_prev;
            const Eigen::VectorXd y = g.grad - g_prev;
            const double sy = s.dot(y);
            if (sy > 1e-300) step = s.dot(s) / sy;
        }
        step = std::min(std::max(step, 1e-12), 1e12);

        const double ref = *std::max_element(recent.begin(), recent.end());
        const double slope = g.grad.squaredNorm();
        double trial_step = step;
        Eigen::VectorXd u_trial;
        double J_trial = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            u_trial = u - trial_step * g.grad;
            J_trial = tree_objective(tp, u_trial);
            if (J_trial <= ref - 1e-4 * trial_step * slope) {
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if (!accepted) break;  // step collapsed below resolution

        u_prev = u;
        g_prev = g.grad;
        u = u_trial;
        J = J_trial;
        g = tree_gradient(tp, u);
        recent.push_back(J);
        if (static_cast<int>(recent.size()) > memory) recent.erase(recent.begin());
        step = trial_step;
    }

    const double gnorm = g.grad.norm();
    return TreeMinimizeResult{std::move(u), J,       iter,
                              gnorm,        g.root_adjoint,
                              gnorm <= opts.grad_tol * (1.0 + std::abs(J))};
}

std::vector<double> tree_mean_path(const TreeProblem& tp, const Eigen::VectorXd& controls) {
    return level_means(tp, forward_states(tp, controls));
}

Eigen::VectorXd tree_controls_from_policy(const TreeProblem& tp, const FeedbackPolicy& policy) {
    Eigen::VectorXd controls(tp.control_count());
    std::vector<double> level = {tp.x};
    const double sqrt_h = std::sqrt(tp.h);
    for (int i = 0; i < tp.steps; ++i) {
        const double t = std::min(i * tp.h, policy.K.grid().horizon());
        const Eigen::VectorXd K = policy.K(t);
        const Eigen::VectorXd k = policy.k(t);
        const int count = 1 << i;
        std::vector<double> next(2 * count);
        for (int j = 0; j < count; ++j) {
            const double x = level[j];
            const Eigen::VectorXd u = -(K * x + k);
            controls.segment(tp.level_offset(i) + j * tp.control_dim, tp.control_dim) = u;
            const double drift = x + (tp.A[i] * x + tp.B[i].dot(u)) * tp.h;
            const double vol = sqrt_h * (tp.C[i] * x + tp.D[i].dot(u));
            next[2 * j] = drift + vol;
            next[2 * j + 1] = drift - vol;
        }
        level.swap(next);
    }
    return controls;
}

}  // namespace meanref
