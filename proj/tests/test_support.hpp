#pragma once

#include <cmath>
#include <random>

#include "meanref/montecarlo.hpp"
#include "meanref/problem_spec.hpp"

namespace meanref::testing {

// A = C = D = 0, B = 1, Q = 0, R = 1, G = 1: the Riccati equation collapses
// to P' = P^2, P_1 = 1, whose solution is P_t = 1/(2 - t); P_0 = 1/2.
inline ProblemSpec closed_form_spec(int steps) {
    return make_scalar_spec(1.0, steps, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, -1e6, 1.0);
}

// Binding instance with a fully worked solution: A = 0, B = 1, C = 0,
// D = 1, Q = 1, R = 1, G = 0, L = 1, x = 1. The state cost pushes the mean
// down, the floor holds it at L, and the stationary system is solved by
// m = 1, p = -P, nu = 1, so mu is Lebesgue measure, Y_0 = 0 and the value
// is T/2 = 1/2 exactly. On-path the optimal control vanishes and X = 1 a.s.
inline ProblemSpec binding_clean_spec(int steps) {
    return make_scalar_spec(1.0, steps, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0);
}

// Same structure with state noise C = 0.25, so simulated costs have real
// variance. The mean problem still pins m = 1 with p = -w P, w = 1 + DC,
// and density nu = w (C^2 P + Q + (w - w^2) P^2 / (1 + P)).
inline ProblemSpec binding_noisy_spec(int steps) {
    return make_scalar_spec(1.0, steps, 0.0, 1.0, 0.25, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0);
}

// Starts above the floor (x = 1.3 > L = 1); the mean decays and hits the
// floor in the interior, so the compensator is supported on a sub-interval.
inline ProblemSpec binding_partial_spec(int steps) {
    return make_scalar_spec(1.0, steps, 0.0, 1.0, 0.25, 1.0, 1.0, 1.0, 0.0, 1.0, 1.3);
}

inline ProblemSpec unconstrained_spec(int steps) {
    return make_scalar_spec(1.0, steps, 0.0, 1.0, 0.25, 1.0, 1.0, 1.0, 0.0, -1e6, 1.0);
}

/// Valid random spec: R >= 0.5 I, Q >= 0, G >= 0, |B|^2 >= 0.16 and
/// L_0 <= x. A and Q vary linearly in t (exactly representable on any
/// grid), the matrix coefficients are constant.
inline ProblemSpec make_random_spec(std::mt19937_64& rng, bool binding) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 2);
    const int l = dim(rng);
    const int m = dim(rng);
    const int steps = 400;
    TimeGrid grid(1.0, steps);

    Eigen::VectorXd B(l), C(m);
    for (int i = 0; i < l; ++i) B(i) = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.4 + 0.8 * unit(rng));
    for (int i = 0; i < m; ++i) C(i) = -0.5 + unit(rng);
    Eigen::MatrixXd D(m, l);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < l; ++c) D(r, c) = -0.5 + unit(rng);
    Eigen::MatrixXd M(l, l);
    for (int r = 0; r < l; ++r)
        for (int c = 0; c < l; ++c) M(r, c) = -0.5 + unit(rng);
    const Eigen::MatrixXd R =
        (0.5 + 0.5 * unit(rng)) * Eigen::MatrixXd::Identity(l, l) + 0.2 * M.transpose() * M;

    const double a0 = -1.0 + 2.0 * unit(rng), a1 = -0.5 + unit(rng);
    const double q0 = 2.0 * unit(rng), q1 = unit(rng);
    const double G = unit(rng);
    const double x0 = 0.5 + unit(rng);
    const double L0 = binding ? x0 - 0.05 - 0.3 * unit(rng) : x0 - 1.5 - unit(rng);

    return ProblemSpec{grid,
                       l,
                       m,
                       ScalarGrid::sampled(grid, [=](double t) { return a0 + a1 * t; }),
                       VectorGrid::constant(grid, B),
                       VectorGrid::constant(grid, C),
                       MatrixGrid::constant(grid, D),
                       ScalarGrid::sampled(grid, [=](double t) { return q0 + q1 * t; }),
                       MatrixGrid::constant(grid, R),
                       ScalarGrid::constant(grid, L0),
                       G,
                       x0};
}

/// Smooth random affine policy on the grid of the given spec.
inline FeedbackPolicy make_random_policy(const ProblemSpec& spec, std::mt19937_64& rng,
                                         double scale = 0.5) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const int l = spec.control_dim;
    const double aK = scale * unit(rng), bK = scale * unit(rng), cK = scale * unit(rng);
    const double ak = scale * unit(rng), bk = scale * unit(rng), ck = scale * unit(rng);
    auto K = VectorGrid::sampled(spec.grid, [&](double t) {
        Eigen::VectorXd v(l);
        for (int j = 0; j < l; ++j) v(j) = aK + bK * t + cK * std::sin(3.0 * t + j);
        return v;
    });
    auto k = VectorGrid::sampled(spec.grid, [&](double t) {
        Eigen::VectorXd v(l);
        for (int j = 0; j < l; ++j) v(j) = ak + bk * t + ck * std::cos(2.0 * t - j);
        return v;
    });
    return FeedbackPolicy{std::move(K), std::move(k)};
}

/// Reference cost of an affine policy by integrating the joint (mean,
/// second moment) ODE with RK4; independent of cost_via_moments, which
/// trusts a precomputed mean path.
inline double policy_cost_reference(const ProblemSpec& spec, const FeedbackPolicy& policy) {
    const TimeGrid& g = spec.grid;
    const int N = g.steps();
    const double h = g.spacing();
    auto rhs = [&](double t, double m, double v, double& dm, double& dv) {
        const Eigen::VectorXd K = policy.K(t);
        const Eigen::VectorXd k = policy.k(t);
        const Eigen::VectorXd B = spec.B(t);
        const Eigen::VectorXd CDK = spec.C(t) - spec.D(t) * K;
        const Eigen::VectorXd Dk = spec.D(t) * k;
        const double a = spec.A(t) - B.dot(K);
        dm = a * m - B.dot(k);
        dv = 2.0 * a * v - 2.0 * B.dot(k) * m + CDK.squaredNorm() * v - 2.0 * CDK.dot(Dk) * m +
             Dk.squaredNorm();
    };
    double m = spec.x0, v = spec.x0 * spec.x0;
    std::vector<double> integrand(N + 1);
    auto cost_at = [&](int i, double mm, double vv) {
        const Eigen::VectorXd& K = policy.K[i];
        const Eigen::VectorXd& k = policy.k[i];
        const Eigen::MatrixXd& R = spec.R[i];
        return spec.Q[i] * vv + K.dot(R * K) * vv + 2.0 * k.dot(R * K) * mm + k.dot(R * k);
    };
    integrand[0] = cost_at(0, m, v);
    for (int i = 0; i < N; ++i) {
        const double t0 = g.node(i), tm = t0 + 0.5 * h, t1 = g.node(i + 1);
        double dm1, dv1, dm2, dv2, dm3, dv3, dm4, dv4;
        rhs(t0, m, v, dm1, dv1);
        rhs(tm, m + 0.5 * h * dm1, v + 0.5 * h * dv1, dm2, dv2);
        rhs(tm, m + 0.5 * h * dm2, v + 0.5 * h * dv2, dm3, dv3);
        rhs(t1, m + h * dm3, v + h * dv3, dm4, dv4);
        m += (h / 6.0) * (dm1 + 2.0 * dm2 + 2.0 * dm3 + dm4);
        v += (h / 6.0) * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4);
        integrand[i + 1] = cost_at(i + 1, m, v);
    }
    return 0.5 * trapezoid(ScalarGrid(g, std::move(integrand))) + 0.5 * spec.G * v;
}

}  // namespace meanref::testing
