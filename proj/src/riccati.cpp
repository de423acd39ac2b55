#include "meanref/riccati.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace meanref {

namespace {

struct StageCoefficients {
    double A;
    double Q;
    double C2;          // |C|^2
    Eigen::VectorXd w;  // B + D^T C
    Eigen::MatrixXd DtD;
    Eigen::MatrixXd R;
};

StageCoefficients stage_at(const ProblemSpec& spec, double t) {
    StageCoefficients s;
    s.A = spec.A(t);
    s.Q = spec.Q(t);
    const Eigen::VectorXd C = spec.C(t);
    const Eigen::MatrixXd D = spec.D(t);
    s.C2 = C.squaredNorm();
    s.w = spec.B(t) + D.transpose() * C;
    s.DtD = D.transpose() * D;
    s.R = spec.R(t);
    return s;
}

// P' = -(2 A P + |C|^2 P + Q - P^2 w^T S^-1 w), S = R + P D^T D.
double riccati_rhs(const StageCoefficients& c, double P) {
    Eigen::MatrixXd S = c.R + P * c.DtD;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("solve_riccati: S = R + P D^T D lost positive definiteness");
    const double quad = c.w.dot(llt.solve(c.w));
    return -(2.0 * c.A * P + c.C2 * P + c.Q - P * P * quad);
}

}  // namespace

RiccatiSolution solve_riccati(const ProblemSpec& spec) {
    const TimeGrid& g = spec.grid;
    const int N = g.steps();
    const double h = g.spacing();

    std::vector<double> P(N + 1);
    P[N] = spec.G;
    for (int i = N; i >= 1; --i) {
        const double t1 = g.node(i);
        const double t0 = g.node(i - 1);
        const double tm = 0.5 * (t0 + t1);
        const StageCoefficients c1 = stage_at(spec, t1);
        const StageCoefficients cm = stage_at(spec, tm);
        const StageCoefficients c0 = stage_at(spec, t0);

        const double k1 = riccati_rhs(c1, P[i]);
        const double k2 = riccati_rhs(cm, P[i] - 0.5 * h * k1);
        const double k3 = riccati_rhs(cm, P[i] - 0.5 * h * k2);
        const double k4 = riccati_rhs(c0, P[i] - h * k3);
        P[i - 1] = P[i] - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(P[i - 1]))
            throw std::runtime_error("solve_riccati: non-finite value (blow-up)");
    }

    std::vector<Eigen::VectorXd> K(N + 1);
    std::vector<Eigen::MatrixXd> S(N + 1);
    for (int i = 0; i <= N; ++i) {
        const StageCoefficients c = stage_at(spec, g.node(i));
        S[i] = c.R + P[i] * c.DtD;
        Eigen::LLT<Eigen::MatrixXd> llt(S[i]);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("solve_riccati: S lost positive definiteness at a node");
        K[i] = llt.solve(c.w) * P[i];
    }

    return RiccatiSolution{ScalarGrid(g, std::move(P)), VectorGrid(g, std::move(K)),
                           MatrixGrid(g, std::move(S))};
}

Eigen::VectorXd gain_at(const RiccatiSolution& sol, double t) {
    return sol.K(t);
}

}  // namespace meanref
