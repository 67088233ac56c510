#pragma once

#include <Eigen/Dense>

#include <optional>

#include "iccnls/qp_assembly.hpp"

namespace iccnls {

/// Lagrangian convention: 0.5 z'Pz + q'z + mu'(Az - b) + nu'(Cz - e) with mu >= 0.
struct Solution {
    Eigen::VectorXd point;
    Eigen::VectorXd ineq_duals;
    Eigen::VectorXd eq_duals;
    SolverStatus status = SolverStatus::MaxIter;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective_value = 0.0;
};

struct SolverSettings {
    double tol = 1e-6;
    int max_iter = 500;
    /// Starting primal point; the origin when empty.
    std::optional<Eigen::VectorXd> initial_point;
};

/// Primal-dual interior-point method (Mehrotra predictor-corrector) on the
/// dense normal equations P + A'DA. Equality rows are handled through a
/// Schur complement after an up-front rank check.
///
/// Optimal means: max(Az - b) <= tol (1 + |b|inf), |Cz - e|inf <= tol (1 + |e|inf),
/// |Pz + q + A'mu + C'nu|inf <= tol * scale and the complementarity gap is
/// below tol (1 + |objective|).
Solution solve(const QpProblem& problem, const SolverSettings& settings);
Solution solve(const QpProblem& problem, double tol = 1e-6, int max_iter = 500);

/// Dense reference solver for tiny problems: proximal-point outer loop around a
/// Goldfarb-Idnani dual active-set method with explicit KKT algebra.
/// Throws TooLarge beyond 200 variables or 400 inequality rows.
Solution solve_reference(const QpProblem& problem);

struct KktResiduals {
    double primal_inf = 0.0;
    double dual_inf = 0.0;
    double comp_slack = 0.0;
};

/// Absolute infinity-norm violations of feasibility, stationarity (including dual
/// sign) and complementary slackness.
KktResiduals kkt_residuals(const QpProblem& problem, const Solution& candidate);

/// Splits equality rows into an independent subset; throws Infeasible when a
/// dependent row contradicts the kept ones. Returned indices are row numbers.
std::vector<Eigen::Index> independent_equalities(const Eigen::MatrixXd& lhs, const Eigen::VectorXd& rhs);

}  // namespace iccnls
