#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "iccnls/qp_solver.hpp"

namespace iccnls {

namespace {

constexpr Eigen::Index kMaxVariables = 200;
constexpr Eigen::Index kMaxInequalities = 400;

// Goldfarb-Idnani dual active-set method for a strictly convex QP
//   minimize 0.5 z'Gz + c'z  s.t.  N_eq' z = b_eq,  N_in' z >= b_in.
// Works in y = L'z with G = LL', where the Hessian is the identity; directions
// come from a fresh QR of the active normals at every step. The problems this
// serves are small enough that update formulas are not worth the risk.
class DualActiveSet {
public:
    DualActiveSet(const Eigen::MatrixXd& g, const Eigen::MatrixXd& normals, Eigen::VectorXd bounds,
                  Eigen::Index equalities)
        : bounds_(std::move(bounds)), neq_(equalities) {
        llt_.compute(g);
        if (llt_.info() != Eigen::Success) {
            throw Error(ErrorCode::InvalidConfig, "reference subproblem is not positive definite");
        }
        normals_ = llt_.matrixL().solve(normals);
    }

    // Returns false when the constraints are certified inconsistent.
    bool run(const Eigen::VectorXd& c) {
        y_ = -llt_.matrixL().solve(c);
        active_.clear();
        duals_.resize(0);
        const Eigen::Index total = normals_.cols();

        for (Eigen::Index k = 0; k < neq_; ++k) {
            const Eigen::VectorXd n = normals_.col(k);
            Eigen::VectorXd step, r;
            directions(n, step, r);
            const double curvature = step.squaredNorm();
            const double viol = n.dot(y_) - bounds_(k);
            if (dependent(curvature, n)) {
                if (std::abs(viol) > 1e-9 * (1.0 + std::abs(bounds_(k)))) return false;
                continue;
            }
            const double t = -viol / curvature;
            y_ += t * step;
            duals_ -= t * r;
            push(k, t);
        }

        const int cap = static_cast<int>(50 * (normals_.rows() + total) + 100);
        for (int outer = 0; outer < cap; ++outer) {
            // Most violated inequality, normalized by row length.
            Eigen::Index p = -1;
            double worst = 0.0;
            for (Eigen::Index k = neq_; k < total; ++k) {
                if (is_active(k)) continue;
                const double len = normals_.col(k).norm();
                if (len == 0.0) {
                    if (bounds_(k) > 1e-12) return false;
                    continue;
                }
                const double v = (normals_.col(k).dot(y_) - bounds_(k)) / len;
                if (v < worst) {
                    worst = v;
                    p = k;
                }
            }
            if (p < 0 || worst > -1e-13 * (1.0 + y_.cwiseAbs().maxCoeff())) return true;

            const Eigen::VectorXd np = normals_.col(p);
            double dual_p = 0.0;
            for (int inner = 0; inner < cap; ++inner) {
                Eigen::VectorXd step, r;
                directions(np, step, r);
                const double curvature = step.squaredNorm();
                const bool zero_step = dependent(curvature, np);

                double t1 = std::numeric_limits<double>::infinity();
                Eigen::Index drop = -1;
                const double r_floor = 1e-12 * (r.size() > 0 ? std::max(1.0, r.cwiseAbs().maxCoeff()) : 1.0);
                for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(active_.size()); ++j) {
                    if (active_[static_cast<std::size_t>(j)] < neq_) continue;
                    if (r(j) > r_floor && duals_(j) / r(j) < t1) {
                        t1 = duals_(j) / r(j);
                        drop = j;
                    }
                }
                const double sp = np.dot(y_) - bounds_(p);
                const double t2 = zero_step ? std::numeric_limits<double>::infinity() : -sp / curvature;
                const double t = std::min(t1, t2);
                if (!std::isfinite(t)) return false;

                if (!zero_step) y_ += t * step;
                if (r.size() > 0) duals_ -= t * r;
                dual_p += t;
                if (t2 <= t1) {
                    push(p, dual_p);
                    break;
                }
                erase(drop);
            }
        }
        return true;
    }

    Eigen::VectorXd point() const { return llt_.matrixU().solve(y_); }
    const std::vector<Eigen::Index>& active() const { return active_; }

    // Multipliers for every constraint in the >= / == convention.
    Eigen::VectorXd multipliers() const {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(normals_.cols());
        for (std::size_t j = 0; j < active_.size(); ++j) u(active_[j]) = duals_(static_cast<Eigen::Index>(j));
        return u;
    }

private:
    static bool dependent(double curvature, const Eigen::VectorXd& n) {
        return curvature <= 1e-22 * n.squaredNorm();
    }

    bool is_active(Eigen::Index k) const {
        return std::find(active_.begin(), active_.end(), k) != active_.end();
    }

    void push(Eigen::Index k, double dual) {
        active_.push_back(k);
        duals_.conservativeResize(duals_.size() + 1);
        duals_(duals_.size() - 1) = dual;
    }

    void erase(Eigen::Index pos) {
        active_.erase(active_.begin() + pos);
        const Eigen::Index q = duals_.size();
        Eigen::VectorXd kept(q - 1);
        kept << duals_.head(pos), duals_.tail(q - pos - 1);
        duals_ = std::move(kept);
    }

    // step: the part of n orthogonal to the active normals (primal move);
    // r: coefficients of n on the active normals (dual change).
    void directions(const Eigen::VectorXd& n, Eigen::VectorXd& step, Eigen::VectorXd& r) const {
        if (active_.empty()) {
            step = n;
            r.resize(0);
            return;
        }
        const auto k = static_cast<Eigen::Index>(active_.size());
        Eigen::MatrixXd nact(normals_.rows(), k);
        for (Eigen::Index j = 0; j < k; ++j) nact.col(j) = normals_.col(active_[static_cast<std::size_t>(j)]);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(nact);
        const Eigen::VectorXd qn = (qr.householderQ().transpose() * n).head(k);
        r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(qn);
        step = n - nact * r;
    }

    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::MatrixXd normals_;
    Eigen::VectorXd bounds_;
    Eigen::Index neq_;
    Eigen::VectorXd y_;
    std::vector<Eigen::Index> active_;
    Eigen::VectorXd duals_;
};

struct ExactPoint {
    Eigen::VectorXd z;
    Eigen::VectorXd u;
};

// Solves the unregularized KKT system for a given active set,
//   P z + q = N_A u,  N_A' z = b_A,
// taking the solution nearest `near` when P is singular along the active face.
// Violated rows join the set and negative multipliers leave it for a few rounds;
// a point is accepted only when every constraint and multiplier sign holds.
std::optional<ExactPoint> exact_finish(const QpProblem& problem, const Eigen::MatrixXd& normals,
                                       const Eigen::VectorXd& bounds, Eigen::Index equalities,
                                       std::vector<Eigen::Index> active, const Eigen::VectorXd& near,
                                       double grad_scale) {
    const Eigen::Index m = problem.variables();
    const double bound_scale = 1.0 + (bounds.size() ? bounds.cwiseAbs().maxCoeff() : 0.0);
    const double lim = 1e-10 * bound_scale;
    for (int round = 0; round < 10; ++round) {
        const auto k = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + k, m + k);
        Eigen::VectorXd rhs(m + k);
        kkt.topLeftCorner(m, m) = problem.quad;
        rhs.head(m) = -problem.lin;
        for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::Index c = active[static_cast<std::size_t>(j)];
            kkt.block(0, m + j, m, 1) = -normals.col(c);
            kkt.block(m + j, 0, 1, m) = normals.col(c).transpose();
            rhs(m + j) = bounds(c);
        }
        Eigen::VectorXd base = Eigen::VectorXd::Zero(m + k);
        base.head(m) = near;
        Eigen::VectorXd sol = base + kkt.completeOrthogonalDecomposition().solve(rhs - kkt * base);
        if (!sol.allFinite()) return std::nullopt;
        if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-10 * std::max(grad_scale, bound_scale)) return std::nullopt;

        ExactPoint out{sol.head(m), Eigen::VectorXd::Zero(normals.cols())};
        Eigen::Index drop = -1;
        double worst_u = -1e-10 * grad_scale;
        for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::Index c = active[static_cast<std::size_t>(j)];
            if (c >= equalities && sol(m + j) < worst_u) {
                worst_u = sol(m + j);
                drop = j;
            }
            out.u(c) = sol(m + j);
        }
        const Eigen::VectorXd slack = normals.transpose() * out.z - bounds;
        Eigen::Index add = -1;
        double worst_slack = -lim;
        for (Eigen::Index c = 0; c < slack.size(); ++c) {
            if (c < equalities && std::abs(slack(c)) > lim) return std::nullopt;
            if (c >= equalities && slack(c) < worst_slack) {
                worst_slack = slack(c);
                add = c;
            }
        }
        if (drop < 0 && add < 0) return out;
        if (add >= 0) {
            active.push_back(add);
        } else {
            active.erase(active.begin() + drop);
        }
    }
    return std::nullopt;
}

}  // namespace

Solution solve_reference(const QpProblem& problem) {
    problem.check_dimensions();
    const Eigen::Index m = problem.variables();
    const Eigen::Index r = problem.inequalities();
    const Eigen::Index s = problem.equalities();
    if (m > kMaxVariables || r > kMaxInequalities) {
        throw Error(ErrorCode::TooLarge, "reference solver handles at most " + std::to_string(kMaxVariables) +
                                             " variables and " + std::to_string(kMaxInequalities) +
                                             " inequality rows");
    }

    Solution sol;
    sol.point = Eigen::VectorXd::Zero(m);
    sol.ineq_duals = Eigen::VectorXd::Zero(r);
    sol.eq_duals = Eigen::VectorXd::Zero(s);

    std::vector<Eigen::Index> eq_rows;
    try {
        eq_rows = independent_equalities(problem.eq_lhs, problem.eq_rhs);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Infeasible) throw;
        sol.status = SolverStatus::Infeasible;
        sol.objective_value = problem.objective(sol.point);
        return sol;
    }
    const auto se = static_cast<Eigen::Index>(eq_rows.size());

    // Constraint columns in the >= convention: equalities first.
    Eigen::MatrixXd normals(m, se + r);
    Eigen::VectorXd bounds(se + r);
    for (Eigen::Index k = 0; k < se; ++k) {
        normals.col(k) = problem.eq_lhs.row(eq_rows[static_cast<std::size_t>(k)]).transpose();
        bounds(k) = problem.eq_rhs(eq_rows[static_cast<std::size_t>(k)]);
    }
    const Eigen::MatrixXd dense_ineq = Eigen::MatrixXd(problem.ineq_lhs);
    for (Eigen::Index k = 0; k < r; ++k) {
        normals.col(se + k) = -dense_ineq.row(k).transpose();
        bounds(se + k) = -problem.ineq_rhs(k);
    }

    // Proximal-point regularization keeps every subproblem strictly convex.
    const double pmax = m > 0 ? problem.quad.diagonal().cwiseAbs().maxCoeff() : 0.0;
    const double rho = 1e-6 * std::max(1.0, pmax);
    Eigen::MatrixXd g = problem.quad;
    g.diagonal().array() += rho;
    DualActiveSet engine(g, normals, bounds, se);

    Eigen::VectorXd anchor = Eigen::VectorXd::Zero(m);
    const double grad_scale = 1.0 + std::max(pmax, problem.lin.size() ? problem.lin.cwiseAbs().maxCoeff() : 0.0);
    constexpr int kMaxOuter = 20000;
    std::optional<Eigen::VectorXd> exact_duals;
    sol.status = SolverStatus::MaxIter;
    for (int outer = 1; outer <= kMaxOuter; ++outer) {
        if (!engine.run(problem.lin - rho * anchor)) {
            sol.status = SolverStatus::Infeasible;
            sol.iterations = outer;
            break;
        }
        const Eigen::VectorXd next = engine.point();
        const double move = m > 0 ? (next - anchor).cwiseAbs().maxCoeff() : 0.0;
        anchor = next;
        sol.iterations = outer;
        const bool settled =
            rho * move <= 1e-13 * grad_scale && move <= 1e-10 * (1.0 + anchor.cwiseAbs().maxCoeff());
        // The proximal loop crawls along flat directions; periodically (and on
        // settling) try the exact KKT point of the current active set instead.
        if (settled || outer % 50 == 0) {
            if (auto exact = exact_finish(problem, normals, bounds, se, engine.active(), anchor, grad_scale)) {
                anchor = exact->z;
                exact_duals = exact->u;
                sol.status = SolverStatus::Optimal;
                break;
            }
        }
        if (settled) {
            sol.status = SolverStatus::Optimal;
            break;
        }
    }

    sol.point = anchor;
    Eigen::VectorXd u = exact_duals ? *exact_duals : engine.multipliers();
    for (Eigen::Index k = 0; k < se; ++k) sol.eq_duals(eq_rows[static_cast<std::size_t>(k)]) = -u(k);
    for (Eigen::Index k = 0; k < r; ++k) sol.ineq_duals(k) = u(se + k);
    sol.objective_value = problem.objective(sol.point);

    const KktResiduals kkt = kkt_residuals(problem, sol);
    const double b_scale = 1.0 + std::max(problem.ineq_rhs.size() ? problem.ineq_rhs.cwiseAbs().maxCoeff() : 0.0,
                                          problem.eq_rhs.size() ? problem.eq_rhs.cwiseAbs().maxCoeff() : 0.0);
    sol.primal_residual = kkt.primal_inf / b_scale;
    sol.dual_residual = kkt.dual_inf / grad_scale;
    return sol;
}

}  // namespace iccnls
