#include "iccnls/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace iccnls {

std::vector<Eigen::Index> independent_equalities(const Eigen::MatrixXd& lhs, const Eigen::VectorXd& rhs) {
    std::vector<Eigen::Index> kept;
    if (lhs.rows() == 0) return kept;
    const double scale = std::max(1.0, lhs.cwiseAbs().maxCoeff());
    Eigen::Index rank = 0;
    for (Eigen::Index r = 0; r < lhs.rows(); ++r) {
        Eigen::MatrixXd trial(static_cast<Eigen::Index>(kept.size()) + 1, lhs.cols());
        for (std::size_t k = 0; k < kept.size(); ++k) trial.row(static_cast<Eigen::Index>(k)) = lhs.row(kept[k]);
        trial.row(trial.rows() - 1) = lhs.row(r);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial.transpose());
        qr.setThreshold(1e-10);
        if (qr.rank() > rank) {
            kept.push_back(r);
            rank = qr.rank();
            continue;
        }
        // Dependent row: its right-hand side must follow from the kept rows.
        Eigen::MatrixXd basis(lhs.cols(), static_cast<Eigen::Index>(kept.size()));
        Eigen::VectorXd basis_rhs(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t k = 0; k < kept.size(); ++k) {
            basis.col(static_cast<Eigen::Index>(k)) = lhs.row(kept[k]).transpose();
            basis_rhs(static_cast<Eigen::Index>(k)) = rhs(kept[k]);
        }
        const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(lhs.row(r).transpose());
        const double implied = kept.empty() ? 0.0 : coef.dot(basis_rhs);
        const double rhs_scale = 1.0 + std::abs(rhs(r)) + (kept.empty() ? 0.0 : basis_rhs.cwiseAbs().maxCoeff());
        if (std::abs(implied - rhs(r)) > 1e-9 * rhs_scale * scale) {
            throw Error(ErrorCode::Infeasible, "equality row " + std::to_string(r) + " is inconsistent");
        }
    }
    return kept;
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double step = 1.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        if (dv(k) < 0.0) step = std::min(step, -v(k) / dv(k));
    }
    return step;
}

// Scaled working copy of the problem: rows of A and C normalized to unit
// infinity norm, objective multiplied by obj_scale.
struct ScaledQp {
    Eigen::MatrixXd quad;
    Eigen::VectorXd lin;
    RowSparse ineq;
    Eigen::VectorXd ineq_rhs;
    Eigen::VectorXd ineq_row_scale;
    Eigen::MatrixXd eq;
    Eigen::VectorXd eq_rhs;
    Eigen::VectorXd eq_row_scale;
    std::vector<Eigen::Index> eq_rows;
    double obj_scale = 1.0;
};

ScaledQp scale_problem(const QpProblem& p) {
    ScaledQp s;
    const double pmax = p.quad.size() == 0 ? 0.0 : p.quad.cwiseAbs().maxCoeff();
    s.obj_scale = 1.0 / std::max({1.0, pmax, inf_norm(p.lin)});
    s.quad = p.quad * s.obj_scale;
    s.lin = p.lin * s.obj_scale;

    s.ineq = p.ineq_lhs;
    s.ineq_row_scale = Eigen::VectorXd::Ones(p.inequalities());
    for (Eigen::Index k = 0; k < s.ineq.outerSize(); ++k) {
        double rmax = 0.0;
        for (RowSparse::InnerIterator it(s.ineq, k); it; ++it) rmax = std::max(rmax, std::abs(it.value()));
        if (rmax > 0.0) s.ineq_row_scale(k) = 1.0 / rmax;
        for (RowSparse::InnerIterator it(s.ineq, k); it; ++it) it.valueRef() *= s.ineq_row_scale(k);
    }
    s.ineq_rhs = p.ineq_rhs.cwiseProduct(s.ineq_row_scale);

    s.eq_rows = independent_equalities(p.eq_lhs, p.eq_rhs);
    const auto se = static_cast<Eigen::Index>(s.eq_rows.size());
    s.eq.resize(se, p.variables());
    s.eq_rhs.resize(se);
    s.eq_row_scale.resize(se);
    for (Eigen::Index k = 0; k < se; ++k) {
        const auto src = s.eq_rows[static_cast<std::size_t>(k)];
        const double rmax = p.eq_lhs.row(src).cwiseAbs().maxCoeff();
        s.eq_row_scale(k) = rmax > 0.0 ? 1.0 / rmax : 1.0;
        s.eq.row(k) = p.eq_lhs.row(src) * s.eq_row_scale(k);
        s.eq_rhs(k) = p.eq_rhs(src) * s.eq_row_scale(k);
    }
    return s;
}

// Factorization of the reduced Newton matrix [H C'; C 0] with H = P + A'DA.
class NewtonSystem {
public:
    NewtonSystem(const ScaledQp& qp, const Eigen::VectorXd& weights) : qp_(qp), weights_(weights) {
        const Eigen::Index m = qp.lin.size();
        Eigen::MatrixXd h = qp.quad;
        for (Eigen::Index k = 0; k < qp.ineq.outerSize(); ++k) {
            const double wk = weights(k);
            for (RowSparse::InnerIterator a(qp.ineq, k); a; ++a) {
                const double va = wk * a.value();
                for (RowSparse::InnerIterator b(qp.ineq, k); b; ++b) h(a.index(), b.index()) += va * b.value();
            }
        }
        // Symmetric diagonal scaling first: the weights span many decades, and a
        // shift relative to the largest one would swamp the small curvatures.
        const double diag_max = m == 0 ? 1.0 : std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
        scale_.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) scale_(i) = 1.0 / std::sqrt(std::max(h(i, i), 1e-12 * diag_max));
        const Eigen::MatrixXd hs = scale_.asDiagonal() * h * scale_.asDiagonal();
        double reg = 1e-13;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::MatrixXd shifted = hs;
            shifted.diagonal().array() += reg;
            llt_.compute(shifted);
            if (llt_.info() == Eigen::Success) break;
            reg *= 100.0;
        }
        if (qp.eq.rows() > 0) {
            hinv_ct_ = hsolve(qp.eq.transpose());
            schur_.compute(qp.eq * hinv_ct_);
        }
    }

    // Solves H dz + C'dnu = g, C dz = c, refining against the unshifted H.
    void solve(const Eigen::VectorXd& g, const Eigen::VectorXd& c, Eigen::VectorXd& dz,
               Eigen::VectorXd& dnu) const {
        solve_once(g, c, dz, dnu);
        const double g_scale = 1.0 + (g.size() ? g.cwiseAbs().maxCoeff() : 0.0);
        for (int pass = 0; pass < 3; ++pass) {
            Eigen::VectorXd rg = g - apply_h(dz);
            Eigen::VectorXd rc = c;
            if (qp_.eq.rows() > 0) {
                rg -= qp_.eq.transpose() * dnu;
                rc -= qp_.eq * dz;
            }
            const double err = std::max(rg.size() ? rg.cwiseAbs().maxCoeff() : 0.0,
                                        rc.size() ? rc.cwiseAbs().maxCoeff() : 0.0);
            if (err <= 1e-15 * g_scale) break;
            Eigen::VectorXd ez, enu;
            solve_once(rg, rc, ez, enu);
            dz += ez;
            if (qp_.eq.rows() > 0) dnu += enu;
        }
    }

private:
    void solve_once(const Eigen::VectorXd& g, const Eigen::VectorXd& c, Eigen::VectorXd& dz,
                    Eigen::VectorXd& dnu) const {
        Eigen::VectorXd hg = hsolve(g);
        if (qp_.eq.rows() == 0) {
            dz = std::move(hg);
            dnu.resize(0);
            return;
        }
        dnu = schur_.solve(qp_.eq * hg - c);
        dz = hg - hinv_ct_ * dnu;
    }

    Eigen::MatrixXd hsolve(const Eigen::MatrixXd& rhs) const {
        return scale_.asDiagonal() * llt_.solve(scale_.asDiagonal() * rhs);
    }

    Eigen::VectorXd apply_h(const Eigen::VectorXd& v) const {
        Eigen::VectorXd out = qp_.quad * v;
        if (weights_.size() > 0) out += qp_.ineq.transpose() * weights_.cwiseProduct(qp_.ineq * v);
        return out;
    }

    const ScaledQp& qp_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd scale_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::MatrixXd hinv_ct_;
    Eigen::LDLT<Eigen::MatrixXd> schur_;
};

struct Polished {
    Eigen::VectorXd z;
    Eigen::VectorXd mu;
    Eigen::VectorXd nu;
};

// Solves the QP with the `active` rows as equalities (inactive rows dropped) by
// proximal augmented-Lagrangian sweeps on a single factorization. Interior-point
// iterates only pin the primal point to about sqrt(gap); this recovers the
// vertex to round-off when the active set is right.
std::optional<Polished> polish(const ScaledQp& qp, const Eigen::VectorXd& z0, const std::vector<Eigen::Index>& active,
                               const Eigen::VectorXd& mu0, const Eigen::VectorXd& nu0) {
    const Eigen::Index m = z0.size();
    const Eigen::Index r = mu0.size();
    const Eigen::Index s = qp.eq.rows();
    const double rho = 1e6;
    const double eps = 1e-9;
    Eigen::MatrixXd h = qp.quad;
    h.diagonal().array() += eps;
    for (Eigen::Index k : active) {
        for (RowSparse::InnerIterator a(qp.ineq, k); a; ++a) {
            const double va = rho * a.value();
            for (RowSparse::InnerIterator b(qp.ineq, k); b; ++b) h(a.index(), b.index()) += va * b.value();
        }
    }
    if (s > 0) h += rho * qp.eq.transpose() * qp.eq;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    // Round-off can flag tiny negative pivots; the caller validates the result instead.

    auto active_rows = [&](const Eigen::VectorXd& z) {
        Eigen::VectorXd g(static_cast<Eigen::Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) {
            g(static_cast<Eigen::Index>(k)) = qp.ineq.row(active[k]).dot(z) - qp.ineq_rhs(active[k]);
        }
        return g;
    };
    auto active_transpose = [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
        for (std::size_t k = 0; k < active.size(); ++k) {
            for (RowSparse::InnerIterator a(qp.ineq, active[k]); a; ++a) {
                out(a.index()) += y(static_cast<Eigen::Index>(k)) * a.value();
            }
        }
        return out;
    };

    Eigen::VectorXd z = z0;
    Eigen::VectorXd y(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) y(static_cast<Eigen::Index>(k)) = mu0(active[k]);
    Eigen::VectorXd nu = nu0;
    for (int sweep = 0; sweep < 200; ++sweep) {
        // Minimizer of the augmented Lagrangian plus (eps/2)|z - z_prev|^2, written
        // around the current constraint residuals so the right-hand side stays small.
        Eigen::VectorXd ga = active_rows(z);
        Eigen::VectorXd ge = s > 0 ? Eigen::VectorXd(qp.eq * z - qp.eq_rhs) : Eigen::VectorXd();
        Eigen::VectorXd grad = qp.quad * z + qp.lin + active_transpose(y + rho * ga);
        if (s > 0) grad += qp.eq.transpose() * (nu + rho * ge);
        const Eigen::VectorXd dz = ldlt.solve(-grad);
        z += dz;
        ga = active_rows(z);
        y += rho * ga;
        if (s > 0) {
            ge = qp.eq * z - qp.eq_rhs;
            nu += rho * ge;
        }
        const double move = dz.cwiseAbs().maxCoeff();
        const double infeas = std::max(inf_norm(ga), inf_norm(ge));
        if (move <= 1e-15 * (1.0 + inf_norm(z)) && infeas <= 1e-14 * (1.0 + inf_norm(z))) break;
    }
    Polished out;
    out.z = std::move(z);
    out.mu = Eigen::VectorXd::Zero(r);
    for (std::size_t k = 0; k < active.size(); ++k) out.mu(active[k]) = y(static_cast<Eigen::Index>(k));
    out.nu = std::move(nu);
    if (!out.z.allFinite() || !out.mu.allFinite()) return std::nullopt;
    return out;
}

}  // namespace

Solution solve(const QpProblem& problem, double tol, int max_iter) {
    SolverSettings settings;
    settings.tol = tol;
    settings.max_iter = max_iter;
    return solve(problem, settings);
}

Solution solve(const QpProblem& problem, const SolverSettings& settings) {
    problem.check_dimensions();
    if (!(settings.tol > 0.0) || settings.max_iter <= 0) {
        throw Error(ErrorCode::InvalidConfig, "solver tolerance and iteration cap must be positive");
    }
    const Eigen::Index m = problem.variables();
    const Eigen::Index r = problem.inequalities();

    Solution sol;
    ScaledQp qp;
    try {
        qp = scale_problem(problem);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Infeasible) throw;
        sol.point = Eigen::VectorXd::Zero(m);
        sol.ineq_duals = Eigen::VectorXd::Zero(r);
        sol.eq_duals = Eigen::VectorXd::Zero(problem.equalities());
        sol.status = SolverStatus::Infeasible;
        sol.primal_residual = std::numeric_limits<double>::infinity();
        sol.objective_value = problem.objective(sol.point);
        return sol;
    }
    const Eigen::Index s = qp.eq.rows();

    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    if (settings.initial_point) {
        if (settings.initial_point->size() != m) {
            throw Error(ErrorCode::DimensionMismatch, "initial point has the wrong length");
        }
        z = *settings.initial_point;
    }
    Eigen::VectorXd w = (qp.ineq_rhs - qp.ineq * z).cwiseMax(1.0);
    Eigen::VectorXd mu = Eigen::VectorXd::Ones(r);
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(s);

    const double tol = settings.tol;
    const double b_scale = 1.0 + inf_norm(problem.ineq_rhs);
    const double e_scale = 1.0 + inf_norm(problem.eq_rhs);
    const double c = qp.obj_scale;

    auto unscaled_duals = [&](Eigen::VectorXd& mu_o, Eigen::VectorXd& nu_o) {
        mu_o = mu.cwiseProduct(qp.ineq_row_scale) / c;
        nu_o = Eigen::VectorXd::Zero(problem.equalities());
        for (Eigen::Index k = 0; k < s; ++k) {
            nu_o(qp.eq_rows[static_cast<std::size_t>(k)]) = nu(k) * qp.eq_row_scale(k) / c;
        }
    };

    sol.status = SolverStatus::MaxIter;
    int stalled = 0;
    // Once the tolerances hold, iterate on towards a much smaller gap so the
    // active set becomes visible for polishing; only iterates that still meet
    // the tolerances are kept.
    struct Snapshot {
        Eigen::VectorXd z, w, mu, nu;
        double primal = 0.0, dual = 0.0;
    };
    std::optional<Snapshot> good;
    // Best iterate so far, for runs that never meet the tolerances.
    std::optional<Snapshot> best;
    double best_merit = 0.0;
    int best_iter = 0;
    int extra = 0;
    const double tight = std::max(tol * tol, 1e-14);
    for (int iter = 0;; ++iter) {
        const Eigen::VectorXd az = qp.ineq * z;
        const Eigen::VectorXd rd = qp.quad * z + qp.lin + qp.ineq.transpose() * mu + qp.eq.transpose() * nu;
        const Eigen::VectorXd rp = az + w - qp.ineq_rhs;
        const Eigen::VectorXd re = qp.eq * z - qp.eq_rhs;
        const double gap = r > 0 ? w.dot(mu) : 0.0;

        // Convergence is judged on the original, unscaled problem.
        Eigen::VectorXd mu_o, nu_o;
        unscaled_duals(mu_o, nu_o);
        const Eigen::VectorXd viol = problem.ineq_rhs.size() > 0
                                         ? Eigen::VectorXd(problem.ineq_lhs * z - problem.ineq_rhs)
                                         : Eigen::VectorXd();
        const double ineq_inf = viol.size() > 0 ? std::max(0.0, viol.maxCoeff()) : 0.0;
        const double eq_inf = problem.equalities() > 0 ? inf_norm(problem.eq_lhs * z - problem.eq_rhs) : 0.0;
        const Eigen::VectorXd pz = problem.quad * z;
        const Eigen::VectorXd atmu = problem.ineq_lhs.transpose() * mu_o;
        const Eigen::VectorXd ctnu = problem.equalities() > 0 ? Eigen::VectorXd(problem.eq_lhs.transpose() * nu_o)
                                                              : Eigen::VectorXd::Zero(m);
        const double dual_inf = inf_norm(pz + problem.lin + atmu + ctnu);
        const double dual_scale =
            1.0 + std::max({inf_norm(pz), inf_norm(problem.lin), inf_norm(atmu), inf_norm(ctnu)});
        const double objective = problem.objective(z);
        const double gap_o = gap / c;

        sol.iterations = iter;
        sol.primal_residual = std::max(ineq_inf / b_scale, eq_inf / e_scale);
        sol.dual_residual = dual_inf / dual_scale;
        const bool meets = ineq_inf <= tol * b_scale && eq_inf <= tol * e_scale && dual_inf <= tol * dual_scale &&
                           gap_o <= tol * (1.0 + std::abs(objective));
        const double merit = std::max({ineq_inf / b_scale, eq_inf / e_scale, dual_inf / dual_scale,
                                        gap_o / (1.0 + std::abs(objective))});
        if (!best || merit < best_merit) {
            best = Snapshot{z, w, mu, nu, sol.primal_residual, sol.dual_residual};
            best_merit = merit;
            best_iter = iter;
        }
        if (meets) {
            sol.status = SolverStatus::Optimal;
            good = Snapshot{z, w, mu, nu, sol.primal_residual, sol.dual_residual};
            if (gap_o <= tight * (1.0 + std::abs(objective)) || extra >= 30) break;
            ++extra;
        } else if (good) {
            break;
        }
        if (iter >= settings.max_iter || stalled >= 5 || iter - best_iter >= 50) break;

        const Eigen::VectorXd weights = r > 0 ? Eigen::VectorXd(mu.cwiseQuotient(w)) : Eigen::VectorXd();
        const NewtonSystem newton(qp, weights);

        Eigen::VectorXd dz, dnu, dw, dmu;
        // Solves P dz + A'dmu + C'dnu = -fd, A dz + dw = -fp, C dz = -fe,
        // mu.dw + w.dmu = fc through the reduced system.
        auto reduced = [&](const Eigen::VectorXd& fd, const Eigen::VectorXd& fp, const Eigen::VectorXd& fe,
                           const Eigen::VectorXd& fc, Eigen::VectorXd& ez, Eigen::VectorXd& enu, Eigen::VectorXd& ew,
                           Eigen::VectorXd& emu) {
            const Eigen::VectorXd tmp =
                r > 0 ? Eigen::VectorXd((fc + mu.cwiseProduct(fp)).cwiseQuotient(w)) : Eigen::VectorXd::Zero(0);
            const Eigen::VectorXd g = r > 0 ? Eigen::VectorXd(-fd - qp.ineq.transpose() * tmp) : Eigen::VectorXd(-fd);
            newton.solve(g, -fe, ez, enu);
            ew = -fp - qp.ineq * ez;
            emu = r > 0 ? Eigen::VectorXd((fc - mu.cwiseProduct(ew)).cwiseQuotient(w)) : Eigen::VectorXd::Zero(0);
        };
        // The reduced system loses the dual equation to round-off once the
        // weights mu/w grow large, so refine against the full system.
        auto direction = [&](const Eigen::VectorXd& rc) {
            const Eigen::VectorXd rc_full = r > 0 ? rc : Eigen::VectorXd::Zero(0);
            reduced(rd, rp, re, rc_full, dz, dnu, dw, dmu);
            for (int pass = 0; pass < 2; ++pass) {
                Eigen::VectorXd fd = rd + qp.quad * dz + qp.ineq.transpose() * dmu;
                if (s > 0) fd += qp.eq.transpose() * dnu;
                const Eigen::VectorXd fp = rp + qp.ineq * dz + dw;
                const Eigen::VectorXd fe = s > 0 ? Eigen::VectorXd(re + qp.eq * dz) : Eigen::VectorXd::Zero(0);
                const Eigen::VectorXd fc = rc_full - mu.cwiseProduct(dw) - w.cwiseProduct(dmu);
                Eigen::VectorXd ez, enu, ew, emu;
                reduced(fd, fp, fe, fc, ez, enu, ew, emu);
                dz += ez;
                if (s > 0) dnu += enu;
                dw += ew;
                dmu += emu;
            }
        };

        double step = 1.0;
        if (r > 0) {
            const Eigen::VectorXd rc_aff = -w.cwiseProduct(mu);
            direction(rc_aff);
            const double a_aff = std::min(max_step(w, dw), max_step(mu, dmu));
            const double gap_aff = (w + a_aff * dw).dot(mu + a_aff * dmu);
            const double sigma = std::pow(std::max(0.0, gap_aff) / gap, 3.0);
            const double target = sigma * gap / static_cast<double>(r);
            const Eigen::VectorXd rc =
                rc_aff + Eigen::VectorXd::Constant(r, target) - dw.cwiseProduct(dmu);
            direction(rc);
            step = std::min(1.0, 0.995 * std::min(max_step(w, dw), max_step(mu, dmu)));
            if (!((w + step * dw).dot(mu + step * dmu) < gap)) {
                // The second-order term overshot; take the plain centred direction.
                direction(rc_aff + Eigen::VectorXd::Constant(r, target));
                step = std::min(1.0, 0.995 * std::min(max_step(w, dw), max_step(mu, dmu)));
                // Along this direction the gap is exactly quadratic in the step.
                const double curv = dw.dot(dmu);
                const double slope = gap - r * target;
                if (curv > 0.0 && slope > 0.0) step = std::min(step, slope / (2.0 * curv));
            }
        } else {
            direction(Eigen::VectorXd());
        }
        stalled = step < 1e-10 ? stalled + 1 : 0;

        z += step * dz;
        if (s > 0) nu += step * dnu;
        if (r > 0) {
            w += step * dw;
            mu += step * dmu;
            // Keep strictly interior against round-off.
            w = w.cwiseMax(std::numeric_limits<double>::min());
            mu = mu.cwiseMax(std::numeric_limits<double>::min());
        }
    }

    if (!good && best) {
        z = best->z;
        w = best->w;
        mu = best->mu;
        nu = best->nu;
        sol.primal_residual = best->primal;
        sol.dual_residual = best->dual;
    }
    if (good) {
        z = good->z;
        w = good->w;
        mu = good->mu;
        nu = good->nu;
        sol.primal_residual = good->primal;
        sol.dual_residual = good->dual;
    }
    sol.point = z;
    unscaled_duals(sol.ineq_duals, sol.eq_duals);
    sol.objective_value = problem.objective(z);
    if (!best) return sol;

    // Rows the guess missed show up as violations and join the active set; a
    // row whose multiplier turns negative leaves it, one at a time.
    std::vector<char> in_set(static_cast<std::size_t>(r), 0);
    for (Eigen::Index k = 0; k < r; ++k) in_set[static_cast<std::size_t>(k)] = w(k) < mu(k);
    std::optional<Polished> refined;
    for (int round = 0; round < 20; ++round) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index k = 0; k < r; ++k) {
            if (in_set[static_cast<std::size_t>(k)]) active.push_back(k);
        }
        refined = polish(qp, z, active, mu, nu);
        if (!refined) return sol;
        const Eigen::VectorXd viol = qp.ineq * refined->z - qp.ineq_rhs;
        bool grew = false;
        for (Eigen::Index k = 0; k < r; ++k) {
            if (viol(k) > 1e-13 && !in_set[static_cast<std::size_t>(k)]) {
                in_set[static_cast<std::size_t>(k)] = 1;
                grew = true;
            }
        }
        if (grew) continue;
        // Degenerate faces leave the multipliers noisy, so only a sign error
        // that would fail certification counts.
        Eigen::Index worst = -1;
        double worst_mu = -tol;
        for (Eigen::Index k = 0; k < r; ++k) {
            const double mu_k = refined->mu(k) * qp.ineq_row_scale(k) / c;
            if (mu_k < worst_mu) {
                worst_mu = mu_k;
                worst = k;
            }
        }
        if (worst < 0) break;
        in_set[static_cast<std::size_t>(worst)] = 0;
    }
    const Eigen::VectorXd& zp = refined->z;
    const Eigen::VectorXd slack = r > 0 ? Eigen::VectorXd(problem.ineq_rhs - problem.ineq_lhs * zp) : Eigen::VectorXd();
    const double ineq_inf = r > 0 ? std::max(0.0, -slack.minCoeff()) : 0.0;
    const double eq_inf = problem.equalities() > 0 ? inf_norm(problem.eq_lhs * zp - problem.eq_rhs) : 0.0;
    const double obj_p = problem.objective(zp);
    if (ineq_inf > tol * b_scale || eq_inf > tol * e_scale) return sol;

    mu = refined->mu;
    nu = refined->nu;
    Eigen::VectorXd mu_p, nu_p;
    unscaled_duals(mu_p, nu_p);
    const Eigen::VectorXd pz = problem.quad * zp;
    const Eigen::VectorXd atmu = problem.ineq_lhs.transpose() * mu_p;
    const Eigen::VectorXd ctnu =
        problem.equalities() > 0 ? Eigen::VectorXd(problem.eq_lhs.transpose() * nu_p) : Eigen::VectorXd::Zero(m);
    const double dual_scale = 1.0 + std::max({inf_norm(pz), inf_norm(problem.lin), inf_norm(atmu), inf_norm(ctnu)});
    const double dual_inf = inf_norm(pz + problem.lin + atmu + ctnu) / dual_scale;
    const double min_dual = r > 0 ? mu_p.minCoeff() : 0.0;
    const bool duals_ok = dual_inf <= tol && min_dual >= -tol;

    if (!good) {
        // A stalled run is rescued only when the polished pair certifies itself.
        const double comp = r > 0 ? std::abs(mu_p.dot(slack)) : 0.0;
        if (!duals_ok || comp > tol * (1.0 + std::abs(obj_p))) return sol;
        sol.status = SolverStatus::Optimal;
        sol.point = zp;
        sol.objective_value = obj_p;
        sol.primal_residual = std::max(ineq_inf / b_scale, eq_inf / e_scale);
        sol.ineq_duals = mu_p;
        sol.eq_duals = nu_p;
        sol.dual_residual = dual_inf;
        return sol;
    }

    // The polished point replaces the iterate when it is feasible and no worse;
    // its multipliers are kept only when they also certify optimality.
    // Objectives carry round-off from the constant term as well.
    const double obj_slack = 1e-12 * (1.0 + std::abs(sol.objective_value) + std::abs(problem.constant));
    if (obj_p > sol.objective_value + obj_slack) return sol;
    sol.point = zp;
    sol.objective_value = obj_p;
    sol.primal_residual = std::max(ineq_inf / b_scale, eq_inf / e_scale);
    if (dual_inf <= sol.dual_residual && min_dual >= -tol) {
        sol.ineq_duals = mu_p;
        sol.eq_duals = nu_p;
        sol.dual_residual = dual_inf;
    }
    return sol;
}

KktResiduals kkt_residuals(const QpProblem& problem, const Solution& candidate) {
    problem.check_dimensions();
    const auto& z = candidate.point;
    if (z.size() != problem.variables() || candidate.ineq_duals.size() != problem.inequalities() ||
        candidate.eq_duals.size() != problem.equalities()) {
        throw Error(ErrorCode::DimensionMismatch, "candidate does not match the problem dimensions");
    }
    KktResiduals out;
    Eigen::VectorXd grad = problem.quad * z + problem.lin;
    if (problem.inequalities() > 0) {
        const Eigen::VectorXd slack = problem.ineq_rhs - problem.ineq_lhs * z;
        out.primal_inf = std::max(0.0, -slack.minCoeff());
        grad += problem.ineq_lhs.transpose() * candidate.ineq_duals;
        out.comp_slack = candidate.ineq_duals.cwiseProduct(slack).cwiseAbs().maxCoeff();
        out.dual_inf = std::max(0.0, -candidate.ineq_duals.minCoeff());
    }
    if (problem.equalities() > 0) {
        out.primal_inf = std::max(out.primal_inf, inf_norm(problem.eq_lhs * z - problem.eq_rhs));
        grad += problem.eq_lhs.transpose() * candidate.eq_duals;
    }
    out.dual_inf = std::max(out.dual_inf, inf_norm(grad));
    return out;
}

}  // namespace iccnls
