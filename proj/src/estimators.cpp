#include "iccnls/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "iccnls/metrics.hpp"
#include "iccnls/qp_assembly.hpp"

namespace iccnls {

namespace {

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
};

Standardizer make_standardizer(const Dataset& data, bool enabled) {
    Standardizer s;
    const Eigen::Index d = data.d();
    s.mean = Eigen::VectorXd::Zero(d);
    s.sd = Eigen::VectorXd::Ones(d);
    if (!enabled) return s;
    const auto& x = data.features();
    const double n = static_cast<double>(data.n());
    s.mean = x.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
        const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
        // Constant columns are only centered.
        s.sd(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Dataset apply(const Standardizer& s, const Dataset& data) {
    Eigen::MatrixXd x = (data.features().rowwise() - s.mean.transpose()).array().rowwise() /
                        s.sd.transpose().array();
    return Dataset(std::move(x), data.target(), data.feature_names());
}

// Maps a piece fitted on standardized features back to raw units.
AffinePiece to_raw(const Standardizer& s, AffinePiece piece) {
    const Eigen::VectorXd raw_slope = piece.slope.cwiseQuotient(s.sd);
    piece.intercept -= raw_slope.dot(s.mean);
    piece.slope = raw_slope;
    return piece;
}

std::vector<AffinePiece> extract(const VariableLayout& layout, const Eigen::VectorXd& z, Curvature c) {
    std::vector<AffinePiece> pieces;
    pieces.reserve(static_cast<std::size_t>(layout.n()));
    for (Eigen::Index i = 0; i < layout.n(); ++i) {
        AffinePiece p;
        p.intercept = z(layout.intercept(c, i));
        p.slope = Eigen::VectorXd::Zero(layout.d());
        for (Eigen::Index j = 0; j < layout.d(); ++j) {
            for (const auto& [idx, sign] : layout.slope_terms(c, i, j)) p.slope(j) += sign * z(idx);
        }
        pieces.push_back(std::move(p));
    }
    return pieces;
}

Eigen::VectorXd random_start(Eigen::Index m, std::uint64_t seed, double scale) {
    std::mt19937_64 gen(seed);
    Eigen::VectorXd z(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        z(k) = scale * (2.0 * u - 1.0);
    }
    return z;
}

}  // namespace

IccnlsModel cnls_as_model(const ComponentSurface& surface, std::vector<std::string> feature_names,
                          std::string fingerprint, const FitConfig& config) {
    ComponentSurface zero(Curvature::Concave, {AffinePiece{0.0, Eigen::VectorXd::Zero(surface.d())}});
    return IccnlsModel(std::move(zero), surface, std::move(feature_names), std::move(fingerprint), config,
                       Variant::CNLS);
}

IccnlsFit fit(const Dataset& data, const FitConfig& config, Variant variant) {
    config.validate();
    const Standardizer scaler = make_standardizer(data, config.standardize);
    const Dataset work = config.standardize ? apply(scaler, data) : data;

    const QpProblem qp = assemble_qp(work, config, variant);
    SolverSettings settings;
    settings.tol = config.solver_tol;
    settings.max_iter = config.max_iter;
    if (config.start_seed != 0) {
        const double scale = 1.0 + data.target().cwiseAbs().maxCoeff();
        settings.initial_point = random_start(qp.variables(), config.start_seed, scale);
    }
    const Solution sol = solve(qp, settings);
    const VariableLayout& layout = *qp.layout;

    auto raw_pieces = [&](Curvature c) {
        auto pieces = extract(layout, sol.point, c);
        if (config.standardize) {
            for (auto& p : pieces) p = to_raw(scaler, std::move(p));
        }
        return pieces;
    };

    std::optional<IccnlsModel> model;
    if (variant == Variant::CNLS) {
        model = cnls_as_model(ComponentSurface(Curvature::Convex, raw_pieces(Curvature::Convex)),
                              data.feature_names(), data.fingerprint(), config);
    } else {
        model.emplace(ComponentSurface(Curvature::Concave, raw_pieces(Curvature::Concave)),
                      ComponentSurface(Curvature::Convex, raw_pieces(Curvature::Convex)), data.feature_names(),
                      data.fingerprint(), config, variant);
    }

    FitReport rep;
    const Eigen::Index n = data.n();
    rep.fitted = Eigen::VectorXd::Zero(n);
    const auto& cv = model->convex().pieces();
    const auto& cc = model->concave().pieces();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd xi = data.row(i);
        double f = cv[static_cast<std::size_t>(i)](xi);
        if (variant != Variant::CNLS) f += cc[static_cast<std::size_t>(i)](xi);
        rep.fitted(i) = f;
    }
    rep.residuals = data.target() - rep.fitted;
    rep.rmse = rmse(rep.residuals);
    rep.mae = mae(rep.residuals);
    // Residuals within solver resolution are an exact fit; their ratio is noise.
    const double zero_level = config.solver_tol * (1.0 + data.target().cwiseAbs().maxCoeff());
    if (rep.mae > zero_level) rep.ratio = dispersion_ratio(rep.residuals);
    rep.hyperplane_count = count_hyperplanes(*model, config.round_tol);
    rep.concave_hyperplanes = variant == Variant::CNLS ? 0 : count_hyperplanes(model->concave(), config.round_tol);
    rep.convex_hyperplanes = count_hyperplanes(model->convex(), config.round_tol);
    rep.solver_status = sol.status;
    rep.iterations = sol.iterations;
    rep.primal_residual = sol.primal_residual;
    rep.dual_residual = sol.dual_residual;
    rep.objective = sol.objective_value;
    return IccnlsFit{std::move(*model), std::move(rep)};
}

namespace {

IccnlsFit checked(IccnlsFit result, Variant variant) {
    if (result.report.solver_status != SolverStatus::Optimal) {
        const std::string msg = std::string(to_string(variant)) + " fit ended with solver status " +
                                std::string(to_string(result.report.solver_status));
        throw SolverFailed(std::move(result), msg);
    }
    return result;
}

}  // namespace

CnlsFit fit_cnls(const Dataset& data, const FitConfig& config) {
    IccnlsFit result = checked(fit(data, config, Variant::CNLS), Variant::CNLS);
    return CnlsFit{result.model.convex(), std::move(result.report)};
}

IccnlsFit fit_mnls(const Dataset& data, const FitConfig& config) {
    return checked(fit(data, config, Variant::MNLS), Variant::MNLS);
}

IccnlsFit fit_iccnls(const Dataset& data, const FitConfig& config) {
    return checked(fit(data, config, Variant::ICCNLS), Variant::ICCNLS);
}

std::vector<SweepRow> sweep(const Dataset& data, std::vector<double> lambdas, std::vector<double> mixes,
                            const FitConfig& base, unsigned threads) {
    if (lambdas.empty() || mixes.empty()) {
        throw Error(ErrorCode::EmptyInput, "sweep grids must be nonempty");
    }
    std::sort(lambdas.begin(), lambdas.end());
    std::sort(mixes.begin(), mixes.end());
    std::vector<SweepRow> rows;
    for (double l : lambdas) {
        for (double a : mixes) {
            FitConfig cfg = base;
            cfg.lambda = l;
            cfg.mix = a;
            cfg.validate();
            SweepRow row;
            row.lambda = l;
            row.mix = a;
            rows.push_back(row);
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < rows.size(); k = next++) {
            SweepRow& row = rows[k];
            FitConfig cfg = base;
            cfg.lambda = row.lambda;
            cfg.mix = row.mix;
            try {
                const IccnlsFit result = fit(data, cfg, Variant::ICCNLS);
                row.rmse = result.report.rmse;
                row.mae = result.report.mae;
                row.ratio = result.report.ratio;
                row.hyperplanes = result.report.hyperplane_count;
                row.status = result.report.solver_status;
                row.iterations = result.report.iterations;
                row.failed = row.status != SolverStatus::Optimal;
                if (row.failed) row.message = "solver status " + std::string(to_string(row.status));
            } catch (const Error& e) {
                row.failed = true;
                row.status = e.code() == ErrorCode::Infeasible ? SolverStatus::Infeasible : SolverStatus::MaxIter;
                row.message = e.what();
            }
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

}  // namespace iccnls
