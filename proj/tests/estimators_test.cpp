#include <gtest/gtest.h>

#include <array>
#include <random>

#include "iccnls/diagnostics.hpp"
#include "iccnls/estimators.hpp"
#include "iccnls/prediction.hpp"
#include "support.hpp"

using namespace iccnls;
using iccnls::testing::fitted_from_z;
using iccnls::testing::make_dataset;
using iccnls::testing::random_dataset;

namespace {

Eigen::VectorXd reference_fitted(const Dataset& data, const FitConfig& cfg, Variant v) {
    const QpProblem qp = assemble_qp(data, cfg, v);
    const Solution ref = solve_reference(qp);
    EXPECT_EQ(ref.status, SolverStatus::Optimal);
    Eigen::VectorXd f(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) f(i) = fitted_from_z(data, *qp.layout, ref.point, i);
    return f;
}

void expect_certified(const IccnlsFit& fit, const Dataset& data) {
    if (fit.model.variant() != Variant::CNLS) {
        EXPECT_TRUE(certify_shape(fit.model.concave(), data, 1e-6).passed);
    }
    EXPECT_TRUE(certify_shape(fit.model.convex(), data, 1e-6).passed);
    if (fit.model.variant() == Variant::ICCNLS) {
        EXPECT_TRUE(certify_orthogonality(fit.report, data, 1e-6).passed);
    }
}

double sse(const FitReport& r) { return r.residuals.squaredNorm(); }

}  // namespace

TEST(Cnls, CollinearDataIsInterpolated) {
    const Dataset data = make_dataset({{0}, {1}, {2}}, {0, 1, 2});
    const CnlsFit fit = fit_cnls(data, FitConfig{});
    EXPECT_LE((fit.report.fitted - data.target()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(fit.report.rmse, 1e-6);
    EXPECT_EQ(fit.surface.curvature(), Curvature::Convex);
}

TEST(Cnls, ConvexDataIsInterpolated) {
    const Dataset data = make_dataset({{0}, {1}, {2}}, {0, 0, 2});
    EXPECT_LE(fit_cnls(data, FitConfig{}).report.rmse, 1e-6);
}

TEST(Cnls, ConcaveDataMatchesReference) {
    const Dataset data = make_dataset({{0}, {1}, {2}}, {0, 1, 1.2});
    const CnlsFit fit = fit_cnls(data, FitConfig{});
    const Eigen::VectorXd ref = reference_fitted(data, FitConfig{}, Variant::CNLS);
    EXPECT_LE((fit.report.fitted - ref).cwiseAbs().maxCoeff(), 1e-6);
    // The best convex fit to concave 1-d data turns out affine here: least-squares line 2/15 + 0.6 x.
    EXPECT_NEAR(ref(0), 2.0 / 15.0, 1e-6);
    EXPECT_NEAR(ref(2), 2.0 / 15.0 + 1.2, 1e-6);
}

TEST(Mnls, IncreasingAffineDataIsInterpolated) {
    const Dataset data = make_dataset({{0}, {1}, {2}}, {0, 2, 4});
    const IccnlsFit fit = fit_mnls(data, FitConfig{});
    EXPECT_LE(fit.report.rmse, 1e-6);
    for (const auto* s : {&fit.model.concave(), &fit.model.convex()}) {
        for (const auto& p : s->pieces()) EXPECT_GE(p.slope.minCoeff(), -1e-8);
    }
}

TEST(Mnls, DecreasingDataCannotBeMatched) {
    const Dataset data = make_dataset({{0}, {1}, {2}}, {4, 2, 0});
    const IccnlsFit fit = fit_mnls(data, FitConfig{});
    EXPECT_GT(fit.report.rmse, 0.1);
    // Best nondecreasing fit of a decreasing sequence is its mean.
    const Eigen::VectorXd ref = reference_fitted(data, FitConfig{}, Variant::MNLS);
    EXPECT_LE((fit.report.fitted - ref).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(ref(1), 2.0, 1e-6);
}

TEST(Mnls, SlopesAreNonnegativeOnRandomData) {
    std::mt19937_64 gen(30);
    for (int t = 0; t < 5; ++t) {
        const Dataset data = random_dataset(gen, 10, 2);
        FitConfig cfg;
        cfg.lambda = t % 2;
        const IccnlsFit fit = fit_mnls(data, cfg);
        for (const auto* s : {&fit.model.concave(), &fit.model.convex()}) {
            for (const auto& p : s->pieces()) EXPECT_GE(p.slope.minCoeff(), -1e-8);
        }
        expect_certified(fit, data);
    }
}

TEST(Iccnls, AffineDataIsFitExactly) {
    const Dataset data = make_dataset({{0}, {1}, {2}, {3}, {4}}, {3, 5, 7, 9, 11});
    const IccnlsFit fit = fit_iccnls(data, FitConfig{});
    EXPECT_LE(fit.report.rmse, 1e-6);
    EXPECT_LE(std::abs(fit.report.residuals.sum()), 1e-6);
    EXPECT_LE(std::abs(fit.report.residuals.dot(data.features().col(0))), 1e-6);
    EXPECT_FALSE(fit.report.ratio.has_value() && fit.report.mae > 1e-6);
}

TEST(Iccnls, ElasticNetMatchesReference) {
    std::mt19937_64 gen(31);
    for (int t = 0; t < 3; ++t) {
        const Dataset data = random_dataset(gen, 4, 1);
        FitConfig cfg;
        cfg.lambda = 1.0;
        cfg.mix = 0.5;
        const IccnlsFit fit = fit_iccnls(data, cfg);
        const Eigen::VectorXd ref = reference_fitted(data, cfg, Variant::ICCNLS);
        EXPECT_LE((fit.report.fitted - ref).cwiseAbs().maxCoeff(), 1e-6);
        expect_certified(fit, data);
    }
}

// These streams include degenerate instances: zero residual faces, split
// slopes at the kink, and Newton weights spanning twenty decades.
TEST(AllVariants, SmallProblemsMatchReference) {
    const std::array variants{Variant::ICCNLS, Variant::CNLS, Variant::MNLS};
    for (std::uint64_t seed : {9u, 22u, 2024u}) {
        std::mt19937_64 gen(seed);
        std::uniform_int_distribution<int> ndist(2, 6), ddist(1, 2), ldist(0, 1), mdist(0, 2), vdist(0, 2);
        for (int t = 0; t < 50; ++t) {
            const int n = ndist(gen);
            const int d = ddist(gen);
            const Dataset data = random_dataset(gen, n, d);
            FitConfig cfg;
            cfg.mix = 0.5 * mdist(gen);
            cfg.lambda = ldist(gen);
            const Variant v = variants[static_cast<std::size_t>(vdist(gen))];
            const IccnlsFit f = iccnls::fit(data, cfg, v);
            ASSERT_EQ(f.report.solver_status, SolverStatus::Optimal) << "seed " << seed << " draw " << t;
            const Eigen::VectorXd ref = reference_fitted(data, cfg, v);
            EXPECT_LE((f.report.fitted - ref).cwiseAbs().maxCoeff(), 1e-6) << "seed " << seed << " draw " << t;
        }
    }
}

TEST(Iccnls, ReportIsConsistent) {
    std::mt19937_64 gen(32);
    const Dataset data = random_dataset(gen, 15, 2);
    FitConfig cfg;
    cfg.lambda = 0.5;
    const IccnlsFit fit = fit_iccnls(data, cfg);
    const FitReport& r = fit.report;
    EXPECT_EQ((r.residuals - (data.target() - r.fitted)).cwiseAbs().maxCoeff(), 0.0);
    ASSERT_TRUE(r.ratio.has_value());
    EXPECT_DOUBLE_EQ(*r.ratio, r.rmse / r.mae);
    EXPECT_GE(r.hyperplane_count, 1);
    EXPECT_LE(r.hyperplane_count, 15);
    EXPECT_EQ(r.solver_status, SolverStatus::Optimal);
    expect_certified(fit, data);
}

TEST(Iccnls, EnvelopeBindsAtTrainingPoints) {
    std::mt19937_64 gen(33);
    for (double lambda : {0.0, 1.0}) {
        const Dataset data = random_dataset(gen, 12, 2);
        FitConfig cfg;
        cfg.lambda = lambda;
        const IccnlsFit fit = fit_iccnls(data, cfg);
        const double scale = 1 + data.target().cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const Eigen::VectorXd x = data.row(i);
            const auto& own_c = fit.model.concave().pieces()[static_cast<std::size_t>(i)];
            const auto& own_v = fit.model.convex().pieces()[static_cast<std::size_t>(i)];
            EXPECT_NEAR(eval_concave(fit.model.concave(), x), own_c(x), 1e-6 * scale);
            EXPECT_NEAR(eval_convex(fit.model.convex(), x), own_v(x), 1e-6 * scale);
            EXPECT_NEAR(predict(fit.model, x), fit.report.fitted(i), 1e-6 * scale);
        }
    }
}

TEST(Iccnls, SseGrowsWithLambda) {
    std::mt19937_64 gen(34);
    const Dataset data = random_dataset(gen, 12, 2);
    for (double mix : {0.0, 0.5, 1.0}) {
        double prev = -1.0;
        for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0}) {
            FitConfig cfg;
            cfg.lambda = lambda;
            cfg.mix = mix;
            const double s = sse(fit_iccnls(data, cfg).report);
            EXPECT_GE(s, prev - 1e-8 * (1 + prev)) << "lambda " << lambda << " mix " << mix;
            prev = s;
        }
    }
}

TEST(Iccnls, NestsCnlsOnConvexNoiseFreeData) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 8; ++i) {
        const double v = -2.0 + 0.5 * i;
        x.push_back({v});
        y.push_back(v * v);
    }
    const Dataset data = make_dataset(x, y);
    const double cnls = sse(fit_cnls(data, FitConfig{}).report);
    const double icc = sse(fit_iccnls(data, FitConfig{}).report);
    EXPECT_LE(icc, cnls + 1e-6);
}

TEST(Iccnls, StandardizedPiecesAreInRawUnits) {
    std::mt19937_64 gen(35);
    Dataset base = random_dataset(gen, 12, 2);
    Eigen::MatrixXd x = base.features();
    x.col(0) = 100.0 * x.col(0).array() + 50.0;
    const Dataset data(x, base.target(), base.feature_names());
    FitConfig cfg;
    cfg.lambda = 1.0;
    cfg.standardize = true;
    const IccnlsFit fit = fit_iccnls(data, cfg);
    const double scale = 1 + data.target().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        EXPECT_NEAR(predict(fit.model, data.row(i)), fit.report.fitted(i), 1e-6 * scale);
    }
    expect_certified(fit, data);
    // At lambda = 0 the fit is scale-free, so standardizing changes nothing material.
    FitConfig plain;
    FitConfig std0;
    std0.standardize = true;
    const Dataset small = random_dataset(gen, 8, 1);
    EXPECT_LE((fit_cnls(small, plain).report.fitted - fit_cnls(small, std0).report.fitted).cwiseAbs().maxCoeff(),
              1e-5);
}

TEST(Iccnls, CnlsModelCarriesZeroConcavePart) {
    const Dataset data = make_dataset({{0}, {1}, {2}}, {1, 0, 1});
    const IccnlsFit f = iccnls::fit(data, FitConfig{}, Variant::CNLS);
    EXPECT_EQ(f.model.variant(), Variant::CNLS);
    ASSERT_EQ(f.model.concave().size(), 1u);
    EXPECT_EQ(f.model.concave().pieces()[0].intercept, 0.0);
    EXPECT_EQ(f.model.convex().size(), 3u);
}

TEST(Iccnls, SolverFailureCarriesPartialFit) {
    std::mt19937_64 gen(36);
    const Dataset data = random_dataset(gen, 10, 2);
    FitConfig cfg;
    cfg.max_iter = 1;
    try {
        fit_iccnls(data, cfg);
        FAIL();
    } catch (const SolverFailed& e) {
        EXPECT_EQ(e.code(), ErrorCode::SolverFailed);
        EXPECT_EQ(e.status(), SolverStatus::MaxIter);
        EXPECT_EQ(e.partial().report.fitted.size(), 10);
    }
    EXPECT_EQ(iccnls::fit(data, cfg, Variant::ICCNLS).report.solver_status, SolverStatus::MaxIter);
}

TEST(Iccnls, DifferentStartsDifferOnlyByAConstant) {
    std::mt19937_64 gen(37);
    const Dataset data = random_dataset(gen, 10, 2);
    FitConfig a;
    a.lambda = 1.0;
    FitConfig b = a;
    b.start_seed = 99;
    const GaugeComparison g = gauge_compare(fit_iccnls(data, a).model, fit_iccnls(data, b).model, 1e-4);
    EXPECT_TRUE(g.equivalent_up_to_constant);
}

TEST(Sweep, RowsAreOrderedAndMatchStandaloneFits) {
    std::mt19937_64 gen(38);
    const Dataset data = random_dataset(gen, 10, 2);
    const auto rows = sweep(data, {10.0, 1.0}, {1.0, 0.0}, FitConfig{}, 2);
    ASSERT_EQ(rows.size(), 4u);
    const std::vector<std::pair<double, double>> order{{1, 0}, {1, 1}, {10, 0}, {10, 1}};
    for (std::size_t k = 0; k < rows.size(); ++k) {
        EXPECT_EQ(rows[k].lambda, order[k].first);
        EXPECT_EQ(rows[k].mix, order[k].second);
        FitConfig cfg;
        cfg.lambda = rows[k].lambda;
        cfg.mix = rows[k].mix;
        const IccnlsFit f = fit_iccnls(data, cfg);
        EXPECT_EQ(rows[k].rmse, f.report.rmse);
        EXPECT_EQ(rows[k].mae, f.report.mae);
        EXPECT_EQ(rows[k].hyperplanes, f.report.hyperplane_count);
        EXPECT_FALSE(rows[k].failed);
    }
}

TEST(Sweep, FailedCellsAreFlagged) {
    std::mt19937_64 gen(39);
    const Dataset data = random_dataset(gen, 8, 1);
    FitConfig base;
    base.max_iter = 1;
    const auto rows = sweep(data, {1.0}, {0.0}, base);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_TRUE(rows[0].failed);
    EXPECT_FALSE(rows[0].message.empty());
}

TEST(Sweep, EmptyGridIsRejected) {
    const Dataset data = make_dataset({{0}, {1}}, {0, 1});
    EXPECT_THROW(sweep(data, {}, {0.0}, FitConfig{}), Error);
    EXPECT_THROW(sweep(data, {1.0}, {}, FitConfig{}), Error);
}
