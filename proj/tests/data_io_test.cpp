#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "iccnls/data_io.hpp"
#include "iccnls/prediction.hpp"
#include "support.hpp"

using namespace iccnls;
using iccnls::testing::scratch_dir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::Io;
}

IccnlsModel two_piece_model() {
    Eigen::VectorXd s1(2), s2(2);
    s1 << 0.1, -1.0 / 3.0;
    s2 << 2.5e-7, 1e10;
    ComponentSurface cc(Curvature::Concave, {AffinePiece{0.7, s1}, AffinePiece{-1.25, s2}});
    ComponentSurface cv(Curvature::Convex, {AffinePiece{std::acos(-1.0), s2}, AffinePiece{1e-300, s1}});
    FitConfig cfg;
    cfg.lambda = 0.3;
    cfg.mix = 0.25;
    return IccnlsModel(cc, cv, {"a", "b=c"}, "0123456789abcdef", cfg);
}

}  // namespace

TEST(Csv, NumericColumns) {
    const auto dir = scratch_dir("csv_numeric");
    write_text(dir / "a.csv", "age,charges\n19,16884.9\n18,1725.55\n28,4449.46\n");
    const Dataset d = load_csv(dir / "a.csv", {{"age", ColumnKind::Numeric}, {"charges", ColumnKind::Target}});
    EXPECT_EQ(d.n(), 3);
    EXPECT_EQ(d.d(), 1);
    EXPECT_EQ(d.target()(1), 1725.55);
}

TEST(Csv, OneHotDropsFirstLevel) {
    const auto dir = scratch_dir("csv_onehot");
    write_text(dir / "a.csv",
               "sex,region,age,y\nfemale,ne,1,1\nmale,nw,2,2\nmale,se,3,3\nfemale,sw,4,4\nmale,ne,5,5\n");
    const auto specs = infer_specs({"sex", "region", "age", "y"}, "y", {"sex", "region"});
    const Dataset d = load_csv(dir / "a.csv", specs);
    const std::vector<std::string> want{"sex=male", "region=nw", "region=se", "region=sw", "age"};
    EXPECT_EQ(d.feature_names(), want);
    EXPECT_EQ(d.features().col(0), (Eigen::VectorXd(5) << 0, 1, 1, 0, 1).finished());
    for (Eigen::Index j = 0; j < 4; ++j) {
        EXPECT_GT(d.features().col(j).maxCoeff(), d.features().col(j).minCoeff());
    }
}

TEST(Csv, SingleLevelCategoricalIsDroppedWithWarning) {
    const auto dir = scratch_dir("csv_single");
    write_text(dir / "a.csv", "k,x,y\nu,1,1\nu,2,2\n");
    std::vector<std::string> warnings;
    const Dataset d = load_csv(dir / "a.csv", infer_specs({"k", "x", "y"}, "y", {"k"}), &warnings);
    EXPECT_EQ(d.d(), 1);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Csv, QuotesBomAndCrlf) {
    const auto dir = scratch_dir("csv_quotes");
    write_text(dir / "a.csv", "\xEF\xBB\xBF\"name, full\",x,y\r\n\"a \"\"b\"\"\",1.5,2\r\nplain,3,4\r\n");
    const CsvTable t = read_csv(dir / "a.csv");
    EXPECT_EQ(t.header[0], "name, full");
    EXPECT_EQ(t.rows[0][0], "a \"b\"");
    EXPECT_EQ(t.rows[1][2], "4");
    write_csv(dir / "b.csv", t);
    const CsvTable back = read_csv(dir / "b.csv");
    EXPECT_EQ(back.header, t.header);
    EXPECT_EQ(back.rows, t.rows);
    EXPECT_EQ(csv_escape("x,y"), "\"x,y\"");
    EXPECT_EQ(csv_escape("plain"), "plain");
}

TEST(Csv, Errors) {
    const auto dir = scratch_dir("csv_errors");
    write_text(dir / "empty.csv", "");
    write_text(dir / "header.csv", "x,y\n");
    write_text(dir / "ragged.csv", "x,y\n1,2\n3\n");
    write_text(dir / "text.csv", "x,y\n1,2\nabc,3\n");
    const std::vector<ColumnSpec> specs{{"x", ColumnKind::Numeric}, {"y", ColumnKind::Target}};
    EXPECT_EQ(code_of([&] { load_csv(dir / "missing.csv", specs); }), ErrorCode::Io);
    EXPECT_EQ(code_of([&] { load_csv(dir / "empty.csv", specs); }), ErrorCode::EmptyFile);
    EXPECT_EQ(code_of([&] { load_csv(dir / "header.csv", specs); }), ErrorCode::EmptyFile);
    EXPECT_EQ(code_of([&] { load_csv(dir / "ragged.csv", specs); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { load_csv(dir / "text.csv", specs); }), ErrorCode::UnparsableNumeric);
    EXPECT_EQ(code_of([&] { load_csv(dir / "text.csv", {{"z", ColumnKind::Numeric}, {"y", ColumnKind::Target}}); }),
              ErrorCode::MissingColumn);
    try {
        parse_number("1.2.3", 7, "age");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("age"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
    }
}

TEST(Synthetic, FormulaAtFixedPoints) {
    EXPECT_EQ(synthetic_signal(0.0, 0.0), 0.0);
    // 20 + sin(20) with sin(20) = 0.9129452507276277
    EXPECT_NEAR(synthetic_signal(10.0, 0.0), 20.9129452507276277, 1e-12);
}

TEST(Synthetic, ShapeRangeAndDeterminism) {
    const Dataset a = generate_synthetic(80, 7);
    const Dataset b = generate_synthetic(80, 7);
    const Dataset c = generate_synthetic(80, 8);
    EXPECT_EQ(a.n(), 80);
    EXPECT_EQ(a.d(), 3);
    EXPECT_EQ(a.features(), b.features());
    EXPECT_EQ(a.target(), b.target());
    EXPECT_NE(a.fingerprint(), c.fingerprint());
    EXPECT_GE(a.features().minCoeff(), 0.0);
    EXPECT_LE(a.features().maxCoeff(), 10.0);
    const Dataset clean = generate_synthetic(50, 3, 0.0);
    for (Eigen::Index i = 0; i < 50; ++i) {
        EXPECT_EQ(clean.target()(i), synthetic_signal(clean.features()(i, 0), clean.features()(i, 1)));
    }
}

TEST(Synthetic, NoiseHasRoughlyTheRequestedSpread) {
    const Dataset noisy = generate_synthetic(4000, 11, 0.5);
    double s = 0.0, s2 = 0.0;
    for (Eigen::Index i = 0; i < noisy.n(); ++i) {
        const double e = noisy.target()(i) - synthetic_signal(noisy.features()(i, 0), noisy.features()(i, 1));
        s += e;
        s2 += e * e;
    }
    const double n = static_cast<double>(noisy.n());
    EXPECT_NEAR(s / n, 0.0, 0.05);
    EXPECT_NEAR(std::sqrt(s2 / n - (s / n) * (s / n)), 0.5, 0.03);
}

TEST(Synthetic, CsvRoundTrip) {
    const auto dir = scratch_dir("synthetic_rt");
    const Dataset a = generate_synthetic(40, 5);
    save_dataset_csv(a, dir / "s.csv");
    const Dataset b = load_csv(dir / "s.csv", infer_specs({"x1", "x2", "x3", "y"}, "y", {}));
    EXPECT_LE((a.features() - b.features()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a.target() - b.target()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(b.feature_names(), a.feature_names());
}

TEST(ModelIo, RoundTripIsExact) {
    const auto dir = scratch_dir("model_rt");
    const IccnlsModel m = two_piece_model();
    save_model(m, dir / "m.json");
    const IccnlsModel back = load_model(dir / "m.json");
    EXPECT_EQ(back.feature_names(), m.feature_names());
    EXPECT_EQ(back.train_fingerprint(), m.train_fingerprint());
    EXPECT_EQ(back.config_used().lambda, 0.3);
    EXPECT_EQ(back.config_used().mix, 0.25);
    std::mt19937_64 gen(1);
    std::normal_distribution<double> dist(0, 10);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd x(2);
        x << dist(gen), dist(gen);
        EXPECT_EQ(predict(back, x), predict(m, x));
    }
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(back.concave().pieces()[k].slope, m.concave().pieces()[k].slope);
        EXPECT_EQ(back.convex().pieces()[k].intercept, m.convex().pieces()[k].intercept);
    }
}

TEST(ModelIo, RejectsWrongVersionAndGarbage) {
    const auto dir = scratch_dir("model_bad");
    std::string text = model_to_json(two_piece_model());
    const auto pos = text.find(kModelVersion);
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, std::string(kModelVersion).size(), "iccnls-model/0");
    write_text(dir / "v.json", text);
    EXPECT_EQ(code_of([&] { load_model(dir / "v.json"); }), ErrorCode::CorruptModel);
    write_text(dir / "g.json", "{not json");
    EXPECT_EQ(code_of([&] { load_model(dir / "g.json"); }), ErrorCode::CorruptModel);
    EXPECT_EQ(code_of([&] { load_model(dir / "none.json"); }), ErrorCode::Io);
}

TEST(ModelIo, LoadedModelChecksQueryDimension) {
    const auto dir = scratch_dir("model_dim");
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
    const IccnlsModel m(ComponentSurface(Curvature::Concave, {AffinePiece{1, z}}),
                        ComponentSurface(Curvature::Convex, {AffinePiece{2, z}}), {"a", "b", "c"}, "fp", FitConfig{});
    save_model(m, dir / "m.json");
    const IccnlsModel back = load_model(dir / "m.json");
    EXPECT_EQ(code_of([&] { predict(back, Eigen::VectorXd::Zero(2)); }), ErrorCode::DimensionMismatch);
}

TEST(ReportIo, RoundTripIsLossless) {
    FitReport r;
    r.fitted = (Eigen::VectorXd(3) << 1.0 / 3.0, 2, -7e-12).finished();
    r.residuals = (Eigen::VectorXd(3) << 0.1, -0.2, 1e-300).finished();
    r.rmse = 0.123456789012345678;
    r.mae = 0.1;
    r.ratio = r.rmse / r.mae;
    r.hyperplane_count = 3;
    r.concave_hyperplanes = 2;
    r.convex_hyperplanes = 1;
    r.solver_status = SolverStatus::MaxIter;
    r.iterations = 42;
    r.primal_residual = 1e-7;
    r.dual_residual = 2e-7;
    r.objective = 12.5;
    const FitReport back = report_from_json(report_to_json(r));
    EXPECT_EQ(back.fitted, r.fitted);
    EXPECT_EQ(back.residuals, r.residuals);
    EXPECT_EQ(back.rmse, r.rmse);
    EXPECT_EQ(back.ratio, r.ratio);
    EXPECT_EQ(back.hyperplane_count, 3);
    EXPECT_EQ(back.solver_status, SolverStatus::MaxIter);
    EXPECT_EQ(back.objective, 12.5);
    r.ratio.reset();
    const std::string text = report_to_json(r);
    EXPECT_NE(text.find("n.a."), std::string::npos);
    EXPECT_FALSE(report_from_json(text).ratio.has_value());
}
