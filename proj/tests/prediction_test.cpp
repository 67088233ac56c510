#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "iccnls/prediction.hpp"

using namespace iccnls;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

AffinePiece piece(double a, double b) { return AffinePiece{a, v1(b)}; }

std::vector<AffinePiece> random_pieces(std::mt19937_64& gen, int count, int d) {
    std::normal_distribution<double> dist;
    std::vector<AffinePiece> out;
    for (int k = 0; k < count; ++k) {
        AffinePiece p{dist(gen), Eigen::VectorXd(d)};
        for (int j = 0; j < d; ++j) p.slope(j) = dist(gen);
        out.push_back(p);
    }
    return out;
}

}  // namespace

TEST(Evaluate, Concave) {
    EXPECT_EQ(eval_concave(ComponentSurface(Curvature::Concave, {piece(0, 1)}), v1(5)), 5.0);
    const ComponentSurface s(Curvature::Concave, {piece(0, 1), piece(1, -1)});
    EXPECT_EQ(eval_concave(s, v1(0.5)), 0.5);
    EXPECT_EQ(eval_concave(s, v1(2)), -1.0);
}

TEST(Evaluate, Convex) {
    EXPECT_EQ(eval_convex(ComponentSurface(Curvature::Convex, {piece(0, 1)}), v1(5)), 5.0);
    const ComponentSurface s(Curvature::Convex, {piece(0, 1), piece(1, -1)});
    EXPECT_EQ(eval_convex(s, v1(2)), 2.0);
    EXPECT_EQ(eval_convex(s, v1(0.5)), 0.5);
    EXPECT_EQ(predict_cnls(s, v1(2)), 2.0);
    EXPECT_EQ(predict_cnls(s, v1(0.5)), 0.5);
    EXPECT_EQ(predict_cnls(ComponentSurface(Curvature::Convex, {piece(0, 1)}), v1(5)), 5.0);
}

TEST(Evaluate, DispatchesOnTag) {
    const std::vector<AffinePiece> p{piece(0, 1), piece(1, -1)};
    EXPECT_EQ(evaluate(ComponentSurface(Curvature::Concave, p), v1(2)), -1.0);
    EXPECT_EQ(evaluate(ComponentSurface(Curvature::Convex, p), v1(2)), 2.0);
}

TEST(Predict, SumsComponents) {
    const IccnlsModel constants(ComponentSurface(Curvature::Concave, {piece(1, 0)}),
                                ComponentSurface(Curvature::Convex, {piece(2, 0)}), {"x"}, "fp", FitConfig{});
    for (double x : {-3.0, 0.0, 7.5}) EXPECT_EQ(predict(constants, v1(x)), 3.0);
    const IccnlsModel affine(ComponentSurface(Curvature::Concave, {piece(0, 1)}),
                             ComponentSurface(Curvature::Convex, {piece(0, 1)}), {"x"}, "fp", FitConfig{});
    EXPECT_EQ(predict(affine, v1(2)), 4.0);
    const Decomposition parts = predict_parts(affine, v1(2));
    EXPECT_EQ(parts.concave + parts.convex, parts.total);
}

TEST(Predict, RejectsBadPoints) {
    const IccnlsModel m(ComponentSurface(Curvature::Concave, {AffinePiece{0, Eigen::VectorXd::Zero(3)}}),
                        ComponentSurface(Curvature::Convex, {AffinePiece{0, Eigen::VectorXd::Zero(3)}}),
                        {"a", "b", "c"}, "fp", FitConfig{});
    try {
        predict(m, Eigen::VectorXd::Zero(2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    bad(1) = std::numeric_limits<double>::infinity();
    try {
        predict(m, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
    }
}

TEST(Evaluate, ConcavityAndConvexity) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-5, 5), t01(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pieces = random_pieces(gen, 1 + trial % 9, 2);
        const ComponentSurface cc(Curvature::Concave, pieces), cv(Curvature::Convex, pieces);
        Eigen::VectorXd a(2), b(2);
        a << u(gen), u(gen);
        b << u(gen), u(gen);
        const double t = t01(gen);
        const Eigen::VectorXd m = t * a + (1 - t) * b;
        EXPECT_GE(eval_concave(cc, m), t * eval_concave(cc, a) + (1 - t) * eval_concave(cc, b) - 1e-9);
        EXPECT_LE(eval_convex(cv, m), t * eval_convex(cv, a) + (1 - t) * eval_convex(cv, b) + 1e-9);
    }
}

TEST(Evaluate, PieceOrderInvariance) {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 50; ++trial) {
        auto pieces = random_pieces(gen, 8, 3);
        const ComponentSurface a(Curvature::Convex, pieces);
        const ComponentSurface ac(Curvature::Concave, pieces);
        std::shuffle(pieces.begin(), pieces.end(), gen);
        const ComponentSurface b(Curvature::Convex, pieces);
        const ComponentSurface bc(Curvature::Concave, pieces);
        Eigen::VectorXd x(3);
        x << dist(gen), dist(gen), dist(gen);
        EXPECT_EQ(eval_convex(a, x), eval_convex(b, x));
        EXPECT_EQ(eval_concave(ac, x), eval_concave(bc, x));
    }
}
