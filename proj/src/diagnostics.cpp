#include "iccnls/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iccnls {

ShapeCertificate certify_shape(const ComponentSurface& surface, const Dataset& data, double tol) {
    const Eigen::Index n = data.n();
    if (static_cast<Eigen::Index>(surface.size()) != n || surface.d() != data.d()) {
        throw Error(ErrorCode::IndexMisalignment, "surface pieces are not aligned with the dataset rows");
    }
    const auto& pieces = surface.pieces();
    // Convex: piece h at x_i must not exceed piece i at x_i. Concave: must not fall below.
    const double orient = surface.curvature() == Curvature::Convex ? 1.0 : -1.0;
    ShapeCertificate cert;
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd xi = data.row(i);
        const double own = pieces[static_cast<std::size_t>(i)](xi);
        cert.scale = std::max(cert.scale, 1.0 + std::abs(own));
        for (Eigen::Index h = 0; h < n; ++h) {
            if (h == i) continue;
            const double v = orient * (pieces[static_cast<std::size_t>(h)](xi) - own);
            if (v > worst) {
                worst = v;
                cert.worst_i = i;
                cert.worst_h = h;
            }
        }
    }
    cert.max_violation = n > 1 ? worst : 0.0;
    cert.passed = cert.max_violation <= tol * cert.scale;
    return cert;
}

OrthogonalityCertificate certify_orthogonality(const FitReport& report, const Dataset& data, double tol) {
    if (report.residuals.size() != data.n()) {
        throw Error(ErrorCode::IndexMisalignment, "report residuals do not match the dataset rows");
    }
    const auto& e = report.residuals;
    const auto& x = data.features();
    const auto& y = data.target();
    OrthogonalityCertificate cert;
    cert.residual_sum = e.sum();
    cert.residual_scale = 1.0 + y.cwiseAbs().sum();
    cert.moment_sums = x.transpose() * e;
    cert.moment_scales = Eigen::VectorXd::Ones(data.d()) + (x.cwiseAbs().transpose() * y.cwiseAbs());
    cert.passed = std::abs(cert.residual_sum) <= tol * cert.residual_scale;
    for (Eigen::Index j = 0; j < data.d(); ++j) {
        cert.passed = cert.passed && std::abs(cert.moment_sums(j)) <= tol * cert.moment_scales(j);
    }
    return cert;
}

GaugeComparison gauge_compare(const IccnlsModel& m1, const IccnlsModel& m2, double tol) {
    if (m1.d() != m2.d()) throw Error(ErrorCode::DimensionMismatch, "models differ in dimension");
    if (m1.train_fingerprint() != m2.train_fingerprint()) {
        throw Error(ErrorCode::FingerprintMismatch, "models were trained on different data");
    }
    const auto& c1 = m1.concave().pieces();
    const auto& c2 = m2.concave().pieces();
    const auto& v1 = m1.convex().pieces();
    const auto& v2 = m2.convex().pieces();
    if (c1.size() != c2.size() || v1.size() != v2.size() || c1.size() != v1.size()) {
        throw Error(ErrorCode::IndexMisalignment, "models have different piece counts");
    }
    GaugeComparison out;
    const std::size_t n = c1.size();
    Eigen::VectorXd diff(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        out.slope_gap = std::max(out.slope_gap, (c1[i].slope - c2[i].slope).cwiseAbs().maxCoeff());
        out.slope_gap = std::max(out.slope_gap, (v1[i].slope - v2[i].slope).cwiseAbs().maxCoeff());
        diff(static_cast<Eigen::Index>(i)) = c1[i].intercept - c2[i].intercept;
    }
    const double c = diff.mean();
    out.intercept_spread = (diff.array() - c).abs().maxCoeff();
    for (std::size_t i = 0; i < n; ++i) {
        const double convex_diff = v1[i].intercept - v2[i].intercept;
        out.convex_offset_gap = std::max(out.convex_offset_gap, std::abs(convex_diff + diff(static_cast<Eigen::Index>(i))));
    }
    out.equivalent_up_to_constant =
        out.slope_gap <= tol && out.intercept_spread <= tol && out.convex_offset_gap <= tol;
    if (out.equivalent_up_to_constant) out.c = c;
    return out;
}

}  // namespace iccnls
