#pragma once

#include <optional>

#include "iccnls/model_core.hpp"

namespace iccnls {

struct ShapeCertificate {
    /// Largest signed violation over all (i, h) pairs; <= 0 means every
    /// inequality holds. Zero when there are no pairs.
    double max_violation = 0.0;
    Eigen::Index worst_i = -1;
    Eigen::Index worst_h = -1;
    /// 1 + largest |own piece value| at the training points.
    double scale = 1.0;
    bool passed = true;
};

/// Checks the pairwise subgradient inequalities of a surface at the training
/// points that produced it (piece i belongs to observation i). Passes when
/// max_violation <= tol * scale.
ShapeCertificate certify_shape(const ComponentSurface& surface, const Dataset& data, double tol);

struct OrthogonalityCertificate {
    double residual_sum = 0.0;
    Eigen::VectorXd moment_sums;
    double residual_scale = 1.0;
    Eigen::VectorXd moment_scales;
    bool passed = true;
};

/// Passes when |sum e_i| <= tol (1 + sum |y_i|) and, for each feature j,
/// |sum e_i x_ij| <= tol (1 + sum |y_i x_ij|).
OrthogonalityCertificate certify_orthogonality(const FitReport& report, const Dataset& data, double tol);

struct GaugeComparison {
    bool equivalent_up_to_constant = false;
    /// Mean concave intercept difference m1 - m2, when slopes agree.
    std::optional<double> c;
    double slope_gap = 0.0;
    double intercept_spread = 0.0;
    double convex_offset_gap = 0.0;
};

/// Tests whether two fits differ only by a constant moved between components.
GaugeComparison gauge_compare(const IccnlsModel& m1, const IccnlsModel& m2, double tol);

}  // namespace iccnls
