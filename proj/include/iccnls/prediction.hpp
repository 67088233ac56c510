#pragma once

#include "iccnls/model_core.hpp"

namespace iccnls {

/// Minimum over the pieces of a concave surface.
double eval_concave(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Maximum over the pieces of a convex surface.
double eval_convex(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Dispatches on the surface's curvature tag.
double evaluate(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x);

struct Decomposition {
    double concave = 0.0;
    double convex = 0.0;
    double total = 0.0;
};

Decomposition predict_parts(const IccnlsModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict(const IccnlsModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_cnls(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace iccnls
