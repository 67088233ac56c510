#pragma once

#include <optional>

#include "iccnls/model_core.hpp"

namespace iccnls {

double rmse(const Eigen::Ref<const Eigen::VectorXd>& residuals);
double mae(const Eigen::Ref<const Eigen::VectorXd>& residuals);
/// rmse / mae, or nothing when mae == 0.
std::optional<double> dispersion_ratio(const Eigen::Ref<const Eigen::VectorXd>& residuals);

inline constexpr double kDefaultRoundTol = 1e-4;

/// Number of distinct combined hyperplanes (a_i^c + a_i^v, b_i^c + b_i^v).
/// Two tuples belong to the same class when they are linked by a chain of
/// tuples whose coordinates each differ by at most round_tol.
int count_hyperplanes(const IccnlsModel& model, double round_tol = kDefaultRoundTol);
/// Same rule applied to a single surface's pieces.
int count_hyperplanes(const ComponentSurface& surface, double round_tol = kDefaultRoundTol);
int count_distinct(const std::vector<AffinePiece>& pieces, double round_tol);

}  // namespace iccnls
