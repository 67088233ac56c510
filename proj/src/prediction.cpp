#include "iccnls/prediction.hpp"

#include <algorithm>
#include <limits>

namespace iccnls {

namespace {

void check_query(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != surface.d()) {
        throw Error(ErrorCode::DimensionMismatch, "query point has " + std::to_string(x.size()) +
                                                      " coordinates, model expects " + std::to_string(surface.d()));
    }
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteValue, "query point is not finite");
}

}  // namespace

double eval_concave(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_query(surface, x);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& piece : surface.pieces()) best = std::min(best, piece(x));
    return best;
}

double eval_convex(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_query(surface, x);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& piece : surface.pieces()) best = std::max(best, piece(x));
    return best;
}

double evaluate(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return surface.curvature() == Curvature::Concave ? eval_concave(surface, x) : eval_convex(surface, x);
}

Decomposition predict_parts(const IccnlsModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    Decomposition out;
    out.concave = eval_concave(model.concave(), x);
    out.convex = eval_convex(model.convex(), x);
    out.total = out.concave + out.convex;
    return out;
}

double predict(const IccnlsModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return predict_parts(model, x).total;
}

double predict_cnls(const ComponentSurface& surface, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return eval_convex(surface, x);
}

}  // namespace iccnls
