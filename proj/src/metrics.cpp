#include "iccnls/metrics.hpp"

#include <cmath>
#include <numeric>

namespace iccnls {

namespace {

void require_nonempty(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() == 0) throw Error(ErrorCode::EmptyInput, "residual vector is empty");
}

}  // namespace

double rmse(const Eigen::Ref<const Eigen::VectorXd>& residuals) {
    require_nonempty(residuals);
    return std::sqrt(residuals.squaredNorm() / static_cast<double>(residuals.size()));
}

double mae(const Eigen::Ref<const Eigen::VectorXd>& residuals) {
    require_nonempty(residuals);
    return residuals.cwiseAbs().sum() / static_cast<double>(residuals.size());
}

std::optional<double> dispersion_ratio(const Eigen::Ref<const Eigen::VectorXd>& residuals) {
    const double m = mae(residuals);
    if (m == 0.0) return std::nullopt;
    return rmse(residuals) / m;
}

int count_distinct(const std::vector<AffinePiece>& pieces, double round_tol) {
    if (!(round_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "round_tol must be positive");
    const std::size_t n = pieces.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&parent](std::size_t k) {
        while (parent[k] != k) {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        return k;
    };
    int classes = static_cast<int>(n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const auto& pa = pieces[a];
            const auto& pb = pieces[b];
            if (std::abs(pa.intercept - pb.intercept) > round_tol) continue;
            if ((pa.slope - pb.slope).cwiseAbs().maxCoeff() > round_tol) continue;
            const auto ra = find(a);
            const auto rb = find(b);
            if (ra != rb) {
                parent[ra] = rb;
                --classes;
            }
        }
    }
    return classes;
}

int count_hyperplanes(const ComponentSurface& surface, double round_tol) {
    return count_distinct(surface.pieces(), round_tol);
}

int count_hyperplanes(const IccnlsModel& model, double round_tol) {
    const auto& cc = model.concave().pieces();
    const auto& cv = model.convex().pieces();
    std::vector<AffinePiece> combined;
    if (cc.size() == cv.size()) {
        combined.reserve(cc.size());
        for (std::size_t i = 0; i < cc.size(); ++i) {
            combined.push_back({cc[i].intercept + cv[i].intercept, cc[i].slope + cv[i].slope});
        }
    } else if (cc.size() == 1) {
        // Single-component models carry one constant piece on the other side.
        for (const auto& p : cv) combined.push_back({p.intercept + cc[0].intercept, p.slope + cc[0].slope});
    } else if (cv.size() == 1) {
        for (const auto& p : cc) combined.push_back({p.intercept + cv[0].intercept, p.slope + cv[0].slope});
    } else {
        throw Error(ErrorCode::IndexMisalignment, "components have different piece counts");
    }
    return count_distinct(combined, round_tol);
}

}  // namespace iccnls
