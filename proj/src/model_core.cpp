#include "iccnls/model_core.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <iomanip>

namespace iccnls {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::UnsupportedCombination: return "UnsupportedCombination";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::SolverFailed: return "SolverFailed";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::UnparsableNumeric: return "UnparsableNumeric";
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::CorruptModel: return "CorruptModel";
        case ErrorCode::Io: return "Io";
        case ErrorCode::IndexMisalignment: return "IndexMisalignment";
        case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    }
    return "Unknown";
}

std::string_view to_string(Curvature c) {
    return c == Curvature::Concave ? "concave" : "convex";
}

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::CNLS: return "cnls";
        case Variant::MNLS: return "mnls";
        case Variant::ICCNLS: return "iccnls";
    }
    return "iccnls";
}

Variant variant_from_string(std::string_view name) {
    if (name == "cnls") return Variant::CNLS;
    if (name == "mnls") return Variant::MNLS;
    if (name == "iccnls") return Variant::ICCNLS;
    throw Error(ErrorCode::InvalidConfig, "unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::Optimal: return "Optimal";
        case SolverStatus::MaxIter: return "MaxIter";
        case SolverStatus::Infeasible: return "Infeasible";
    }
    return "Unknown";
}

Dataset::Dataset(Eigen::MatrixXd features, Eigen::VectorXd target,
                 std::vector<std::string> feature_names)
    : features_(std::move(features)), target_(std::move(target)), names_(std::move(feature_names)) {
    if (features_.rows() < 1 || features_.cols() < 1) {
        throw Error(ErrorCode::EmptyInput, "dataset needs at least one row and one feature");
    }
    if (target_.size() != features_.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "target length " + std::to_string(target_.size()) +
                                                      " != row count " + std::to_string(features_.rows()));
    }
    if (static_cast<Eigen::Index>(names_.size()) != features_.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(features_.cols()) +
                                                      " feature names, got " + std::to_string(names_.size()));
    }
    if (!features_.allFinite() || !target_.allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "dataset contains NaN or infinite values");
    }
}

std::string Dataset::fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix_bytes = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < len; ++k) {
            h ^= p[k];
            h *= 1099511628211ULL;
        }
    };
    const std::int64_t dims[2] = {static_cast<std::int64_t>(n()), static_cast<std::int64_t>(d())};
    mix_bytes(dims, sizeof(dims));
    for (Eigen::Index i = 0; i < n(); ++i) {
        for (Eigen::Index j = 0; j < d(); ++j) {
            const double v = features_(i, j);
            mix_bytes(&v, sizeof(v));
        }
        const double y = target_(i);
        mix_bytes(&y, sizeof(y));
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

Dataset validate_dataset(const std::vector<std::vector<double>>& raw_features,
                         const std::vector<double>& raw_target,
                         const std::vector<std::string>& names) {
    if (raw_features.empty() || raw_features.front().empty()) {
        throw Error(ErrorCode::EmptyInput, "feature array is empty");
    }
    const auto n = static_cast<Eigen::Index>(raw_features.size());
    const auto d = static_cast<Eigen::Index>(raw_features.front().size());
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = raw_features[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != d) {
            throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(i) + " has " +
                                                          std::to_string(row.size()) + " entries, expected " +
                                                          std::to_string(d));
        }
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = row[static_cast<std::size_t>(j)];
    }
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(raw_target.data(),
                                                          static_cast<Eigen::Index>(raw_target.size()));
    return Dataset(std::move(x), std::move(y), names);
}

ComponentSurface::ComponentSurface(Curvature curvature, std::vector<AffinePiece> pieces)
    : curvature_(curvature), pieces_(std::move(pieces)) {
    if (pieces_.empty()) {
        throw Error(ErrorCode::EmptyInput, "a component surface needs at least one piece");
    }
    const auto d = pieces_.front().slope.size();
    for (const auto& p : pieces_) {
        if (p.slope.size() != d) {
            throw Error(ErrorCode::DimensionMismatch, "pieces of one surface must share a dimension");
        }
        if (!std::isfinite(p.intercept) || !p.slope.allFinite()) {
            throw Error(ErrorCode::NonFiniteValue, "piece coefficients must be finite");
        }
    }
}

void FitConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorCode::InvalidConfig, "lambda must be a finite nonnegative number");
    }
    if (!(mix >= 0.0 && mix <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "mix must lie in [0, 1]");
    }
    if (!(solver_tol > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "solver_tol must be positive");
    }
    if (max_iter <= 0) {
        throw Error(ErrorCode::InvalidConfig, "max_iter must be positive");
    }
    if (!(gauge_ridge >= 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "gauge_ridge must be nonnegative");
    }
    if (!(round_tol > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "round_tol must be positive");
    }
}

IccnlsModel::IccnlsModel(ComponentSurface concave, ComponentSurface convex,
                         std::vector<std::string> feature_names, std::string train_fingerprint,
                         FitConfig config_used, Variant variant)
    : concave_(std::move(concave)),
      convex_(std::move(convex)),
      names_(std::move(feature_names)),
      fingerprint_(std::move(train_fingerprint)),
      config_(config_used),
      variant_(variant) {
    if (concave_.curvature() != Curvature::Concave || convex_.curvature() != Curvature::Convex) {
        throw Error(ErrorCode::InvalidConfig, "model components carry the wrong curvature tags");
    }
    if (concave_.d() != convex_.d()) {
        throw Error(ErrorCode::DimensionMismatch, "concave and convex components differ in dimension");
    }
    if (!names_.empty() && static_cast<Eigen::Index>(names_.size()) != concave_.d()) {
        throw Error(ErrorCode::DimensionMismatch, "feature name count does not match model dimension");
    }
}

}  // namespace iccnls
