#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iccnls/error.hpp"

namespace iccnls {

/// n observations of d real features plus a real target. Immutable once built.
class Dataset {
public:
    Dataset(Eigen::MatrixXd features, Eigen::VectorXd target,
            std::vector<std::string> feature_names);

    const Eigen::MatrixXd& features() const noexcept { return features_; }
    const Eigen::VectorXd& target() const noexcept { return target_; }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }

    Eigen::Index n() const noexcept { return features_.rows(); }
    Eigen::Index d() const noexcept { return features_.cols(); }
    Eigen::VectorXd row(Eigen::Index i) const { return features_.row(i).transpose(); }

    /// FNV-1a over shape and raw values, rendered as 16 hex digits.
    std::string fingerprint() const;

private:
    Eigen::MatrixXd features_;
    Eigen::VectorXd target_;
    std::vector<std::string> names_;
};

Dataset validate_dataset(const std::vector<std::vector<double>>& raw_features,
                         const std::vector<double>& raw_target,
                         const std::vector<std::string>& names);

struct AffinePiece {
    double intercept = 0.0;
    Eigen::VectorXd slope;

    double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        return intercept + slope.dot(x);
    }
};

enum class Curvature { Concave, Convex };

std::string_view to_string(Curvature c);

/// A curvature-tagged list of affine pieces; evaluation takes the min (concave)
/// or max (convex) over the pieces.
class ComponentSurface {
public:
    ComponentSurface(Curvature curvature, std::vector<AffinePiece> pieces);

    Curvature curvature() const noexcept { return curvature_; }
    const std::vector<AffinePiece>& pieces() const noexcept { return pieces_; }
    Eigen::Index d() const noexcept { return pieces_.front().slope.size(); }
    std::size_t size() const noexcept { return pieces_.size(); }

private:
    Curvature curvature_;
    std::vector<AffinePiece> pieces_;
};

enum class Variant { CNLS, MNLS, ICCNLS };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

struct FitConfig {
    double lambda = 0.0;
    /// Elastic-net mixing weight: 1 is pure l1, 0 is pure squared l2.
    double mix = 0.0;
    bool monotone = false;
    bool standardize = false;
    double solver_tol = 1e-6;
    int max_iter = 500;
    /// Squared-l2 weight on slopes applied to ICCNLS fits when lambda == 0.
    double gauge_ridge = 1e-8;
    /// Tolerance used when counting distinct hyperplanes.
    double round_tol = 1e-4;
    /// 0 starts the solver at the origin; any other value draws a seeded
    /// random starting point.
    std::uint64_t start_seed = 0;

    /// Throws InvalidConfig when an invariant is broken.
    void validate() const;
};

enum class SolverStatus { Optimal, MaxIter, Infeasible };

std::string_view to_string(SolverStatus s);

class IccnlsModel {
public:
    IccnlsModel(ComponentSurface concave, ComponentSurface convex,
                std::vector<std::string> feature_names, std::string train_fingerprint,
                FitConfig config_used, Variant variant = Variant::ICCNLS);

    const ComponentSurface& concave() const noexcept { return concave_; }
    const ComponentSurface& convex() const noexcept { return convex_; }
    Eigen::Index d() const noexcept { return concave_.d(); }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    const std::string& train_fingerprint() const noexcept { return fingerprint_; }
    const FitConfig& config_used() const noexcept { return config_; }
    Variant variant() const noexcept { return variant_; }

private:
    ComponentSurface concave_;
    ComponentSurface convex_;
    std::vector<std::string> names_;
    std::string fingerprint_;
    FitConfig config_;
    Variant variant_;
};

struct FitReport {
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    double rmse = 0.0;
    double mae = 0.0;
    /// Empty when mae is zero up to solver resolution, solver_tol (1 + max|y|)
    /// (printed as "n.a.").
    std::optional<double> ratio;
    int hyperplane_count = 0;
    int concave_hyperplanes = 0;
    int convex_hyperplanes = 0;
    SolverStatus solver_status = SolverStatus::Optimal;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    /// Penalized objective at the solution, including the constant sum of y^2.
    double objective = 0.0;
};

}  // namespace iccnls
