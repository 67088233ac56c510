#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iccnls/model_core.hpp"

namespace iccnls {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Flat variable indexing for the piecewise-affine QPs.
///
/// Variables are stored component-major, then observation-major. Each
/// (component, observation) block holds the intercept followed by either the
/// d slopes or, with the l1 split, d positive parts then d negative parts.
/// CNLS has a single (convex) component; MNLS and ICCNLS have concave then convex.
class VariableLayout {
public:
    VariableLayout(Variant variant, Eigen::Index n, Eigen::Index d, bool use_l1_split);

    Variant variant() const noexcept { return variant_; }
    Eigen::Index n() const noexcept { return n_; }
    Eigen::Index d() const noexcept { return d_; }
    bool use_l1_split() const noexcept { return split_; }
    int component_count() const noexcept { return variant_ == Variant::CNLS ? 1 : 2; }
    bool has_component(Curvature c) const noexcept {
        return variant_ != Variant::CNLS || c == Curvature::Convex;
    }
    Eigen::Index total() const noexcept { return component_count() * n_ * block_size(); }
    Eigen::Index block_size() const noexcept { return 1 + (split_ ? 2 : 1) * d_; }

    Eigen::Index intercept(Curvature c, Eigen::Index i) const;
    /// Slope index in the unsplit layout.
    Eigen::Index slope(Curvature c, Eigen::Index i, Eigen::Index j) const;
    Eigen::Index slope_pos(Curvature c, Eigen::Index i, Eigen::Index j) const;
    Eigen::Index slope_neg(Curvature c, Eigen::Index i, Eigen::Index j) const;

    /// (index, sign) pairs whose signed sum is slope j of piece i in either layout.
    std::vector<std::pair<Eigen::Index, double>> slope_terms(Curvature c, Eigen::Index i,
                                                             Eigen::Index j) const;

    std::vector<Curvature> components() const;

    friend bool operator==(const VariableLayout&, const VariableLayout&) = default;

private:
    Eigen::Index base(Curvature c, Eigen::Index i) const;

    Variant variant_;
    Eigen::Index n_;
    Eigen::Index d_;
    bool split_;
};

/// minimize 0.5 z' quad z + lin' z + constant
/// subject to ineq_lhs z <= ineq_rhs and eq_lhs z == eq_rhs.
struct QpProblem {
    Eigen::MatrixXd quad;
    Eigen::VectorXd lin;
    double constant = 0.0;
    RowSparse ineq_lhs;
    Eigen::VectorXd ineq_rhs;
    Eigen::MatrixXd eq_lhs;
    Eigen::VectorXd eq_rhs;
    std::optional<VariableLayout> layout;
    std::vector<std::string> warnings;

    Eigen::Index variables() const noexcept { return lin.size(); }
    Eigen::Index inequalities() const noexcept { return ineq_rhs.size(); }
    Eigen::Index equalities() const noexcept { return eq_rhs.size(); }

    double objective(const Eigen::VectorXd& z) const {
        return 0.5 * z.dot(quad * z) + lin.dot(z) + constant;
    }

    /// Throws DimensionMismatch when the blocks disagree in size.
    void check_dimensions() const;
};

/// Triplet rows with their right-hand sides; rows are numbered from zero.
struct RowBlock {
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<double> rhs;

    Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(rhs.size()); }
};

/// Pairwise subgradient rows for one component, ordered by (i, h) with i != h.
/// Convex row (i, h): a_h + b_h'x_i - a_i - b_i'x_i <= 0; concave rows are negated.
RowBlock assemble_shape_block(const Dataset& data, Curvature curvature, const VariableLayout& layout);

/// Residual orthogonality as rows of C z = e: sum_i f(x_i) = sum_i y_i and
/// sum_i x_ij f(x_i) = sum_i x_ij y_i.
RowBlock assemble_orthogonality_block(const Dataset& data, const VariableLayout& layout);

struct Objective {
    Eigen::MatrixXd quad;
    Eigen::VectorXd lin;
    double constant = 0.0;
};

/// Sum of squared errors plus the elastic-net penalty on slopes. `ridge_extra`
/// adds a squared-l2 slope term on top of the configured penalty.
Objective assemble_objective(const Dataset& data, const FitConfig& config, const VariableLayout& layout,
                             double ridge_extra = 0.0);

/// Row of the fitted value f(x_i) as a linear function of z.
std::vector<std::pair<Eigen::Index, double>> fitted_value_row(const Dataset& data,
                                                              const VariableLayout& layout,
                                                              Eigen::Index i);

QpProblem assemble_qp(const Dataset& data, const FitConfig& config, Variant variant);

}  // namespace iccnls
