#include "iccnls/qp_assembly.hpp"

#include <cmath>

namespace iccnls {

VariableLayout::VariableLayout(Variant variant, Eigen::Index n, Eigen::Index d, bool use_l1_split)
    : variant_(variant), n_(n), d_(d), split_(use_l1_split) {
    if (n < 1 || d < 1) {
        throw Error(ErrorCode::DimensionMismatch, "layout needs n >= 1 and d >= 1");
    }
}

Eigen::Index VariableLayout::base(Curvature c, Eigen::Index i) const {
    if (!has_component(c)) {
        throw Error(ErrorCode::UnsupportedCombination,
                    std::string("layout has no ") + std::string(to_string(c)) + " component");
    }
    const Eigen::Index comp = (variant_ == Variant::CNLS || c == Curvature::Concave) ? 0 : 1;
    return (comp * n_ + i) * block_size();
}

Eigen::Index VariableLayout::intercept(Curvature c, Eigen::Index i) const { return base(c, i); }

Eigen::Index VariableLayout::slope(Curvature c, Eigen::Index i, Eigen::Index j) const {
    if (split_) throw Error(ErrorCode::UnsupportedCombination, "split layout has no plain slope variables");
    return base(c, i) + 1 + j;
}

Eigen::Index VariableLayout::slope_pos(Curvature c, Eigen::Index i, Eigen::Index j) const {
    if (!split_) throw Error(ErrorCode::UnsupportedCombination, "layout is not split");
    return base(c, i) + 1 + j;
}

Eigen::Index VariableLayout::slope_neg(Curvature c, Eigen::Index i, Eigen::Index j) const {
    if (!split_) throw Error(ErrorCode::UnsupportedCombination, "layout is not split");
    return base(c, i) + 1 + d_ + j;
}

std::vector<std::pair<Eigen::Index, double>> VariableLayout::slope_terms(Curvature c, Eigen::Index i,
                                                                         Eigen::Index j) const {
    if (split_) return {{slope_pos(c, i, j), 1.0}, {slope_neg(c, i, j), -1.0}};
    return {{slope(c, i, j), 1.0}};
}

std::vector<Curvature> VariableLayout::components() const {
    if (variant_ == Variant::CNLS) return {Curvature::Convex};
    return {Curvature::Concave, Curvature::Convex};
}

void QpProblem::check_dimensions() const {
    const Eigen::Index m = lin.size();
    bool ok = quad.rows() == m && quad.cols() == m;
    ok = ok && ineq_lhs.rows() == ineq_rhs.size() && (ineq_lhs.rows() == 0 || ineq_lhs.cols() == m);
    ok = ok && eq_lhs.rows() == eq_rhs.size() && (eq_lhs.rows() == 0 || eq_lhs.cols() == m);
    ok = ok && (!layout || layout->total() == m);
    if (!ok) throw Error(ErrorCode::DimensionMismatch, "QP blocks have inconsistent dimensions");
}

namespace {

void check_layout(const Dataset& data, const VariableLayout& layout) {
    if (layout.n() != data.n() || layout.d() != data.d()) {
        throw Error(ErrorCode::DimensionMismatch, "layout does not match the dataset shape");
    }
}

// Appends coefficients of piece `owner` evaluated at x_i, scaled by `sign`.
void push_piece(std::vector<Eigen::Triplet<double>>& out, Eigen::Index row, const VariableLayout& layout,
                Curvature c, Eigen::Index owner, const Eigen::MatrixXd& x, Eigen::Index i, double sign) {
    out.emplace_back(static_cast<int>(row), static_cast<int>(layout.intercept(c, owner)), sign);
    for (Eigen::Index j = 0; j < layout.d(); ++j) {
        for (const auto& [idx, s] : layout.slope_terms(c, owner, j)) {
            out.emplace_back(static_cast<int>(row), static_cast<int>(idx), sign * s * x(i, j));
        }
    }
}

}  // namespace

RowBlock assemble_shape_block(const Dataset& data, Curvature curvature, const VariableLayout& layout) {
    check_layout(data, layout);
    const Eigen::Index n = data.n();
    const double orient = curvature == Curvature::Convex ? 1.0 : -1.0;
    RowBlock block;
    block.rhs.reserve(static_cast<std::size_t>(n * (n - 1)));
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index h = 0; h < n; ++h) {
            if (h == i) continue;
            push_piece(block.entries, row, layout, curvature, h, data.features(), i, orient);
            push_piece(block.entries, row, layout, curvature, i, data.features(), i, -orient);
            block.rhs.push_back(0.0);
            ++row;
        }
    }
    return block;
}

std::vector<std::pair<Eigen::Index, double>> fitted_value_row(const Dataset& data,
                                                              const VariableLayout& layout,
                                                              Eigen::Index i) {
    std::vector<std::pair<Eigen::Index, double>> row;
    for (Curvature c : layout.components()) {
        row.emplace_back(layout.intercept(c, i), 1.0);
        for (Eigen::Index j = 0; j < layout.d(); ++j) {
            for (const auto& [idx, s] : layout.slope_terms(c, i, j)) {
                row.emplace_back(idx, s * data.features()(i, j));
            }
        }
    }
    return row;
}

RowBlock assemble_orthogonality_block(const Dataset& data, const VariableLayout& layout) {
    check_layout(data, layout);
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    const auto& x = data.features();
    const auto& y = data.target();
    RowBlock block;
    block.rhs.assign(static_cast<std::size_t>(d + 1), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto fi = fitted_value_row(data, layout, i);
        for (Eigen::Index r = 0; r <= d; ++r) {
            const double w = r == 0 ? 1.0 : x(i, r - 1);
            for (const auto& [idx, coef] : fi) {
                block.entries.emplace_back(static_cast<int>(r), static_cast<int>(idx), w * coef);
            }
            block.rhs[static_cast<std::size_t>(r)] += w * y(i);
        }
    }
    return block;
}

Objective assemble_objective(const Dataset& data, const FitConfig& config, const VariableLayout& layout,
                             double ridge_extra) {
    check_layout(data, layout);
    if (config.lambda * config.mix > 0.0 && !layout.use_l1_split()) {
        throw Error(ErrorCode::UnsupportedCombination, "an l1 penalty needs the split slope layout");
    }
    const Eigen::Index m = layout.total();
    Objective obj;
    obj.quad = Eigen::MatrixXd::Zero(m, m);
    obj.lin = Eigen::VectorXd::Zero(m);
    obj.constant = data.target().squaredNorm();

    // SSE = sum_i (y_i - a_i'z)^2 = 0.5 z'(2 sum a_i a_i')z - 2 sum y_i a_i'z + sum y_i^2
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const auto row = fitted_value_row(data, layout, i);
        for (const auto& [p, cp] : row) {
            obj.lin(p) -= 2.0 * data.target()(i) * cp;
            for (const auto& [q, cq] : row) obj.quad(p, q) += 2.0 * cp * cq;
        }
    }

    const double ridge = config.lambda * (1.0 - config.mix) + ridge_extra;
    const double l1 = config.lambda * config.mix;
    for (Curvature c : layout.components()) {
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            for (Eigen::Index j = 0; j < data.d(); ++j) {
                const auto terms = layout.slope_terms(c, i, j);
                if (ridge > 0.0) {
                    for (const auto& [p, sp] : terms) {
                        for (const auto& [q, sq] : terms) obj.quad(p, q) += 2.0 * ridge * sp * sq;
                    }
                }
                if (l1 > 0.0) {
                    obj.lin(layout.slope_pos(c, i, j)) += l1;
                    obj.lin(layout.slope_neg(c, i, j)) += l1;
                }
            }
        }
    }
    return obj;
}

namespace {

// Greedily keeps moment rows (1, x_1, ..., x_d over observations) that raise the rank.
std::vector<Eigen::Index> independent_moment_rows(const Dataset& data) {
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    Eigen::MatrixXd moments(d + 1, n);
    moments.row(0).setOnes();
    moments.bottomRows(d) = data.features().transpose();
    std::vector<Eigen::Index> kept;
    Eigen::Index rank = 0;
    for (Eigen::Index r = 0; r <= d; ++r) {
        Eigen::MatrixXd trial(static_cast<Eigen::Index>(kept.size()) + 1, n);
        for (std::size_t k = 0; k < kept.size(); ++k) trial.row(static_cast<Eigen::Index>(k)) = moments.row(kept[k]);
        trial.row(trial.rows() - 1) = moments.row(r);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial.transpose());
        qr.setThreshold(1e-10);
        if (qr.rank() > rank) {
            kept.push_back(r);
            rank = qr.rank();
        }
    }
    return kept;
}

}  // namespace

QpProblem assemble_qp(const Dataset& data, const FitConfig& config, Variant variant) {
    config.validate();
    const bool split = config.lambda * config.mix > 0.0;
    VariableLayout layout(variant, data.n(), data.d(), split);
    const Eigen::Index m = layout.total();

    const double gauge = (variant == Variant::ICCNLS && config.lambda == 0.0) ? config.gauge_ridge : 0.0;
    Objective obj = assemble_objective(data, config, layout, gauge);

    QpProblem qp;
    qp.quad = std::move(obj.quad);
    qp.lin = std::move(obj.lin);
    qp.constant = obj.constant;

    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> rhs;
    auto append = [&](const RowBlock& block) {
        const auto offset = static_cast<int>(rhs.size());
        for (const auto& t : block.entries) triplets.emplace_back(t.row() + offset, t.col(), t.value());
        rhs.insert(rhs.end(), block.rhs.begin(), block.rhs.end());
    };
    for (Curvature c : layout.components()) append(assemble_shape_block(data, c, layout));

    const bool monotone = config.monotone || variant == Variant::MNLS;
    if (monotone) {
        RowBlock signs;
        for (Curvature c : layout.components()) {
            for (Eigen::Index i = 0; i < data.n(); ++i) {
                for (Eigen::Index j = 0; j < data.d(); ++j) {
                    const auto row = static_cast<int>(signs.rows());
                    for (const auto& [idx, s] : layout.slope_terms(c, i, j)) {
                        signs.entries.emplace_back(row, static_cast<int>(idx), -s);
                    }
                    signs.rhs.push_back(0.0);
                }
            }
        }
        append(signs);
    }
    if (split) {
        RowBlock nonneg;
        for (Curvature c : layout.components()) {
            for (Eigen::Index i = 0; i < data.n(); ++i) {
                for (Eigen::Index j = 0; j < data.d(); ++j) {
                    for (Eigen::Index idx : {layout.slope_pos(c, i, j), layout.slope_neg(c, i, j)}) {
                        nonneg.entries.emplace_back(static_cast<int>(nonneg.rows()), static_cast<int>(idx), -1.0);
                        nonneg.rhs.push_back(0.0);
                    }
                }
            }
        }
        append(nonneg);
    }
    qp.ineq_lhs.resize(static_cast<Eigen::Index>(rhs.size()), m);
    qp.ineq_lhs.setFromTriplets(triplets.begin(), triplets.end());
    qp.ineq_rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

    if (variant == Variant::ICCNLS) {
        const RowBlock ortho = assemble_orthogonality_block(data, layout);
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(ortho.rows(), m);
        for (const auto& t : ortho.entries) full(t.row(), t.col()) += t.value();
        const auto kept = independent_moment_rows(data);
        qp.eq_lhs.resize(static_cast<Eigen::Index>(kept.size()), m);
        qp.eq_rhs.resize(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t k = 0; k < kept.size(); ++k) {
            const auto r = static_cast<Eigen::Index>(k);
            qp.eq_lhs.row(r) = full.row(kept[k]);
            qp.eq_rhs(r) = ortho.rhs[static_cast<std::size_t>(kept[k])];
        }
        if (static_cast<Eigen::Index>(kept.size()) < ortho.rows()) {
            qp.warnings.push_back("dropped " + std::to_string(ortho.rows() - static_cast<Eigen::Index>(kept.size())) +
                                  " linearly dependent orthogonality row(s)");
        }
    } else {
        qp.eq_lhs.resize(0, m);
        qp.eq_rhs.resize(0);
    }
    qp.layout = layout;
    return qp;
}

}  // namespace iccnls
