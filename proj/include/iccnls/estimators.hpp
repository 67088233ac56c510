#pragma once

#include <string>
#include <vector>

#include "iccnls/model_core.hpp"
#include "iccnls/qp_solver.hpp"

namespace iccnls {

struct CnlsFit {
    ComponentSurface surface;
    FitReport report;
};

struct IccnlsFit {
    IccnlsModel model;
    FitReport report;
};

/// Raised by the fit_* entry points when the solver does not reach Optimal.
/// The partial fit is attached.
class SolverFailed : public Error {
public:
    SolverFailed(IccnlsFit partial, const std::string& what)
        : Error(ErrorCode::SolverFailed, what), partial_(std::move(partial)) {}

    const IccnlsFit& partial() const noexcept { return partial_; }
    SolverStatus status() const noexcept { return partial_.report.solver_status; }

private:
    IccnlsFit partial_;
};

/// Fits any variant and returns the result whatever the solver status.
/// CNLS models carry a single zero piece as their concave component.
IccnlsFit fit(const Dataset& data, const FitConfig& config, Variant variant);

CnlsFit fit_cnls(const Dataset& data, const FitConfig& config);
IccnlsFit fit_mnls(const Dataset& data, const FitConfig& config);
IccnlsFit fit_iccnls(const Dataset& data, const FitConfig& config);

/// Wraps a convex surface as a model whose concave part is identically zero.
IccnlsModel cnls_as_model(const ComponentSurface& surface, std::vector<std::string> feature_names,
                          std::string fingerprint, const FitConfig& config);

struct SweepRow {
    double lambda = 0.0;
    double mix = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    std::optional<double> ratio;
    int hyperplanes = 0;
    SolverStatus status = SolverStatus::Optimal;
    int iterations = 0;
    /// Set when the cell did not produce an Optimal fit.
    bool failed = false;
    std::string message;
};

/// One ICCNLS fit per (lambda, mix) cell, rows ordered by lambda then mix
/// ascending. Cells run on up to `threads` workers; output order is fixed.
std::vector<SweepRow> sweep(const Dataset& data, std::vector<double> lambdas, std::vector<double> mixes,
                            const FitConfig& base, unsigned threads = 1);

}  // namespace iccnls
