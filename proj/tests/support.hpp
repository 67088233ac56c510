#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "iccnls/model_core.hpp"
#include "iccnls/qp_assembly.hpp"

namespace iccnls::testing {

inline Dataset make_dataset(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < x.front().size(); ++j) names.push_back("x" + std::to_string(j + 1));
    return validate_dataset(x, y, names);
}

inline Dataset random_dataset(std::mt19937_64& gen, int n, int d, double noise = 1.0) {
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    std::normal_distribution<double> eps(0.0, noise);
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            x(i, j) = unif(gen);
            s += (j % 2 == 0 ? 1.0 : -1.0) * x(i, j) * x(i, j);
        }
        y(i) = s + eps(gen);
    }
    std::vector<std::string> names;
    for (int j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
    return Dataset(std::move(x), std::move(y), std::move(names));
}

// f_z(x_i) computed straight from the layout, independently of the QP matrices.
inline double fitted_from_z(const Dataset& data, const VariableLayout& layout, const Eigen::VectorXd& z,
                            Eigen::Index i) {
    double f = 0.0;
    for (Curvature c : layout.components()) {
        f += z(layout.intercept(c, i));
        for (Eigen::Index j = 0; j < data.d(); ++j) {
            double b = 0.0;
            if (layout.use_l1_split()) {
                b = z(layout.slope_pos(c, i, j)) - z(layout.slope_neg(c, i, j));
            } else {
                b = z(layout.slope(c, i, j));
            }
            f += b * data.features()(i, j);
        }
    }
    return f;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("iccnls_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace iccnls::testing
