#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iccnls/model_core.hpp"

namespace iccnls {

enum class ColumnKind { Numeric, Categorical, Target, Ignore };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
};

/// Header plus string cells of an RFC-4180 style CSV file.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
/// Quotes fields only when they contain a comma, quote or line break.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string csv_escape(const std::string& field);

/// Parses a numeric cell; throws UnparsableNumeric naming the row and column.
double parse_number(const std::string& cell, std::size_t row, const std::string& column);

/// Builds a dataset from the listed columns, in spec order. Categorical columns
/// become k-1 indicator columns named "col=level" (the first level seen is the
/// reference). Columns of the file not listed in `specs` are ignored.
Dataset load_csv(const std::filesystem::path& path, const std::vector<ColumnSpec>& specs,
                 std::vector<std::string>* warnings = nullptr);

/// Specs for every header column: `target` as Target, names in `categorical` as
/// Categorical, names in `ignored` as Ignore, everything else Numeric.
std::vector<ColumnSpec> infer_specs(const std::vector<std::string>& header, const std::string& target,
                                    const std::vector<std::string>& categorical,
                                    const std::vector<std::string>& ignored = {});

/// Writes features then the target (column `target_name`) with 17 significant digits.
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path,
                      const std::string& target_name = "y");

/// Synthetic benchmark: x_ij ~ U[0, 10] for three features and
///   y = 0.2 x1^2 - 0.3 x2^2 + sin(2 x1) cos(0.5 x2) + N(0, noise_sd^2).
/// Draws come from std::mt19937_64(seed). A uniform is (word >> 11) * 2^-53 and a
/// normal uses Box-Muller on two uniforms (cosine branch), so the stream is
/// identical on every platform. Per row: x1, x2, x3, then the noise pair.
Dataset generate_synthetic(int n, std::uint64_t seed, double noise_sd = 0.5);

/// Noise-free target of the synthetic benchmark.
double synthetic_signal(double x1, double x2);

inline constexpr const char* kModelVersion = "iccnls-model/1";

std::string model_to_json(const IccnlsModel& model);
IccnlsModel model_from_json(const std::string& text);
void save_model(const IccnlsModel& model, const std::filesystem::path& path);
IccnlsModel load_model(const std::filesystem::path& path);

/// Machine-readable fit report: every FitReport field at full precision, with
/// "ratio" written as the string "n.a." when undefined.
std::string report_to_json(const FitReport& report);
FitReport report_from_json(const std::string& text);

}  // namespace iccnls
