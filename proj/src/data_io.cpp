#include "iccnls/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace iccnls {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::vector<std::vector<std::string>> parse_records(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char ch = text[k];
        if (quoted) {
            if (ch == '"') {
                if (k + 1 < text.size() && text[k + 1] == '"') {
                    field += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        switch (ch) {
            case '"':
                quoted = true;
                any = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                if (any || !field.empty()) {
                    record.push_back(std::move(field));
                    records.push_back(std::move(record));
                }
                record.clear();
                field.clear();
                any = false;
                break;
            default:
                field += ch;
                any = true;
        }
    }
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

double next_uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);
    auto records = parse_records(text);
    if (records.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " is empty");
    CsvTable table;
    for (auto& h : records.front()) table.header.push_back(trim(h));
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size()) {
            throw Error(ErrorCode::DimensionMismatch, path.string() + ": row " + std::to_string(r) + " has " +
                                                          std::to_string(records[r].size()) + " fields, header has " +
                                                          std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k) out << ',';
            out << csv_escape(fields[k]);
        }
        out << '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    const std::string t = trim(cell);
    double value = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (t.empty() || ec != std::errc() || ptr != last) {
        throw Error(ErrorCode::UnparsableNumeric,
                    "row " + std::to_string(row) + ", column '" + column + "': cannot parse '" + cell + "'");
    }
    if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteValue,
                    "row " + std::to_string(row) + ", column '" + column + "' is not finite");
    }
    return value;
}

std::vector<ColumnSpec> infer_specs(const std::vector<std::string>& header, const std::string& target,
                                    const std::vector<std::string>& categorical,
                                    const std::vector<std::string>& ignored) {
    auto listed = [](const std::vector<std::string>& v, const std::string& s) {
        return std::find(v.begin(), v.end(), s) != v.end();
    };
    if (!listed(header, target)) throw Error(ErrorCode::MissingColumn, "target column '" + target + "' not found");
    for (const auto& c : categorical) {
        if (!listed(header, c)) throw Error(ErrorCode::MissingColumn, "categorical column '" + c + "' not found");
    }
    std::vector<ColumnSpec> specs;
    for (const auto& h : header) {
        ColumnKind kind = ColumnKind::Numeric;
        if (h == target) kind = ColumnKind::Target;
        else if (listed(categorical, h)) kind = ColumnKind::Categorical;
        else if (listed(ignored, h)) kind = ColumnKind::Ignore;
        specs.push_back({h, kind});
    }
    return specs;
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<ColumnSpec>& specs,
                 std::vector<std::string>* warnings) {
    const auto targets = std::count_if(specs.begin(), specs.end(),
                                       [](const ColumnSpec& s) { return s.kind == ColumnKind::Target; });
    if (targets != 1) throw Error(ErrorCode::InvalidConfig, "exactly one target column is required");

    const CsvTable table = read_csv(path);
    if (table.rows.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " has a header but no rows");
    std::map<std::string, std::size_t> column;
    for (std::size_t k = 0; k < table.header.size(); ++k) column.emplace(table.header[k], k);
    auto locate = [&](const std::string& name) {
        const auto it = column.find(name);
        if (it == column.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not in " + path.string());
        return it->second;
    };

    const std::size_t n = table.rows.size();
    std::vector<std::vector<double>> feature_cols;
    std::vector<std::string> names;
    std::vector<double> target(n);
    for (const auto& spec : specs) {
        if (spec.kind == ColumnKind::Ignore) continue;
        const std::size_t col = locate(spec.name);
        if (spec.kind == ColumnKind::Target || spec.kind == ColumnKind::Numeric) {
            std::vector<double> values(n);
            for (std::size_t r = 0; r < n; ++r) values[r] = parse_number(table.rows[r][col], r + 1, spec.name);
            if (spec.kind == ColumnKind::Target) {
                target = std::move(values);
            } else {
                feature_cols.push_back(std::move(values));
                names.push_back(spec.name);
            }
            continue;
        }
        std::vector<std::string> levels;
        for (std::size_t r = 0; r < n; ++r) {
            const std::string level = trim(table.rows[r][col]);
            if (std::find(levels.begin(), levels.end(), level) == levels.end()) levels.push_back(level);
        }
        if (levels.size() < 2) {
            if (warnings) warnings->push_back("categorical column '" + spec.name + "' has a single level; dropped");
            continue;
        }
        for (std::size_t l = 1; l < levels.size(); ++l) {
            std::vector<double> indicator(n);
            for (std::size_t r = 0; r < n; ++r) indicator[r] = trim(table.rows[r][col]) == levels[l] ? 1.0 : 0.0;
            feature_cols.push_back(std::move(indicator));
            names.push_back(spec.name + "=" + levels[l]);
        }
    }
    if (feature_cols.empty()) throw Error(ErrorCode::EmptyInput, "no feature columns remain in " + path.string());

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
        for (std::size_t r = 0; r < n; ++r) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = feature_cols[j][r];
    }
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(n));
    return Dataset(std::move(x), std::move(y), std::move(names));
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path, const std::string& target_name) {
    CsvTable table;
    table.header = data.feature_names();
    table.header.push_back(target_name);
    auto fmt = [](double v) {
        char buf[32];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
        return std::string(buf, ptr);
    };
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        std::vector<std::string> row;
        for (Eigen::Index j = 0; j < data.d(); ++j) row.push_back(fmt(data.features()(i, j)));
        row.push_back(fmt(data.target()(i)));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

double synthetic_signal(double x1, double x2) {
    return 0.2 * x1 * x1 - 0.3 * x2 * x2 + std::sin(2.0 * x1) * std::cos(0.5 * x2);
}

Dataset generate_synthetic(int n, std::uint64_t seed, double noise_sd) {
    if (n < 1) throw Error(ErrorCode::EmptyInput, "synthetic dataset needs n >= 1");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
        throw Error(ErrorCode::InvalidConfig, "noise_sd must be finite and nonnegative");
    }
    std::mt19937_64 gen(seed);
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = 10.0 * next_uniform(gen);
        const double u1 = 1.0 - next_uniform(gen);
        const double u2 = next_uniform(gen);
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        y(i) = synthetic_signal(x(i, 0), x(i, 1)) + noise_sd * z;
    }
    return Dataset(std::move(x), std::move(y), {"x1", "x2", "x3"});
}

namespace {

using nlohmann::json;

json pieces_to_json(const ComponentSurface& s) {
    json arr = json::array();
    for (const auto& p : s.pieces()) {
        arr.push_back({{"intercept", p.intercept},
                       {"slope", std::vector<double>(p.slope.data(), p.slope.data() + p.slope.size())}});
    }
    return arr;
}

std::vector<AffinePiece> pieces_from_json(const json& arr, Eigen::Index d) {
    if (!arr.is_array() || arr.empty()) throw Error(ErrorCode::CorruptModel, "piece list missing or empty");
    std::vector<AffinePiece> pieces;
    for (const auto& item : arr) {
        const auto slope = item.at("slope").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(slope.size()) != d) {
            throw Error(ErrorCode::CorruptModel, "piece slope length does not match d");
        }
        AffinePiece p;
        p.intercept = item.at("intercept").get<double>();
        p.slope = Eigen::Map<const Eigen::VectorXd>(slope.data(), d);
        pieces.push_back(std::move(p));
    }
    return pieces;
}

}  // namespace

std::string model_to_json(const IccnlsModel& model) {
    const FitConfig& c = model.config_used();
    json doc;
    doc["version"] = kModelVersion;
    doc["variant"] = std::string(to_string(model.variant()));
    doc["d"] = model.d();
    doc["feature_names"] = model.feature_names();
    doc["concave"] = pieces_to_json(model.concave());
    doc["convex"] = pieces_to_json(model.convex());
    doc["config_used"] = {{"lambda", c.lambda},         {"mix", c.mix},
                          {"monotone", c.monotone},     {"standardize", c.standardize},
                          {"solver_tol", c.solver_tol}, {"max_iter", c.max_iter},
                          {"gauge_ridge", c.gauge_ridge}, {"round_tol", c.round_tol},
                          {"start_seed", c.start_seed}};
    doc["train_fingerprint"] = model.train_fingerprint();
    return doc.dump(2);
}

IccnlsModel model_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        if (!doc.contains("version") || doc.at("version") != kModelVersion) {
            throw Error(ErrorCode::CorruptModel, "unsupported model version");
        }
        const auto d = doc.at("d").get<Eigen::Index>();
        if (d < 1) throw Error(ErrorCode::CorruptModel, "model dimension must be positive");
        const auto& cj = doc.at("config_used");
        FitConfig c;
        c.lambda = cj.at("lambda").get<double>();
        c.mix = cj.at("mix").get<double>();
        c.monotone = cj.at("monotone").get<bool>();
        c.standardize = cj.at("standardize").get<bool>();
        c.solver_tol = cj.at("solver_tol").get<double>();
        c.max_iter = cj.at("max_iter").get<int>();
        c.gauge_ridge = cj.at("gauge_ridge").get<double>();
        c.round_tol = cj.value("round_tol", 1e-4);
        c.start_seed = cj.value("start_seed", std::uint64_t{0});
        return IccnlsModel(ComponentSurface(Curvature::Concave, pieces_from_json(doc.at("concave"), d)),
                           ComponentSurface(Curvature::Convex, pieces_from_json(doc.at("convex"), d)),
                           doc.at("feature_names").get<std::vector<std::string>>(),
                           doc.at("train_fingerprint").get<std::string>(), c,
                           variant_from_string(doc.value("variant", std::string("iccnls"))));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed model document: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptModel) throw;
        throw Error(ErrorCode::CorruptModel, std::string("invalid model: ") + e.what());
    }
}

std::string report_to_json(const FitReport& r) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    json doc;
    doc["rmse"] = r.rmse;
    doc["mae"] = r.mae;
    doc["ratio"] = r.ratio ? json(*r.ratio) : json("n.a.");
    doc["H"] = r.hyperplane_count;
    doc["H_concave"] = r.concave_hyperplanes;
    doc["H_convex"] = r.convex_hyperplanes;
    doc["solver_status"] = std::string(to_string(r.solver_status));
    doc["iterations"] = r.iterations;
    doc["primal_residual"] = r.primal_residual;
    doc["dual_residual"] = r.dual_residual;
    doc["objective"] = r.objective;
    doc["fitted"] = vec(r.fitted);
    doc["residuals"] = vec(r.residuals);
    return doc.dump(2);
}

FitReport report_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        FitReport r;
        r.rmse = doc.at("rmse").get<double>();
        r.mae = doc.at("mae").get<double>();
        if (doc.at("ratio").is_number()) r.ratio = doc.at("ratio").get<double>();
        r.hyperplane_count = doc.at("H").get<int>();
        r.concave_hyperplanes = doc.at("H_concave").get<int>();
        r.convex_hyperplanes = doc.at("H_convex").get<int>();
        const auto status = doc.at("solver_status").get<std::string>();
        if (status == "Optimal") r.solver_status = SolverStatus::Optimal;
        else if (status == "MaxIter") r.solver_status = SolverStatus::MaxIter;
        else if (status == "Infeasible") r.solver_status = SolverStatus::Infeasible;
        else throw Error(ErrorCode::CorruptModel, "unknown solver status '" + status + "'");
        r.iterations = doc.at("iterations").get<int>();
        r.primal_residual = doc.at("primal_residual").get<double>();
        r.dual_residual = doc.at("dual_residual").get<double>();
        r.objective = doc.at("objective").get<double>();
        const auto fitted = doc.at("fitted").get<std::vector<double>>();
        const auto resid = doc.at("residuals").get<std::vector<double>>();
        r.fitted = Eigen::Map<const Eigen::VectorXd>(fitted.data(), static_cast<Eigen::Index>(fitted.size()));
        r.residuals = Eigen::Map<const Eigen::VectorXd>(resid.data(), static_cast<Eigen::Index>(resid.size()));
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed report document: ") + e.what());
    }
}

void save_model(const IccnlsModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << model_to_json(model) << '\n';
    if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

IccnlsModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace iccnls
