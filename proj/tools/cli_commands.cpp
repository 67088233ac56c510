#include "cli_commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "iccnls/data_io.hpp"
#include "iccnls/estimators.hpp"
#include "iccnls/metrics.hpp"
#include "iccnls/prediction.hpp"

namespace iccnls::cli {

std::string format_short(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

std::string format_full(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataFlags {
    std::string path;
    std::string target = "y";
    std::vector<std::string> categorical;
    std::vector<std::string> ignored;
};

struct FitFlags {
    DataFlags data;
    std::string variant = "iccnls";
    double lambda = 0.0;
    double mix = 0.0;
    bool monotone = false;
    bool standardize = false;
    double tol = 1e-6;
    int max_iter = 500;
    double round_tol = kDefaultRoundTol;
    double gauge_ridge = 1e-8;
    std::uint64_t start_seed = 0;
    std::string model_out;
    std::string report_out;
};

struct SweepFlags {
    DataFlags data;
    std::vector<double> lambdas;
    std::vector<double> mixes;
    bool standardize = false;
    double tol = 1e-6;
    int max_iter = 500;
    double round_tol = kDefaultRoundTol;
    double gauge_ridge = 1e-8;
    unsigned threads = 0;
    std::string out;
    std::string plot_out;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
    cmd->add_option("--data", f.path, "Training CSV file")->required();
    cmd->add_option("--target", f.target, "Target column name")->capture_default_str();
    cmd->add_option("--categorical", f.categorical, "Categorical columns (one-hot, first level dropped)")
        ->delimiter(',');
    cmd->add_option("--ignore", f.ignored, "Columns to skip")->delimiter(',');
}

Dataset load_training(const DataFlags& f, std::ostream& err) {
    const CsvTable table = read_csv(f.path);
    const auto specs = infer_specs(table.header, f.target, f.categorical, f.ignored);
    std::vector<std::string> warnings;
    Dataset data = load_csv(f.path, specs, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    return data;
}

std::string ratio_text(const std::optional<double>& ratio, bool full) {
    if (!ratio) return "n.a.";
    return full ? format_full(*ratio) : format_short(*ratio);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    return out;
}

// Config-file values become leading flags so explicit flags, parsed later, win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string path;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
        else if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
    }
    if (path.empty() || args.empty()) return args;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
    std::vector<std::string> prefix;
    for (const auto& [key, value] : doc.items()) {
        const std::string flag = "--" + key;
        if (value.is_boolean()) {
            if (value.get<bool>()) prefix.push_back(flag);
            continue;
        }
        std::string text;
        if (value.is_array()) {
            for (std::size_t k = 0; k < value.size(); ++k) {
                if (k) text += ',';
                text += value[k].is_number() ? format_full(value[k].get<double>()) : value[k].get<std::string>();
            }
        } else if (value.is_number_integer()) {
            text = std::to_string(value.get<long long>());
        } else if (value.is_number()) {
            text = format_full(value.get<double>());
        } else if (value.is_string()) {
            text = value.get<std::string>();
        } else {
            throw UsageError("unsupported config value for '" + key + "'");
        }
        prefix.push_back(flag);
        prefix.push_back(text);
    }
    std::vector<std::string> expanded{args.front()};
    expanded.insert(expanded.end(), prefix.begin(), prefix.end());
    expanded.insert(expanded.end(), args.begin() + 1, args.end());
    return expanded;
}

int exit_for(SolverStatus status) {
    switch (status) {
        case SolverStatus::Optimal: return kSuccess;
        case SolverStatus::MaxIter: return kMaxIter;
        case SolverStatus::Infeasible: return kInfeasible;
    }
    return kMaxIter;
}

int cmd_synth(int n, std::uint64_t seed, double noise_sd, const std::string& out_path, std::ostream& out) {
    const Dataset data = generate_synthetic(n, seed, noise_sd);
    save_dataset_csv(data, out_path, "y");
    out << "wrote " << n << " rows to " << out_path << '\n';
    return kSuccess;
}

int cmd_fit(const FitFlags& f, std::ostream& out, std::ostream& err) {
    const Dataset data = load_training(f.data, err);
    FitConfig cfg;
    cfg.lambda = f.lambda;
    cfg.mix = f.mix;
    cfg.monotone = f.monotone;
    cfg.standardize = f.standardize;
    cfg.solver_tol = f.tol;
    cfg.max_iter = f.max_iter;
    cfg.round_tol = f.round_tol;
    cfg.gauge_ridge = f.gauge_ridge;
    cfg.start_seed = f.start_seed;
    cfg.validate();
    const Variant variant = variant_from_string(f.variant);

    const IccnlsFit result = fit(data, cfg, variant);
    const FitReport& rep = result.report;
    if (!f.model_out.empty() && rep.solver_status != SolverStatus::Infeasible) {
        save_model(result.model, f.model_out);
    }
    if (!f.report_out.empty()) {
        nlohmann::json doc = nlohmann::json::parse(report_to_json(rep));
        doc["variant"] = f.variant;
        doc["lambda"] = cfg.lambda;
        doc["mix"] = cfg.mix;
        doc["n"] = data.n();
        doc["d"] = data.d();
        doc["feature_names"] = data.feature_names();
        auto os = open_out(f.report_out);
        os << doc.dump(2) << '\n';
    }

    out << "variant  lambda   mix      RMSE/MAE RMSE     MAE      H\n";
    out << std::left << std::setw(9) << f.variant << std::setw(9) << format_short(cfg.lambda) << std::setw(9)
        << format_short(cfg.mix) << std::setw(9) << ratio_text(rep.ratio, false) << std::setw(9)
        << format_short(rep.rmse) << std::setw(9) << format_short(rep.mae) << rep.hyperplane_count << '\n';
    out << "solver: " << to_string(rep.solver_status) << " after " << rep.iterations
        << " iterations (primal " << format_short(rep.primal_residual) << ", dual "
        << format_short(rep.dual_residual) << ")\n";
    if (rep.solver_status != SolverStatus::Optimal) {
        err << "warning: solver did not reach the requested tolerance (" << to_string(rep.solver_status) << ")\n";
    }
    return exit_for(rep.solver_status);
}

int cmd_predict(const std::string& model_path, const std::string& input, const std::string& out_path,
                std::ostream& out) {
    const IccnlsModel model = load_model(model_path);
    const CsvTable table = read_csv(input);
    const auto& names = model.feature_names();
    const auto d = static_cast<std::size_t>(model.d());
    std::vector<std::size_t> cols;
    const bool by_name = std::all_of(names.begin(), names.end(), [&](const std::string& nm) {
        return std::find(table.header.begin(), table.header.end(), nm) != table.header.end();
    });
    if (!names.empty() && by_name) {
        for (const auto& nm : names) {
            cols.push_back(static_cast<std::size_t>(
                std::find(table.header.begin(), table.header.end(), nm) - table.header.begin()));
        }
    } else if (table.header.size() == d) {
        for (std::size_t k = 0; k < d; ++k) cols.push_back(k);
    } else {
        throw UsageError("input has " + std::to_string(table.header.size()) + " columns; model expects " +
                         std::to_string(d) + " features");
    }

    CsvTable result;
    result.header = {"g_c", "g_v", "y_hat"};
    Eigen::VectorXd x(model.d());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t k = 0; k < d; ++k) {
            x(static_cast<Eigen::Index>(k)) = parse_number(table.rows[r][cols[k]], r + 1, table.header[cols[k]]);
        }
        const Decomposition parts = predict_parts(model, x);
        result.rows.push_back({format_full(parts.concave), format_full(parts.convex), format_full(parts.total)});
    }
    if (out_path.empty()) {
        out << "g_c,g_v,y_hat\n";
        for (const auto& row : result.rows) out << row[0] << ',' << row[1] << ',' << row[2] << '\n';
    } else {
        write_csv(out_path, result);
        out << "wrote " << result.rows.size() << " predictions to " << out_path << '\n';
    }
    return kSuccess;
}

int cmd_sweep(const SweepFlags& f, std::ostream& out, std::ostream& err) {
    const Dataset data = load_training(f.data, err);
    FitConfig base;
    base.standardize = f.standardize;
    base.solver_tol = f.tol;
    base.max_iter = f.max_iter;
    base.round_tol = f.round_tol;
    base.gauge_ridge = f.gauge_ridge;
    base.validate();

    unsigned threads = f.threads;
    if (threads == 0) {
        threads = 1;
        if (const char* env = std::getenv("ICCNLS_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) threads = static_cast<unsigned>(v);
        }
    }
    const auto rows = sweep(data, f.lambdas, f.mixes, base, threads);

    CsvTable table;
    table.header = {"lambda", "mix", "ratio", "rmse", "mae", "H", "status", "iterations"};
    CsvTable plot;
    plot.header = {"lambda", "mix", "metric", "value"};
    out << "lambda     mix        RMSE/MAE   RMSE       MAE        H     status\n";
    for (const auto& r : rows) {
        table.rows.push_back({format_full(r.lambda), format_full(r.mix), ratio_text(r.ratio, true),
                              format_full(r.rmse), format_full(r.mae), std::to_string(r.hyperplanes),
                              r.failed ? "failed:" + std::string(to_string(r.status)) : "ok",
                              std::to_string(r.iterations)});
        const std::string l = format_full(r.lambda);
        const std::string a = format_full(r.mix);
        plot.rows.push_back({l, a, "rmse", format_full(r.rmse)});
        plot.rows.push_back({l, a, "mae", format_full(r.mae)});
        plot.rows.push_back({l, a, "ratio", r.ratio ? format_full(*r.ratio) : "n.a."});
        plot.rows.push_back({l, a, "H", std::to_string(r.hyperplanes)});
        out << std::left << std::setw(11) << format_short(r.lambda) << std::setw(11) << format_short(r.mix)
            << std::setw(11) << ratio_text(r.ratio, false) << std::setw(11) << format_short(r.rmse)
            << std::setw(11) << format_short(r.mae) << std::setw(6) << r.hyperplanes
            << (r.failed ? "FAILED " + r.message : "ok") << '\n';
    }
    write_csv(f.out, table);
    const std::string plot_path = f.plot_out.empty() ? f.out + ".long.csv" : f.plot_out;
    write_csv(plot_path, plot);
    return kSuccess;
}

int cmd_inspect(const std::string& model_path, double round_tol, std::ostream& out) {
    const IccnlsModel model = load_model(model_path);
    const FitConfig& c = model.config_used();
    out << "variant: " << to_string(model.variant()) << '\n';
    out << "dimension: " << model.d() << '\n';
    out << "features:";
    for (const auto& nm : model.feature_names()) out << ' ' << nm;
    out << '\n';
    out << "concave pieces: " << model.concave().size() << " (distinct "
        << count_hyperplanes(model.concave(), round_tol) << ")\n";
    out << "convex pieces: " << model.convex().size() << " (distinct "
        << count_hyperplanes(model.convex(), round_tol) << ")\n";
    out << "combined hyperplanes H: " << count_hyperplanes(model, round_tol) << '\n';
    out << "config: lambda=" << format_short(c.lambda) << " mix=" << format_short(c.mix)
        << " monotone=" << (c.monotone ? "true" : "false") << " standardize=" << (c.standardize ? "true" : "false")
        << " tol=" << format_short(c.solver_tol) << " max_iter=" << c.max_iter
        << " gauge_ridge=" << format_short(c.gauge_ridge) << '\n';
    out << "train fingerprint: " << model.train_fingerprint() << '\n';
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Convex-concave piecewise-affine regression"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;

    int synth_n = 0;
    std::uint64_t synth_seed = 1;
    double synth_noise = 0.5;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark dataset");
    synth->add_option("--n", synth_n, "Number of observations")->required()->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth->add_option("--noise-sd", synth_noise, "Noise standard deviation")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--out", synth_out, "Output CSV path")->required();
    synth->add_option("--config", config_path, "JSON file with flag values");

    FitFlags fit_flags;
    auto* fitc = app.add_subcommand("fit", "Fit a CNLS, MNLS or ICCNLS model");
    add_data_flags(fitc, fit_flags.data);
    fitc->add_option("--variant", fit_flags.variant, "cnls, mnls or iccnls")
        ->capture_default_str()
        ->check(CLI::IsMember({"cnls", "mnls", "iccnls"}));
    fitc->add_option("--lambda", fit_flags.lambda, "Penalty strength")->capture_default_str();
    fitc->add_option("--mix", fit_flags.mix, "Elastic-net mixing in [0, 1]")->capture_default_str();
    fitc->add_flag("--monotone", fit_flags.monotone, "Force nonnegative slopes");
    fitc->add_flag("--standardize", fit_flags.standardize, "Z-score features internally");
    fitc->add_option("--tol", fit_flags.tol, "Solver tolerance")->capture_default_str();
    fitc->add_option("--max-iter", fit_flags.max_iter, "Solver iteration cap")->capture_default_str();
    fitc->add_option("--round-tol", fit_flags.round_tol, "Hyperplane dedup tolerance")->capture_default_str();
    fitc->add_option("--gauge-ridge", fit_flags.gauge_ridge, "Slope ridge used when lambda is 0")
        ->capture_default_str();
    fitc->add_option("--start-seed", fit_flags.start_seed, "Seed for a random solver start (0 = origin)");
    fitc->add_option("--model-out", fit_flags.model_out, "Model JSON output path");
    fitc->add_option("--report-out", fit_flags.report_out, "Report JSON output path");
    fitc->add_option("--config", config_path, "JSON file with flag values");

    std::string predict_model, predict_input, predict_out;
    auto* predictc = app.add_subcommand("predict", "Evaluate a saved model at query points");
    predictc->add_option("--model", predict_model, "Model JSON")->required();
    predictc->add_option("--input", predict_input, "CSV of query points")->required();
    predictc->add_option("--out", predict_out, "Output CSV (stdout when omitted)");
    predictc->add_option("--config", config_path, "JSON file with flag values");

    SweepFlags sweep_flags;
    auto* sweepc = app.add_subcommand("sweep", "Fit ICCNLS over a lambda x mix grid");
    add_data_flags(sweepc, sweep_flags.data);
    sweepc->add_option("--lambdas", sweep_flags.lambdas, "Comma-separated lambda grid")
        ->required()
        ->delimiter(',');
    sweepc->add_option("--mixes", sweep_flags.mixes, "Comma-separated mix grid")->required()->delimiter(',');
    sweepc->add_flag("--standardize", sweep_flags.standardize, "Z-score features internally");
    sweepc->add_option("--tol", sweep_flags.tol, "Solver tolerance")->capture_default_str();
    sweepc->add_option("--max-iter", sweep_flags.max_iter, "Solver iteration cap")->capture_default_str();
    sweepc->add_option("--round-tol", sweep_flags.round_tol, "Hyperplane dedup tolerance")->capture_default_str();
    sweepc->add_option("--gauge-ridge", sweep_flags.gauge_ridge, "Slope ridge used when lambda is 0");
    sweepc->add_option("--threads", sweep_flags.threads, "Worker threads (default: ICCNLS_THREADS or 1)");
    sweepc->add_option("--out", sweep_flags.out, "Result table CSV")->required();
    sweepc->add_option("--plot-out", sweep_flags.plot_out, "Long-format CSV for plotting");
    sweepc->add_option("--config", config_path, "JSON file with flag values");

    std::string inspect_model;
    double inspect_tol = kDefaultRoundTol;
    auto* inspectc = app.add_subcommand("inspect", "Summarize a saved model");
    inspectc->add_option("--model", inspect_model, "Model JSON")->required();
    inspectc->add_option("--round-tol", inspect_tol, "Hyperplane dedup tolerance")->capture_default_str();

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (*synth) return cmd_synth(synth_n, synth_seed, synth_noise, synth_out, out);
        if (*fitc) return cmd_fit(fit_flags, out, err);
        if (*predictc) return cmd_predict(predict_model, predict_input, predict_out, out);
        if (*sweepc) return cmd_sweep(sweep_flags, out, err);
        if (*inspectc) return cmd_inspect(inspect_model, inspect_tol, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return e.code() == ErrorCode::Infeasible ? kInfeasible : kUsage;
    }
    return kUsage;
}

}  // namespace iccnls::cli
