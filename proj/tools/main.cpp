// slmort: fit, forecast and backtest SL, Lee-Carter and CBD mortality models.

#include "cli_support.hpp"

#include "slmort/benchmark_models.hpp"
#include "slmort/evaluation.hpp"
#include "slmort/ingest.hpp"
#include "slmort/lifetable.hpp"
#include "slmort/sl_model.hpp"
#include "slmort/timeseries.hpp"
#include "slmort/transforms.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace slmort;
using namespace slmort::cli;

namespace {

// ---------------------------------------------------------------------------------------------
// Data sources
// ---------------------------------------------------------------------------------------------

struct DataOptions {
    std::string input;
    std::string deaths;
    std::string exposures;
    std::string synth;
    std::string sex = "f";
};

void add_data_options(CLI::App *cmd, DataOptions &opts) {
    cmd->add_option("--input", opts.input, "HMD Mx 1x1 file (central death rates)");
    cmd->add_option("--deaths", opts.deaths, "HMD Deaths 1x1 file (with --exposures)");
    cmd->add_option("--exposures", opts.exposures, "HMD Exposures 1x1 file (with --deaths)");
    cmd->add_option("--synth", opts.synth,
                    "synthetic data: a key = value file or inline 'manifold=sl,seed=3,...'");
    cmd->add_option("--sex", opts.sex, "HMD column: f, m or total")->capture_default_str();
}

double to_double(const std::string &key, const std::string &text) {
    double value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("synthetic setting " + key + " is not a number: '" + text + "'");
    }
    return value;
}

template <typename Int>
Int to_integer(const std::string &key, const std::string &text) {
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("synthetic setting " + key + " is not an integer: '" + text +
                                    "'");
    }
    return value;
}

std::vector<std::pair<std::string, std::string>> synth_pairs(const std::string &text) {
    std::vector<std::pair<std::string, std::string>> pairs;
    if (fs::is_regular_file(text)) {
        std::ifstream in(text);
        for (const auto &item : CLI::ConfigTOML().from_config(in)) {
            if (!item.parents.empty() || item.inputs.size() != 1) {
                throw std::invalid_argument("synthetic config must hold flat key = value lines");
            }
            pairs.emplace_back(item.name, item.inputs.front());
        }
        return pairs;
    }
    std::istringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ',')) {
        if (token.empty()) {
            continue;
        }
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--synth expects key=value pairs or an existing file, got '" +
                                        token + "'");
        }
        pairs.emplace_back(token.substr(0, eq), token.substr(eq + 1));
    }
    return pairs;
}

SynthConfig parse_synth(const std::string &text) {
    SynthConfig c;
    int x_min = c.ages.min(), x_max = c.ages.max();
    int t_min = c.years.min(), t_max = c.years.max();
    for (const auto &[key, value] : synth_pairs(text)) {
        if (key == "manifold") {
            c.manifold = parse_manifold(value);
        } else if (key == "gompertz-a") {
            c.gompertz_a = to_double(key, value);
        } else if (key == "gompertz-b") {
            c.gompertz_b = to_double(key, value);
        } else if (key == "improvement") {
            c.improvement = to_double(key, value);
        } else if (key == "noise-sd") {
            c.noise_sd = to_double(key, value);
        } else if (key == "seed") {
            c.seed = to_integer<std::uint64_t>(key, value);
        } else if (key == "x-min") {
            x_min = to_integer<int>(key, value);
        } else if (key == "x-max") {
            x_max = to_integer<int>(key, value);
        } else if (key == "t-min") {
            t_min = to_integer<int>(key, value);
        } else if (key == "t-max") {
            t_max = to_integer<int>(key, value);
        } else {
            throw std::invalid_argument("unknown synthetic setting '" + key + "'");
        }
    }
    c.ages = AgeRange(x_min, x_max);
    c.years = YearRange(t_min, t_max);
    c.validate();
    return c;
}

Settings synth_settings(const SynthConfig &c) {
    return {{"manifold", std::string(to_string(c.manifold))},
            {"gompertz-a", format_double(c.gompertz_a)},
            {"gompertz-b", format_double(c.gompertz_b)},
            {"improvement", format_double(c.improvement)},
            {"noise-sd", format_double(c.noise_sd)},
            {"seed", std::to_string(c.seed)},
            {"x-min", std::to_string(c.ages.min())},
            {"x-max", std::to_string(c.ages.max())},
            {"t-min", std::to_string(c.years.min())},
            {"t-max", std::to_string(c.years.max())}};
}

std::string canonical_synth(const SynthConfig &c) {
    std::string out;
    for (const auto &[key, value] : synth_settings(c)) {
        out += (out.empty() ? "" : ",") + key + "=" + value;
    }
    return out;
}

/// Checks the source flags and records them; no data are read.
struct DataSource {
    DataOptions opts;
    HmdColumn column;
    std::optional<SynthConfig> synth;

    explicit DataSource(const DataOptions &o) : opts(o), column(parse_hmd_column(o.sex)) {
        const int sources = (o.input.empty() ? 0 : 1) + (o.synth.empty() ? 0 : 1) +
                            (o.deaths.empty() && o.exposures.empty() ? 0 : 1);
        if (sources != 1) {
            throw std::invalid_argument(
                "give exactly one data source: --input, --deaths with --exposures, or --synth");
        }
        if (o.deaths.empty() != o.exposures.empty()) {
            throw std::invalid_argument("--deaths and --exposures must be given together");
        }
        if (!o.synth.empty()) {
            synth = parse_synth(o.synth);
        }
    }

    void describe(Settings &settings) const {
        if (synth) {
            settings.emplace_back("synth", canonical_synth(*synth));
        } else if (!opts.input.empty()) {
            settings.emplace_back("input", opts.input);
        } else {
            settings.emplace_back("deaths", opts.deaths);
            settings.emplace_back("exposures", opts.exposures);
        }
        settings.emplace_back("sex", std::string(to_string(column)));
    }

    /// Central rates over exactly the requested window plus the SHA-256 of the inputs.
    std::pair<MortalitySurface, std::string> load(const AgeRange &ages, const YearRange &years) const {
        if (synth) {
            const auto surface = generate_synthetic(*synth);
            if (!surface.ages().contains(ages) || !surface.years().contains(years)) {
                throw DataError(fmt::format(
                    "synthetic grid {}-{} x {}-{} does not cover ages {}-{}, years {}-{}",
                    surface.ages().min(), surface.ages().max(), surface.years().min(),
                    surface.years().max(), ages.min(), ages.max(), years.min(), years.max()));
            }
            return {surface.window(ages, years), sha256_hex(canonical_synth(*synth))};
        }
        if (!opts.input.empty()) {
            const auto bytes = read_file_bytes(opts.input);
            std::istringstream in(bytes);
            try {
                return {parse_hmd(in, column, Quantity::central_rate, ages, years),
                        sha256_hex(bytes)};
            } catch (const DataError &e) {
                throw DataError(opts.input + ": " + e.what());
            }
        }
        const auto d_bytes = read_file_bytes(opts.deaths);
        const auto e_bytes = read_file_bytes(opts.exposures);
        std::istringstream d_in(d_bytes);
        std::istringstream e_in(e_bytes);
        const auto deaths = parse_hmd(d_in, column, Quantity::deaths, ages, years);
        const auto exposures = parse_hmd(e_in, column, Quantity::exposures, ages, years);
        return {estimate_m(deaths, exposures), sha256_hex(sha256_hex(d_bytes) + sha256_hex(e_bytes))};
    }
};

struct Window {
    int x_min = 60;
    int x_max = 89;
    int t_min = 1960;
    int t_max = 1989;
    std::optional<int> t0;
};

void add_window_options(CLI::App *cmd, Window &w) {
    cmd->add_option("--x-min", w.x_min, "youngest age")->capture_default_str();
    cmd->add_option("--x-max", w.x_max, "oldest age")->capture_default_str();
    cmd->add_option("--t-min", w.t_min, "first fit year")->capture_default_str();
    cmd->add_option("--t-max", w.t_max, "last fit year")->capture_default_str();
    cmd->add_option("--t0", w.t0, "SL reference year (default t-min - 1)");
}

void add_fit_options(CLI::App *cmd, FitConfig &fit) {
    cmd->add_option("--gamma", fit.gamma, "damping of each coordinate step")->capture_default_str();
    cmd->add_option("--epsilon", fit.epsilon, "convergence threshold")->capture_default_str();
    cmd->add_option("--k-max", fit.k_max, "maximum number of sweeps")->capture_default_str();
}

void window_settings(Settings &s, const Window &w, int t0) {
    s.emplace_back("x-min", std::to_string(w.x_min));
    s.emplace_back("x-max", std::to_string(w.x_max));
    s.emplace_back("t-min", std::to_string(w.t_min));
    s.emplace_back("t-max", std::to_string(w.t_max));
    s.emplace_back("t0", std::to_string(t0));
}

void fit_settings(Settings &s, const FitConfig &fit) {
    s.emplace_back("gamma", format_double(fit.gamma));
    s.emplace_back("epsilon", format_double(fit.epsilon));
    s.emplace_back("k-max", std::to_string(fit.k_max));
}

Settings with_digest(Settings s, const std::string &digest) {
    s.emplace_back("input_sha256", digest);
    return s;
}

void write_config_file(const fs::path &path, std::string_view command, const Settings &options,
                       const std::string &digest) {
    write_artifact(path, command, {{"input_sha256", digest}}, [&](std::ostream &out) {
        for (const auto &[key, value] : options) {
            out << key << " = \"" << value << "\"\n";
        }
    });
}

void write_trace(std::ostream &out, const std::vector<double> &trace) {
    out << "sweep,objective\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
        out << k << ',' << format_double(trace[k]) << '\n';
    }
}

void announce(const fs::path &path) { std::cout << "wrote " << path.string() << '\n'; }

// ---------------------------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------------------------

struct SynthOptions {
    std::string manifold = "gompertz";
    SynthConfig config;
    int x_min = 60, x_max = 94, t_min = 1959, t_max = 2009;
    std::string out;
};

int cmd_synth(const SynthOptions &o) {
    SynthConfig c = o.config;
    c.manifold = parse_manifold(o.manifold);
    c.ages = AgeRange(o.x_min, o.x_max);
    c.years = YearRange(o.t_min, o.t_max);
    c.validate();

    const auto surface = generate_synthetic(c);
    std::string title = "# slmort synth";
    for (const auto &[key, value] : synth_settings(c)) {
        title += fmt::format(" | {} = {}", key, value);
    }
    title += " | input_sha256 = " + sha256_hex(canonical_synth(c));

    const fs::path path(o.out);
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    write_hmd(out, surface, title);
    announce(path);
    return ExitCode::ok;
}

// ---------------------------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------------------------

struct FitOptions {
    DataOptions data;
    Window window;
    FitConfig fit;
    std::string model = "sl";
    std::string out;
};

int cmd_fit(const FitOptions &o) {
    const Model model = parse_model(o.model);
    const DataSource source(o.data);
    const AgeRange ages(o.window.x_min, o.window.x_max);
    const YearRange years(o.window.t_min, o.window.t_max);
    const int t0 = o.window.t0.value_or(years.min() - 1);
    o.fit.validate();
    if (model == Model::sl && t0 >= years.min()) {
        throw std::invalid_argument("--t0 must precede --t-min");
    }
    if (years.size() < 3) {
        throw std::invalid_argument("fit window needs at least 3 years for drift calibration");
    }

    Settings options{{"model", std::string(to_string(model))}};
    source.describe(options);
    window_settings(options, o.window, t0);
    fit_settings(options, o.fit);
    options.emplace_back("out", o.out);

    const YearRange data_years(model == Model::sl ? t0 : years.min(), years.max());
    const auto [rates, digest] = source.load(ages, data_years);
    const auto q = surface_m_to_q(rates);

    std::optional<FittedParams> fitted;
    Eigen::MatrixXd fitted_q;
    FitDiagnostics diagnostics;
    switch (model) {
    case Model::sl: {
        const auto delta = build_l_diff(surface_q_to_survival(q), years, t0);
        auto fit = fit_sl(delta, o.fit);
        fitted_q = sl_fitted_q(fit.params, delta.base_survival);
        diagnostics = std::move(fit.diagnostics);
        fitted = SlState{std::move(fit.params), delta.base_survival};
        break;
    }
    case Model::lc: {
        auto params = fit_lc(rates.window(ages, years));
        const Eigen::MatrixXd log_m = rates.window(ages, years).values().array().log();
        const double objective = (log_m - params.fitted_log_m()).squaredNorm();
        diagnostics = {0, true, objective, {objective}, 0.0};
        fitted_q = params.fitted_q();
        fitted = std::move(params);
        break;
    }
    case Model::cbd: {
        auto params = fit_cbd(q.window(ages, years));
        const Eigen::MatrixXd logit_q =
            q.window(ages, years).values().unaryExpr([](double p) { return logit(p); });
        const double objective = (logit_q - params.fitted_logit_q()).squaredNorm();
        diagnostics = {0, true, objective, {objective}, 0.0};
        fitted_q = params.fitted_q();
        fitted = std::move(params);
        break;
    }
    }

    const fs::path dir(o.out);
    fs::create_directories(dir);
    const auto header = with_digest(options, digest);
    write_artifact(dir / "params.csv", "fit", header,
                   [&](std::ostream &out) { write_params(out, *fitted); });
    announce(dir / "params.csv");

    auto diag_header = header;
    diag_header.emplace_back("converged", diagnostics.converged ? "true" : "false");
    diag_header.emplace_back("sweeps", std::to_string(diagnostics.iterations));
    diag_header.emplace_back("max_param_delta", format_double(diagnostics.max_param_delta));
    diag_header.emplace_back("final_objective", format_double(diagnostics.final_objective));
    write_artifact(dir / "diagnostics.csv", "fit", diag_header,
                   [&](std::ostream &out) { write_trace(out, diagnostics.objective_trace); });
    announce(dir / "diagnostics.csv");

    write_artifact(dir / "fitted_q.csv", "fit", header, [&](std::ostream &out) {
        export_csv(out, MortalitySurface(ages, years, Quantity::death_prob, fitted_q));
    });
    announce(dir / "fitted_q.csv");

    write_config_file(dir / "config.txt", "fit", options, digest);
    announce(dir / "config.txt");

    if (!diagnostics.converged) {
        std::cerr << fmt::format("slmort: SL fit did not converge within {} sweeps (max parameter "
                                 "change {:.3g}); artifacts are flagged converged = false\n",
                                 o.fit.k_max, diagnostics.max_param_delta);
        return ExitCode::not_converged;
    }
    return ExitCode::ok;
}

// ---------------------------------------------------------------------------------------------
// forecast
// ---------------------------------------------------------------------------------------------

struct ForecastOptions {
    std::string fit_dir;
    int horizon = 20;
    std::string mode = "central";
    std::size_t paths = 1000;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_forecast(const ForecastOptions &o) {
    if (o.horizon < 1) {
        throw std::invalid_argument("--horizon must be at least 1");
    }
    if (o.mode != "central" && o.mode != "sample") {
        throw std::invalid_argument("--mode must be central or sample");
    }
    if (o.mode == "sample" && o.paths < 1) {
        throw std::invalid_argument("--paths must be at least 1");
    }
    const ForecastMode mode = o.mode == "central" ? ForecastMode{CentralForecast{}}
                                                  : ForecastMode{SampledForecast{o.seed, o.paths}};

    const fs::path params_path = fs::path(o.fit_dir) / "params.csv";
    const auto bytes = read_file_bytes(params_path);
    std::istringstream in(bytes);
    const auto fitted = read_params(in);

    std::vector<Eigen::MatrixXd> paths;
    AgeRange ages(0, 0);
    YearRange years(0, 0);
    std::visit(
        [&](const auto &p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SlState>) {
                ages = p.params.ages;
                years = p.params.years;
                const auto rwd = calibrate_rwd(p.params.time_series(), years.min());
                paths = sl_forecast(p.params, rwd, p.base_survival, o.horizon, mode);
            } else if constexpr (std::is_same_v<T, LcParams>) {
                ages = p.ages;
                years = p.years;
                const auto rwd = calibrate_rwd(Eigen::MatrixXd(p.kappa), years.min());
                paths = lc_forecast(p, rwd, o.horizon, mode);
            } else {
                ages = p.ages;
                years = p.years;
                const auto rwd = calibrate_rwd(p.time_series(), years.min());
                paths = cbd_forecast(p, rwd, o.horizon, mode);
            }
        },
        fitted);
    const YearRange horizon_years(years.max() + 1, years.max() + o.horizon);

    Settings options{{"fit-dir", o.fit_dir},
                     {"model", std::string(to_string(model_of(fitted)))},
                     {"horizon", std::to_string(o.horizon)},
                     {"mode", o.mode}};
    if (o.mode == "sample") {
        options.emplace_back("paths", std::to_string(o.paths));
        options.emplace_back("seed", std::to_string(o.seed));
    }
    options.emplace_back("out", o.out);
    const auto header = with_digest(options, sha256_hex(bytes));

    const fs::path dir(o.out);
    fs::create_directories(dir);
    if (o.mode == "central") {
        write_artifact(dir / "forecast_q.csv", "forecast", header, [&](std::ostream &out) {
            export_csv(out, MortalitySurface(ages, horizon_years, Quantity::death_prob,
                                             paths.front()));
        });
        announce(dir / "forecast_q.csv");
        return ExitCode::ok;
    }

    write_artifact(dir / "forecast_quantiles.csv", "forecast", header, [&](std::ostream &out) {
        out << "age,year,q05,q50,q95\n";
        std::vector<double> cell(paths.size());
        for (Eigen::Index x = 0; x < ages.size(); ++x) {
            for (int h = 0; h < o.horizon; ++h) {
                for (std::size_t p = 0; p < paths.size(); ++p) {
                    cell[p] = paths[p](x, h);
                }
                out << ages.min() + x << ',' << horizon_years.min() + h << ','
                    << format_double(sample_quantile(cell, 0.05)) << ','
                    << format_double(sample_quantile(cell, 0.50)) << ','
                    << format_double(sample_quantile(cell, 0.95)) << '\n';
            }
        }
    });
    announce(dir / "forecast_quantiles.csv");
    return ExitCode::ok;
}

// ---------------------------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------------------------

struct BacktestOptions {
    DataOptions data;
    Window window;
    FitConfig fit;
    std::string models = "sl,lc,cbd";
    int forecast_end = 2009;
    int mi_age = 65;
    std::optional<int> mi_ref_year;
    std::string country = "NA";
    std::string mape_denominator = "estimate";
    std::string out;
};

std::string model_key(Model m) {
    switch (m) {
    case Model::sl:
        return "sl";
    case Model::lc:
        return "lc";
    case Model::cbd:
        return "cbd";
    }
    return "?";
}

std::vector<Model> parse_model_list(const std::string &list) {
    std::set<Model> unique;
    std::istringstream stream(list);
    std::string token;
    while (std::getline(stream, token, ',')) {
        if (!token.empty()) {
            unique.insert(parse_model(token));
        }
    }
    if (unique.empty()) {
        throw std::invalid_argument("--models names no model");
    }
    return {unique.begin(), unique.end()};
}

int cmd_backtest(const BacktestOptions &o) {
    const DataSource source(o.data);
    BacktestConfig config;
    config.ages = AgeRange(o.window.x_min, o.window.x_max);
    config.fit_years = YearRange(o.window.t_min, o.window.t_max);
    config.forecast_years = YearRange(o.window.t_max + 1, o.forecast_end);
    config.t0 = o.window.t0;
    config.models = parse_model_list(o.models);
    if (o.mape_denominator == "estimate") {
        config.mape_denominator = MapeDenominator::estimate;
    } else if (o.mape_denominator == "observed") {
        config.mape_denominator = MapeDenominator::observed;
    } else {
        throw std::invalid_argument("--mape-denominator must be estimate or observed");
    }
    config.sl_fit = o.fit;
    config.mi_age = o.mi_age;
    config.mi_ref_year = o.mi_ref_year;
    config.country = o.country;
    config.sex = std::string(to_string(source.column));
    config.validate();

    std::string model_names;
    for (Model m : config.models) {
        model_names += (model_names.empty() ? "" : ",") + model_key(m);
    }
    Settings options{{"models", model_names}};
    source.describe(options);
    window_settings(options, o.window, config.reference_year());
    fit_settings(options, o.fit);
    options.emplace_back("forecast-end", std::to_string(o.forecast_end));
    options.emplace_back("mi-age", std::to_string(config.mi_age));
    options.emplace_back("mi-ref-year", std::to_string(config.mi_reference_year()));
    options.emplace_back("country", config.country);
    options.emplace_back("mape-denominator", o.mape_denominator);
    options.emplace_back("out", o.out);

    const bool with_sl =
        std::find(config.models.begin(), config.models.end(), Model::sl) != config.models.end();
    const int first_year = std::min({with_sl ? config.reference_year() : config.fit_years.min(),
                                     config.fit_years.min(), config.mi_reference_year()});
    const auto [rates, digest] =
        source.load(config.ages, YearRange(first_year, config.forecast_years.max()));
    const auto report = run_backtest(rates, config);
    const auto header = with_digest(options, digest);

    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_artifact(dir / "report.csv", "backtest", header,
                   [&](std::ostream &out) { export_csv(out, report); });
    announce(dir / "report.csv");
    write_artifact(dir / "mi_rates.csv", "backtest", header,
                   [&](std::ostream &out) { export_mi_csv(out, report); });
    announce(dir / "mi_rates.csv");
    write_artifact(dir / "mi_mape_delta.csv", "backtest", header, [&](std::ostream &out) {
        out << "model,age,ref_year,mape_delta\n";
        for (const auto &r : report.results) {
            if (r.mi && r.mi->mape_delta) {
                out << to_string(r.model) << ',' << r.mi->age << ',' << r.mi->ref_year << ','
                    << format_double(*r.mi->mape_delta) << '\n';
            }
        }
    });
    announce(dir / "mi_mape_delta.csv");

    bool converged = true;
    if (with_sl) {
        const auto &diag = *report.result(Model::sl).sl_diagnostics;
        converged = diag.converged;
        auto diag_header = header;
        diag_header.emplace_back("converged", converged ? "true" : "false");
        diag_header.emplace_back("sweeps", std::to_string(diag.iterations));
        write_artifact(dir / "sl_diagnostics.csv", "backtest", diag_header,
                       [&](std::ostream &out) { write_trace(out, diag.objective_trace); });
        announce(dir / "sl_diagnostics.csv");
    }

    std::cout << fmt::format("{:<5}{:>14}{:>10}{:>14}{:>10}\n", "model", "fit MSE*", "fit MAPE",
                             "fcst MSE*", "fcst MAPE");
    for (const auto &r : report.results) {
        std::cout << fmt::format("{:<5}{:>14.4f}{:>10.2f}{:>14.4f}{:>10.2f}\n", to_string(r.model),
                                 r.fit.mse_star, r.fit.mape, r.forecast.mse_star, r.forecast.mape);
    }
    if (!converged) {
        std::cerr << "slmort: SL fit did not converge; report written with converged = false\n";
        return ExitCode::not_converged;
    }
    return ExitCode::ok;
}

// ---------------------------------------------------------------------------------------------
// curves
// ---------------------------------------------------------------------------------------------

struct CurvesOptions {
    DataOptions data;
    Window window;
    std::string out;
};

int cmd_curves(const CurvesOptions &o) {
    const DataSource source(o.data);
    const AgeRange ages(o.window.x_min, o.window.x_max);
    const YearRange years(o.window.t_min, o.window.t_max);
    const int t0 = o.window.t0.value_or(years.min() - 1);
    if (t0 >= years.min()) {
        throw std::invalid_argument("--t0 must precede --t-min");
    }
    Settings options;
    source.describe(options);
    window_settings(options, o.window, t0);
    options.emplace_back("out", o.out);

    const YearRange data_years(t0, years.max());
    const auto [rates, digest] = source.load(ages, data_years);
    const auto q = surface_m_to_q(rates);
    const auto survival = surface_q_to_survival(q);
    const auto delta = build_l_diff(survival, years, t0);
    const auto header = with_digest(options, digest);

    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_artifact(dir / "curves.csv", "curves", header, [&](std::ostream &out) {
        out << "year,age,m,q,survival,curve_of_deaths,l_survival\n";
        for (int year = data_years.min(); year <= data_years.max(); ++year) {
            const Eigen::VectorXd q_col = q.values().col(data_years.index(year));
            const auto deaths = curve_of_deaths(as_span(q_col));
            for (int age = ages.min(); age <= ages.max(); ++age) {
                const auto i = ages.index(age);
                const double s = survival.at(age, year);
                out << year << ',' << age << ',' << format_double(rates.at(age, year)) << ','
                    << format_double(q_col(i)) << ',' << format_double(s) << ','
                    << format_double(deaths(i)) << ',' << format_double(l_transform(s)) << '\n';
            }
        }
    });
    announce(dir / "curves.csv");
    write_artifact(dir / "l_diff.csv", "curves", header, [&](std::ostream &out) {
        out << "age,year,delta\n";
        for (int age = ages.min(); age <= ages.max(); ++age) {
            for (int year = years.min(); year <= years.max(); ++year) {
                out << age << ',' << year << ','
                    << format_double(delta.values(ages.index(age), years.index(year))) << '\n';
            }
        }
    });
    announce(dir / "l_diff.csv");
    return ExitCode::ok;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"SL, Lee-Carter and CBD mortality models: fit, forecast, backtest", "slmort"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    const auto config_help = "flat key = value file of flag values; explicit flags win";

    SynthOptions synth;
    auto *synth_cmd = app.add_subcommand("synth", "write a synthetic HMD-format Mx table");
    synth_cmd->add_option("--manifold", synth.manifold, "gompertz, lc, cbd or sl")
        ->capture_default_str();
    synth_cmd->add_option("--gompertz-a", synth.config.gompertz_a, "rate at x-min, first year")
        ->capture_default_str();
    synth_cmd->add_option("--gompertz-b", synth.config.gompertz_b, "log-rate slope in age")
        ->capture_default_str();
    synth_cmd->add_option("--improvement", synth.config.improvement, "log-rate drift per year")
        ->capture_default_str();
    synth_cmd->add_option("--noise-sd", synth.config.noise_sd, "sd of log-normal noise")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.config.seed, "noise seed")->capture_default_str();
    synth_cmd->add_option("--x-min", synth.x_min)->capture_default_str();
    synth_cmd->add_option("--x-max", synth.x_max)->capture_default_str();
    synth_cmd->add_option("--t-min", synth.t_min)->capture_default_str();
    synth_cmd->add_option("--t-max", synth.t_max)->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "output file")->required();
    synth_cmd->add_option("--config", config_help);

    FitOptions fit;
    auto *fit_cmd = app.add_subcommand("fit", "fit one model and write its parameters");
    fit_cmd->add_option("--model", fit.model, "sl, lc or cbd")->capture_default_str();
    add_data_options(fit_cmd, fit.data);
    add_window_options(fit_cmd, fit.window);
    add_fit_options(fit_cmd, fit.fit);
    fit_cmd->add_option("--out", fit.out, "output directory")->required();
    fit_cmd->add_option("--config", config_help);

    ForecastOptions forecast;
    auto *forecast_cmd = app.add_subcommand("forecast", "project a fitted model forward");
    forecast_cmd->add_option("--fit-dir", forecast.fit_dir, "directory written by fit")->required();
    forecast_cmd->add_option("--horizon", forecast.horizon, "years ahead")->capture_default_str();
    forecast_cmd->add_option("--mode", forecast.mode, "central or sample")->capture_default_str();
    forecast_cmd->add_option("--paths", forecast.paths, "sample paths")->capture_default_str();
    forecast_cmd->add_option("--seed", forecast.seed, "path seed")->capture_default_str();
    forecast_cmd->add_option("--out", forecast.out, "output directory")->required();
    forecast_cmd->add_option("--config", config_help);

    BacktestOptions backtest;
    auto *backtest_cmd = app.add_subcommand("backtest", "fit/forecast split evaluation");
    add_data_options(backtest_cmd, backtest.data);
    backtest_cmd->add_option("--models", backtest.models, "comma-separated subset of sl,lc,cbd")
        ->capture_default_str();
    add_window_options(backtest_cmd, backtest.window);
    add_fit_options(backtest_cmd, backtest.fit);
    backtest_cmd->add_option("--forecast-end", backtest.forecast_end, "last holdout year")
        ->capture_default_str();
    backtest_cmd->add_option("--mi-age", backtest.mi_age, "age of the improvement-rate series")
        ->capture_default_str();
    backtest_cmd->add_option("--mi-ref-year", backtest.mi_ref_year,
                             "improvement-rate reference year (default t-max)");
    backtest_cmd->add_option("--country", backtest.country, "label for the report")
        ->capture_default_str();
    backtest_cmd->add_option("--mape-denominator", backtest.mape_denominator,
                             "estimate or observed")
        ->capture_default_str();
    backtest_cmd->add_option("--out", backtest.out, "output directory")->required();
    backtest_cmd->add_option("--config", config_help);

    CurvesOptions curves;
    auto *curves_cmd =
        app.add_subcommand("curves", "life-table curves and L differences as plot data");
    add_data_options(curves_cmd, curves.data);
    add_window_options(curves_cmd, curves.window);
    curves_cmd->add_option("--out", curves.out, "output directory")->required();
    curves_cmd->add_option("--config", config_help);

    try {
        std::vector<std::string> args(argv, argv + argc);
        args = expand_config_args(std::move(args));
        // CLI11 takes the arguments without the program name, last first.
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? ExitCode::ok : ExitCode::usage;
    } catch (const std::invalid_argument &e) {
        std::cerr << "slmort: " << e.what() << '\n';
        return ExitCode::usage;
    }

    try {
        if (*synth_cmd) {
            return cmd_synth(synth);
        }
        if (*fit_cmd) {
            return cmd_fit(fit);
        }
        if (*forecast_cmd) {
            return cmd_forecast(forecast);
        }
        if (*backtest_cmd) {
            return cmd_backtest(backtest);
        }
        return cmd_curves(curves);
    } catch (const std::invalid_argument &e) {
        std::cerr << "slmort: " << e.what() << '\n';
        return ExitCode::usage;
    } catch (const std::exception &e) {
        std::cerr << "slmort: " << e.what() << '\n';
        return ExitCode::data_error;
    }
}
