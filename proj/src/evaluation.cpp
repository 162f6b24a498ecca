#include "slmort/evaluation.hpp"

#include "slmort/benchmark_models.hpp"
#include "slmort/timeseries.hpp"
#include "slmort/transforms.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <stdexcept>
#include <string>

namespace slmort {

std::string_view to_string(Model model) noexcept {
    switch (model) {
    case Model::sl:
        return "SL";
    case Model::lc:
        return "LC";
    case Model::cbd:
        return "CBD";
    }
    return "?";
}

Model parse_model(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "sl" || lower == "ls") {
        return Model::sl;
    }
    if (lower == "lc") {
        return Model::lc;
    }
    if (lower == "cbd") {
        return Model::cbd;
    }
    throw std::invalid_argument("unknown model '" + std::string(name) + "' (expected sl, lc, cbd)");
}

namespace {

void check_pair(std::span<const double> observed, std::span<const double> estimated) {
    if (observed.size() != estimated.size()) {
        throw std::invalid_argument("observed and estimated samples differ in length (" +
                                    std::to_string(observed.size()) + " vs " +
                                    std::to_string(estimated.size()) + ")");
    }
    if (observed.empty()) {
        throw std::invalid_argument("error metrics need at least one sample");
    }
}

std::span<const double> flat(const Eigen::MatrixXd &m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}

} // namespace

double mse(std::span<const double> observed, std::span<const double> estimated) {
    check_pair(observed, estimated);
    double sum = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - estimated[i];
        sum += e * e;
    }
    return sum / static_cast<double>(observed.size());
}

double mape(std::span<const double> observed, std::span<const double> estimated,
            MapeDenominator denominator) {
    check_pair(observed, estimated);
    double sum = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double base =
            denominator == MapeDenominator::estimate ? estimated[i] : observed[i];
        if (base == 0.0) {
            throw std::domain_error("MAPE denominator is zero at sample " + std::to_string(i));
        }
        sum += std::abs(observed[i] - estimated[i]) / base;
    }
    return sum / static_cast<double>(observed.size()) * 100.0;
}

Eigen::VectorXd mi_rate(std::span<const double> q_series, double q_ref, double scale) {
    if (!(q_ref > 0.0 && q_ref < 1.0)) {
        throw DomainError("reference death probability must lie in (0, 1)");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(q_series.size()));
    for (std::size_t i = 0; i < q_series.size(); ++i) {
        const double q = q_series[i];
        if (!(q > 0.0 && q < 1.0)) {
            throw DomainError("death probability at offset " + std::to_string(i) +
                              " must lie in (0, 1)");
        }
        out(static_cast<Eigen::Index>(i)) = -std::log(q / q_ref) * scale;
    }
    return out;
}

double mape_delta_last_two(std::array<double, 2> observed, std::array<double, 2> estimated) {
    if (estimated[0] == 0.0 || estimated[1] == 0.0) {
        throw std::domain_error("improvement-rate MAPE needs nonzero estimates");
    }
    return 0.5 *
           (std::abs(observed[0] - estimated[0]) / estimated[0] +
            std::abs(observed[1] - estimated[1]) / estimated[1]) *
           100.0;
}

void BacktestConfig::validate() const {
    if (forecast_years.min() != fit_years.max() + 1) {
        throw std::invalid_argument("forecast window must start the year after the fit window (" +
                                    std::to_string(fit_years.max() + 1) + ")");
    }
    if (fit_years.size() < 3) {
        throw std::invalid_argument("fit window needs at least 3 years for drift calibration");
    }
    if (reference_year() >= fit_years.min()) {
        throw std::invalid_argument("SL reference year must precede the fit window");
    }
    if (ages.size() < 2) {
        throw std::invalid_argument("age window needs at least 2 ages");
    }
    if (models.empty()) {
        throw std::invalid_argument("no models requested");
    }
    sl_fit.validate();
}

const ModelResult &BacktestReport::result(Model model) const {
    for (const auto &r : results) {
        if (r.model == model) {
            return r;
        }
    }
    throw std::out_of_range("model " + std::string(to_string(model)) + " not in report");
}

namespace {

struct Observed {
    MortalitySurface q; // ages x [first data year needed .. forecast end]
    Eigen::MatrixXd fit;
    Eigen::MatrixXd forecast;
};

Metrics score(const Eigen::MatrixXd &observed, const Eigen::MatrixXd &estimated,
              MapeDenominator denominator) {
    Metrics m;
    m.mse = mse(flat(observed), flat(estimated));
    m.mse_star = 1e4 * m.mse;
    m.mape = mape(flat(observed), flat(estimated), denominator);
    return m;
}

ModelResult fit_and_forecast(Model model, const MortalitySurface &rates, const Observed &obs,
                             const BacktestConfig &config) {
    const auto &fit_years = config.fit_years;
    const int horizon = static_cast<int>(config.forecast_years.size());
    ModelResult result{model, {}, {}, {}, {}, std::nullopt, std::nullopt};

    switch (model) {
    case Model::sl: {
        const YearRange span_years(config.reference_year(), fit_years.max());
        const auto survival = surface_q_to_survival(obs.q.window(config.ages, span_years));
        const auto delta = build_l_diff(survival, fit_years, config.reference_year());
        auto fit = fit_sl(delta, config.sl_fit);
        const auto rwd = calibrate_rwd(fit.params.time_series(), fit_years.min());
        result.fitted_q = sl_fitted_q(fit.params, delta.base_survival);
        result.forecast_q = sl_forecast(fit.params, rwd, delta.base_survival, horizon).front();
        result.sl_diagnostics = std::move(fit.diagnostics);
        break;
    }
    case Model::lc: {
        const auto params = fit_lc(rates.window(config.ages, fit_years));
        const auto rwd = calibrate_rwd(Eigen::MatrixXd(params.kappa), fit_years.min());
        result.fitted_q = params.fitted_q();
        result.forecast_q = lc_forecast(params, rwd, horizon).front();
        break;
    }
    case Model::cbd: {
        const auto params = fit_cbd(obs.q.window(config.ages, fit_years));
        const auto rwd = calibrate_rwd(params.time_series(), fit_years.min());
        result.fitted_q = params.fitted_q();
        result.forecast_q = cbd_forecast(params, rwd, horizon).front();
        break;
    }
    }

    result.fit = score(obs.fit, result.fitted_q, config.mape_denominator);
    result.forecast = score(obs.forecast, result.forecast_q, config.mape_denominator);
    return result;
}

std::optional<MiSeries> improvement_series(const ModelResult &result, const Observed &obs,
                                           const BacktestConfig &config) {
    const int age = config.mi_age;
    const int ref_year = config.mi_reference_year();
    if (!config.ages.contains(age) || !obs.q.years().contains(ref_year)) {
        return std::nullopt;
    }
    const auto row = config.ages.index(age);
    const double q_ref = obs.q.at(age, ref_year);
    const Eigen::VectorXd observed_q = obs.forecast.row(row).transpose();
    const Eigen::VectorXd projected_q = result.forecast_q.row(row).transpose();

    MiSeries mi{age, ref_year, {}, mi_rate(as_span(observed_q), q_ref),
                mi_rate(as_span(projected_q), q_ref), std::nullopt};
    for (int year = config.forecast_years.min(); year <= config.forecast_years.max(); ++year) {
        mi.years.push_back(year);
    }
    const auto n = mi.observed.size();
    if (n >= 2 && mi.projected(n - 2) != 0.0 && mi.projected(n - 1) != 0.0) {
        mi.mape_delta = mape_delta_last_two({mi.observed(n - 2), mi.observed(n - 1)},
                                            {mi.projected(n - 2), mi.projected(n - 1)});
    }
    return mi;
}

} // namespace

BacktestReport run_backtest(const MortalitySurface &central_rates, const BacktestConfig &config) {
    config.validate();
    if (central_rates.kind() != Quantity::central_rate) {
        throw std::invalid_argument("run_backtest expects central death rates");
    }
    const bool needs_reference =
        std::find(config.models.begin(), config.models.end(), Model::sl) != config.models.end();
    const int first_year = needs_reference
                               ? std::min(config.reference_year(), config.fit_years.min())
                               : config.fit_years.min();
    const YearRange data_years(std::min(first_year, config.mi_reference_year()),
                               config.forecast_years.max());
    if (!central_rates.ages().contains(config.ages) ||
        !central_rates.years().contains(YearRange(first_year, config.forecast_years.max()))) {
        throw DataError("data cover ages " + std::to_string(central_rates.ages().min()) + "-" +
                        std::to_string(central_rates.ages().max()) + ", years " +
                        std::to_string(central_rates.years().min()) + "-" +
                        std::to_string(central_rates.years().max()) +
                        "; the backtest needs ages " + std::to_string(config.ages.min()) + "-" +
                        std::to_string(config.ages.max()) + ", years " +
                        std::to_string(first_year) + "-" +
                        std::to_string(config.forecast_years.max()));
    }

    const YearRange available(
        central_rates.years().contains(data_years.min()) ? data_years.min() : first_year,
        config.forecast_years.max());
    Observed obs{surface_m_to_q(central_rates.window(config.ages, available)), {}, {}};
    obs.fit = obs.q.window(config.ages, config.fit_years).values();
    obs.forecast = obs.q.window(config.ages, config.forecast_years).values();
    const auto rates = central_rates.window(config.ages, available);

    // Models are independent; results are collected in request order.
    std::vector<std::future<ModelResult>> pending;
    pending.reserve(config.models.size());
    for (Model model : config.models) {
        pending.push_back(std::async(std::launch::async, [&, model] {
            return fit_and_forecast(model, rates, obs, config);
        }));
    }

    BacktestReport report{config.country, config.sex, config.ages, config.fit_years,
                          config.forecast_years, {}};
    for (auto &f : pending) {
        ModelResult result = f.get();
        result.mi = improvement_series(result, obs, config);
        report.results.push_back(std::move(result));
    }
    return report;
}

} // namespace slmort
