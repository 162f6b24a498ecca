#pragma once

#include "slmort/lifetable.hpp"
#include "slmort/sl_model.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slmort {

enum class Model { sl, lc, cbd };

[[nodiscard]] std::string_view to_string(Model model) noexcept;
/// Accepts "sl" (or its alias "ls"), "lc" and "cbd", case-insensitively.
[[nodiscard]] Model parse_model(std::string_view name);

enum class MapeDenominator { estimate, observed };

[[nodiscard]] double mse(std::span<const double> observed, std::span<const double> estimated);

/// Mean absolute percentage error. By default each absolute error is divided by the estimate.
[[nodiscard]] double mape(std::span<const double> observed, std::span<const double> estimated,
                          MapeDenominator denominator = MapeDenominator::estimate);

/// Cumulative log improvement -log(q_t / q_ref) * scale for each entry of the series.
[[nodiscard]] Eigen::VectorXd mi_rate(std::span<const double> q_series, double q_ref,
                                      double scale = 100.0);

/// Two-year MAPE of improvement rates, dividing by the estimates.
[[nodiscard]] double mape_delta_last_two(std::array<double, 2> observed,
                                         std::array<double, 2> estimated);

struct BacktestConfig {
    AgeRange ages{60, 89};
    YearRange fit_years{1960, 1989};
    YearRange forecast_years{1990, 2009};
    std::optional<int> t0;                      // SL reference year; fit_years.min() - 1 if unset
    std::vector<Model> models{Model::sl, Model::lc, Model::cbd};
    MapeDenominator mape_denominator = MapeDenominator::estimate;
    FitConfig sl_fit;
    int mi_age = 65;
    std::optional<int> mi_ref_year;             // fit_years.max() if unset
    std::string country;
    std::string sex;

    [[nodiscard]] int reference_year() const { return t0.value_or(fit_years.min() - 1); }
    [[nodiscard]] int mi_reference_year() const { return mi_ref_year.value_or(fit_years.max()); }
    void validate() const;
};

struct Metrics {
    double mse = 0.0;
    double mse_star = 0.0; // 10^4 * mse
    double mape = 0.0;
};

/// Observed and projected improvement rates at one age over the forecast years.
struct MiSeries {
    int age;
    int ref_year;
    std::vector<int> years;
    Eigen::VectorXd observed;
    Eigen::VectorXd projected;
    /// Two-year index over the last two forecast years; empty when undefined.
    std::optional<double> mape_delta;
};

struct ModelResult {
    Model model;
    Metrics fit;
    Metrics forecast;
    Eigen::MatrixXd fitted_q;   // ages x fit years
    Eigen::MatrixXd forecast_q; // ages x forecast years, central path
    std::optional<MiSeries> mi;
    std::optional<FitDiagnostics> sl_diagnostics;
};

struct BacktestReport {
    std::string country;
    std::string sex;
    AgeRange ages;
    YearRange fit_years;
    YearRange forecast_years;
    std::vector<ModelResult> results; // in the order the models were requested

    [[nodiscard]] const ModelResult &result(Model model) const;
};

/// Fits every requested model on the fit window and scores in-sample fits and central
/// forecasts against observed death probabilities.
[[nodiscard]] BacktestReport run_backtest(const MortalitySurface &central_rates,
                                          const BacktestConfig &config);

} // namespace slmort
