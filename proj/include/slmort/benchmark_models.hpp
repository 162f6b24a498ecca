#pragma once

#include "slmort/lifetable.hpp"
#include "slmort/timeseries.hpp"

#include <Eigen/Dense>

#include <vector>

namespace slmort {

/// Lee-Carter: log m_{x,t} = alpha_x + beta_x * kappa_t with sum(kappa) = 0, sum(beta) = 1.
struct LcParams {
    Eigen::VectorXd alpha; // per age
    Eigen::VectorXd beta;  // per age
    Eigen::VectorXd kappa; // per fit year
    AgeRange ages;
    YearRange years;

    /// Fitted log central rates, ages x years.
    [[nodiscard]] Eigen::MatrixXd fitted_log_m() const;
    /// Fitted death probabilities, ages x years.
    [[nodiscard]] Eigen::MatrixXd fitted_q() const;
};

/// Cairns-Blake-Dowd: logit q_{x,t} = kappa1_t + kappa2_t * (x - x_bar).
struct CbdParams {
    Eigen::VectorXd kappa1; // per fit year
    Eigen::VectorXd kappa2; // per fit year
    double x_bar;
    AgeRange ages;
    YearRange years;

    [[nodiscard]] Eigen::MatrixXd fitted_logit_q() const;
    [[nodiscard]] Eigen::MatrixXd fitted_q() const;
    /// (kappa1_t, kappa2_t) as a years x 2 matrix.
    [[nodiscard]] Eigen::MatrixXd time_series() const;
};

/// Row means of log m, then the leading singular pair of the centred matrix rescaled to the
/// identifiability constraints. The SVD sign is fixed so sum(beta) > 0 before rescaling.
[[nodiscard]] LcParams fit_lc(const MortalitySurface &central_rates);

/// Per-year closed-form OLS of logit q on (x - x_bar).
[[nodiscard]] CbdParams fit_cbd(const MortalitySurface &death_probs);

/// Forecast death probabilities from a one-dimensional walk on kappa_t, ages x horizon per path.
[[nodiscard]] std::vector<Eigen::MatrixXd> lc_forecast(const LcParams &params, const RwdParams &rwd,
                                                       int horizon,
                                                       const ForecastMode &mode = CentralForecast{});

/// Forecast death probabilities from a two-dimensional walk on (kappa1, kappa2).
[[nodiscard]] std::vector<Eigen::MatrixXd> cbd_forecast(const CbdParams &params,
                                                        const RwdParams &rwd, int horizon,
                                                        const ForecastMode &mode = CentralForecast{});

} // namespace slmort
