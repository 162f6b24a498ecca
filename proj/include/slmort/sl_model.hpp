#pragma once

#include "slmort/lifetable.hpp"
#include "slmort/timeseries.hpp"
#include "slmort/transforms.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace slmort {

/// Parameters of L(S_t(x)) - L(S_t0(x)) = alpha1_t + alpha2_t * kappa_x.
struct SlParams {
    Eigen::VectorXd alpha1; // one entry per fit year
    Eigen::VectorXd alpha2; // one entry per fit year
    Eigen::VectorXd kappa;  // one entry per age
    int t0;
    AgeRange ages;
    YearRange years;

    /// alpha1_t + alpha2_t * kappa_x as an ages x years matrix.
    [[nodiscard]] Eigen::MatrixXd fitted() const;

    /// (alpha1_t, alpha2_t) as a years x 2 matrix, ready for RWD calibration.
    [[nodiscard]] Eigen::MatrixXd time_series() const;
};

struct FitConfig {
    double gamma = 0.5;   // damping of each coordinate step, in (0, 2)
    double epsilon = 1e-8; // stop once no parameter moves by epsilon in a sweep
    int k_max = 5000;      // maximum number of sweeps
    /// Starting age profile; x - mean(x) when empty.
    std::optional<Eigen::VectorXd> initial_kappa;

    void validate() const;
};

struct FitDiagnostics {
    int iterations = 0;
    bool converged = false;
    double final_objective = 0.0;
    /// Objective at initialisation followed by the objective after each sweep.
    std::vector<double> objective_trace;
    double max_param_delta = 0.0;
};

struct SlFit {
    SlParams params;
    FitDiagnostics diagnostics;
};

/// Sum of squared residuals of the surface against the parameters.
[[nodiscard]] double sl_objective(const LDiffSurface &delta, const SlParams &params);

/// Fixes kappa (x - mean(x) unless configured) and regresses each year's column on it.
[[nodiscard]] SlParams init_sl(const LDiffSurface &delta, const FitConfig &config = {});

/// Damped cyclic coordinate descent on the least-squares objective.
///
/// Each sweep updates every alpha1_t, then every alpha2_t, then every kappa_x, each step
/// moving gamma times the way to that coordinate's exact minimiser given the latest values
/// of all other parameters. Returned parameters are gauge-normalised.
[[nodiscard]] SlFit fit_sl(const LDiffSurface &delta, const FitConfig &config = {});

/// Reparameterises so that sum(kappa) = 0, ||kappa|| = 1 and kappa at x_max >= 0, leaving
/// alpha1_t + alpha2_t * kappa_x unchanged.
[[nodiscard]] SlParams normalize_gauge(const SlParams &params);

/// In-sample death probabilities (ages x fit years) implied by the fitted surface.
[[nodiscard]] Eigen::MatrixXd sl_fitted_q(const SlParams &params,
                                          const Eigen::VectorXd &base_survival);

/// Forecast death probabilities, one ages x horizon matrix per projected path.
[[nodiscard]] std::vector<Eigen::MatrixXd> sl_forecast(const SlParams &params,
                                                       const RwdParams &rwd,
                                                       const Eigen::VectorXd &base_survival,
                                                       int horizon,
                                                       const ForecastMode &mode = CentralForecast{});

} // namespace slmort
