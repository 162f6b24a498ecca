#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace slmort {

/// Random walk with drift: state_{t+1} = state_t + drift + innovation * Z_{t+1}, Z ~ N(0, I).
///
/// `innovation` is upper triangular with a nonnegative diagonal, so
/// innovation * innovation^T is the covariance of one-step increments.
struct RwdParams {
    Eigen::VectorXd drift;
    Eigen::MatrixXd innovation;
    Eigen::VectorXd last_state;
    int last_year;

    [[nodiscard]] Eigen::Index dim() const noexcept { return drift.size(); }
};

/// Gaussian MLE on first differences: mean for the drift, Cholesky factor of the sample
/// covariance (denominator n - 1) for the innovation factor.
///
/// `series` holds one observation per row, in year order. Needs at least 3 observations and
/// strictly consecutive years.
[[nodiscard]] RwdParams calibrate_rwd(const Eigen::MatrixXd &series, std::span<const int> years);

/// Convenience overload for years first_year, first_year + 1, ...
[[nodiscard]] RwdParams calibrate_rwd(const Eigen::MatrixXd &series, int first_year);

/// Upper-triangular factor U with U * U^T = cov. Trailing (near-)zero pivots get zeroed
/// columns instead of failing, so a singular covariance yields a rank-deficient factor.
[[nodiscard]] Eigen::MatrixXd upper_cholesky_semidefinite(const Eigen::MatrixXd &cov,
                                                          double zero_pivot);

/// Noise-free path: row h-1 holds last_state + h * drift, h = 1..horizon.
[[nodiscard]] Eigen::MatrixXd project_central(const RwdParams &params, int horizon);

/// `n_paths` sample paths (each horizon x dim). Path p draws from its own generator seeded by
/// (seed, p), so output does not depend on the order in which paths are evaluated.
[[nodiscard]] std::vector<Eigen::MatrixXd> simulate_paths(const RwdParams &params, int horizon,
                                                          std::size_t n_paths, std::uint64_t seed);

struct CentralForecast {};
struct SampledForecast {
    std::uint64_t seed;
    std::size_t n_paths;
};
using ForecastMode = std::variant<CentralForecast, SampledForecast>;

/// Projected state paths for either mode: one path when central, n_paths when sampled.
[[nodiscard]] std::vector<Eigen::MatrixXd> project_states(const RwdParams &params, int horizon,
                                                          const ForecastMode &mode);

} // namespace slmort
