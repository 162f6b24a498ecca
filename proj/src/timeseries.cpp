#include "slmort/timeseries.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace slmort {

Eigen::MatrixXd upper_cholesky_semidefinite(const Eigen::MatrixXd &cov, double zero_pivot) {
    if (cov.rows() != cov.cols()) {
        throw std::invalid_argument("covariance must be square");
    }
    const Eigen::Index n = cov.rows();
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, n);
    // Columns are filled right to left; column j only sees columns k > j.
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        double pivot = cov(j, j);
        for (Eigen::Index k = j + 1; k < n; ++k) {
            pivot -= u(j, k) * u(j, k);
        }
        if (pivot <= zero_pivot) {
            if (pivot < -zero_pivot && pivot < -1e-12 * std::abs(cov(j, j))) {
                throw std::domain_error("covariance matrix is not positive semidefinite");
            }
            continue;
        }
        const double diag = std::sqrt(pivot);
        u(j, j) = diag;
        for (Eigen::Index i = 0; i < j; ++i) {
            double v = cov(i, j);
            for (Eigen::Index k = j + 1; k < n; ++k) {
                v -= u(i, k) * u(j, k);
            }
            u(i, j) = v / diag;
        }
    }
    return u;
}

RwdParams calibrate_rwd(const Eigen::MatrixXd &series, std::span<const int> years) {
    const Eigen::Index n = series.rows();
    if (n < 3) {
        throw std::invalid_argument("random walk calibration needs at least 3 observations, got " +
                                    std::to_string(n));
    }
    if (static_cast<Eigen::Index>(years.size()) != n) {
        throw std::invalid_argument("one year per observation is required");
    }
    for (std::size_t i = 1; i < years.size(); ++i) {
        if (years[i] != years[i - 1] + 1) {
            throw std::invalid_argument("observation years must be consecutive; " +
                                        std::to_string(years[i - 1]) + " is followed by " +
                                        std::to_string(years[i]));
        }
    }
    if (!series.allFinite()) {
        throw std::invalid_argument("random walk series contains non-finite values");
    }

    const Eigen::MatrixXd diffs = series.bottomRows(n - 1) - series.topRows(n - 1);
    const Eigen::VectorXd drift = diffs.colwise().mean().transpose();
    const Eigen::MatrixXd centered = diffs.rowwise() - drift.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 2);

    // Increments that only differ by rounding (affine series) are treated as noise-free.
    const double scale = std::max(diffs.cwiseAbs().maxCoeff(), series.cwiseAbs().maxCoeff());
    const double noise_floor = 1e3 * std::numeric_limits<double>::epsilon() * scale;

    return {drift, upper_cholesky_semidefinite(cov, noise_floor * noise_floor),
            series.row(n - 1).transpose(), years.back()};
}

RwdParams calibrate_rwd(const Eigen::MatrixXd &series, int first_year) {
    std::vector<int> years(static_cast<std::size_t>(series.rows()));
    std::iota(years.begin(), years.end(), first_year);
    return calibrate_rwd(series, years);
}

namespace {

void check_horizon(int horizon) {
    if (horizon < 1) {
        throw std::invalid_argument("forecast horizon must be at least 1, got " +
                                    std::to_string(horizon));
    }
}

std::mt19937_64 path_generator(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

} // namespace

Eigen::MatrixXd project_central(const RwdParams &params, int horizon) {
    check_horizon(horizon);
    Eigen::MatrixXd out(horizon, params.dim());
    for (int h = 1; h <= horizon; ++h) {
        out.row(h - 1) = (params.last_state + static_cast<double>(h) * params.drift).transpose();
    }
    return out;
}

std::vector<Eigen::MatrixXd> simulate_paths(const RwdParams &params, int horizon,
                                            std::size_t n_paths, std::uint64_t seed) {
    check_horizon(horizon);
    if (n_paths == 0) {
        throw std::invalid_argument("simulate_paths needs at least one path");
    }
    const Eigen::Index dim = params.dim();
    std::vector<Eigen::MatrixXd> paths(n_paths, Eigen::MatrixXd(horizon, dim));
    for (std::size_t p = 0; p < n_paths; ++p) {
        auto gen = path_generator(seed, p);
        std::normal_distribution<double> normal;
        // The drift part is computed as in project_central so that A = 0 reproduces it bit for bit.
        Eigen::VectorXd noise = Eigen::VectorXd::Zero(dim);
        Eigen::VectorXd z(dim);
        for (int h = 1; h <= horizon; ++h) {
            for (Eigen::Index k = 0; k < dim; ++k) {
                z(k) = normal(gen);
            }
            noise += params.innovation * z;
            paths[p].row(h - 1) =
                (params.last_state + static_cast<double>(h) * params.drift + noise).transpose();
        }
    }
    return paths;
}

std::vector<Eigen::MatrixXd> project_states(const RwdParams &params, int horizon,
                                            const ForecastMode &mode) {
    if (const auto *sampled = std::get_if<SampledForecast>(&mode)) {
        return simulate_paths(params, horizon, sampled->n_paths, sampled->seed);
    }
    return {project_central(params, horizon)};
}

} // namespace slmort
