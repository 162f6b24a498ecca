#include "slmort/sl_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slmort {

Eigen::MatrixXd SlParams::fitted() const {
    return alpha1.transpose().replicate(kappa.size(), 1) + kappa * alpha2.transpose();
}

Eigen::MatrixXd SlParams::time_series() const {
    Eigen::MatrixXd out(alpha1.size(), 2);
    out.col(0) = alpha1;
    out.col(1) = alpha2;
    return out;
}

void FitConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 2.0)) {
        throw std::invalid_argument("gamma must lie in (0, 2), got " + std::to_string(gamma));
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    if (k_max < 1) {
        throw std::invalid_argument("k_max must be at least 1");
    }
}

namespace {

void check_dimensions(const LDiffSurface &delta, const SlParams &params) {
    if (params.kappa.size() != delta.values.rows() || params.alpha1.size() != delta.values.cols() ||
        params.alpha2.size() != delta.values.cols()) {
        throw std::invalid_argument("SL parameter dimensions do not match the surface");
    }
}

void check_surface(const LDiffSurface &delta) {
    if (delta.values.rows() != delta.ages.size() || delta.values.cols() != delta.years.size()) {
        throw std::invalid_argument("L-difference matrix does not match its ranges");
    }
    if (!delta.values.allFinite()) {
        throw DomainError("L-difference surface contains non-finite values");
    }
}

} // namespace

double sl_objective(const LDiffSurface &delta, const SlParams &params) {
    check_dimensions(delta, params);
    return (delta.values - params.fitted()).squaredNorm();
}

SlParams init_sl(const LDiffSurface &delta, const FitConfig &config) {
    check_surface(delta);
    const Eigen::Index n_ages = delta.values.rows();
    if (n_ages < 2) {
        throw std::invalid_argument("SL initialisation needs at least 2 ages");
    }

    Eigen::VectorXd kappa;
    if (config.initial_kappa) {
        kappa = *config.initial_kappa;
        if (kappa.size() != n_ages || !kappa.allFinite()) {
            throw std::invalid_argument("initial kappa must be finite with one entry per age");
        }
    } else {
        kappa.resize(n_ages);
        const double mean_age = delta.ages.mean();
        for (Eigen::Index i = 0; i < n_ages; ++i) {
            kappa(i) = static_cast<double>(delta.ages.min() + i) - mean_age;
        }
    }

    const double kappa_mean = kappa.mean();
    const Eigen::VectorXd centered = kappa.array() - kappa_mean;
    const double sxx = centered.squaredNorm();
    if (sxx == 0.0) {
        throw DegenerateFitError("initial kappa is constant; the per-year regression is undefined");
    }

    const Eigen::Index n_years = delta.values.cols();
    Eigen::VectorXd alpha1(n_years);
    Eigen::VectorXd alpha2(n_years);
    for (Eigen::Index j = 0; j < n_years; ++j) {
        const auto column = delta.values.col(j);
        const double slope = centered.dot(column) / sxx;
        alpha2(j) = slope;
        alpha1(j) = column.mean() - slope * kappa_mean;
    }
    return {std::move(alpha1), std::move(alpha2), std::move(kappa), delta.t0, delta.ages,
            delta.years};
}

SlFit fit_sl(const LDiffSurface &delta, const FitConfig &config) {
    config.validate();
    check_surface(delta);
    const Eigen::MatrixXd &d = delta.values;
    const Eigen::Index n_ages = d.rows();
    const Eigen::Index n_years = d.cols();
    if (n_ages < 2 || n_years < 2) {
        throw std::invalid_argument("SL fit needs at least 2 ages and 2 fit years");
    }

    SlParams p = init_sl(delta, config);
    Eigen::VectorXd &a1 = p.alpha1;
    Eigen::VectorXd &a2 = p.alpha2;
    Eigen::VectorXd &k = p.kappa;
    const double gamma = config.gamma;
    // Below this size the time loading carries no information about kappa beyond rounding.
    const double loading_floor = 1e-12 * std::max(d.cwiseAbs().maxCoeff(), 1e-300);

    FitDiagnostics diag;
    diag.objective_trace.push_back(sl_objective(delta, p));

    Eigen::VectorXd prev_a1;
    Eigen::VectorXd prev_a2;
    Eigen::VectorXd prev_k;
    while (diag.iterations < config.k_max) {
        prev_a1 = a1;
        prev_a2 = a2;
        prev_k = k;

        for (Eigen::Index t = 0; t < n_years; ++t) {
            double resid = 0.0;
            for (Eigen::Index x = 0; x < n_ages; ++x) {
                resid += d(x, t) - a1(t) - a2(t) * k(x);
            }
            a1(t) += gamma * resid / static_cast<double>(n_ages);
        }

        const double kappa_sq = k.squaredNorm();
        if (kappa_sq == 0.0) {
            throw DegenerateFitError("kappa collapsed to zero during the SL fit; re-initialise "
                                     "with a different age profile");
        }
        for (Eigen::Index t = 0; t < n_years; ++t) {
            double num = 0.0;
            for (Eigen::Index x = 0; x < n_ages; ++x) {
                num += k(x) * (d(x, t) - a1(t) - a2(t) * k(x));
            }
            a2(t) += gamma * num / kappa_sq;
        }

        const double alpha2_sq = a2.squaredNorm();
        if (std::sqrt(alpha2_sq) * k.cwiseAbs().maxCoeff() > loading_floor) {
            for (Eigen::Index x = 0; x < n_ages; ++x) {
                double num = 0.0;
                for (Eigen::Index t = 0; t < n_years; ++t) {
                    num += a2(t) * (d(x, t) - a1(t) - a2(t) * k(x));
                }
                k(x) += gamma * num / alpha2_sq;
            }
        }

        ++diag.iterations;
        diag.objective_trace.push_back(sl_objective(delta, p));
        diag.max_param_delta = std::max({(a1 - prev_a1).cwiseAbs().maxCoeff(),
                                         (a2 - prev_a2).cwiseAbs().maxCoeff(),
                                         (k - prev_k).cwiseAbs().maxCoeff()});
        if (!std::isfinite(diag.max_param_delta)) {
            throw DegenerateFitError("SL fit diverged (non-finite parameters)");
        }
        if (diag.max_param_delta < config.epsilon) {
            diag.converged = true;
            break;
        }
    }
    diag.final_objective = diag.objective_trace.back();
    return {normalize_gauge(p), std::move(diag)};
}

SlParams normalize_gauge(const SlParams &params) {
    const double mean = params.kappa.mean();
    Eigen::VectorXd kappa = params.kappa.array() - mean;
    double scale = kappa.norm();
    if (!(scale > 1e-12 * params.kappa.cwiseAbs().maxCoeff())) {
        throw DegenerateFitError("kappa is constant; the SL gauge is undefined");
    }
    if (kappa(kappa.size() - 1) < 0.0) {
        scale = -scale;
    }
    kappa /= scale;

    SlParams out = params;
    out.alpha1 = params.alpha1 + mean * params.alpha2;
    out.alpha2 = scale * params.alpha2;
    out.kappa = std::move(kappa);
    return out;
}

Eigen::MatrixXd sl_fitted_q(const SlParams &params, const Eigen::VectorXd &base_survival) {
    const Eigen::MatrixXd survival = invert_l_diff(params.fitted(), base_survival);
    Eigen::MatrixXd q(survival.rows(), survival.cols());
    for (Eigen::Index j = 0; j < survival.cols(); ++j) {
        const Eigen::VectorXd column = survival.col(j);
        q.col(j) = survival_to_q(as_span(column));
    }
    return q;
}

std::vector<Eigen::MatrixXd> sl_forecast(const SlParams &params, const RwdParams &rwd,
                                         const Eigen::VectorXd &base_survival, int horizon,
                                         const ForecastMode &mode) {
    if (rwd.dim() != 2) {
        throw std::invalid_argument("SL forecasting needs a two-dimensional random walk");
    }
    if (base_survival.size() != params.kappa.size()) {
        throw std::invalid_argument("base survival length does not match the age window");
    }

    std::vector<Eigen::MatrixXd> out;
    for (const auto &states : project_states(rwd, horizon, mode)) {
        Eigen::MatrixXd q(params.kappa.size(), horizon);
        for (int h = 0; h < horizon; ++h) {
            const Eigen::VectorXd delta =
                states(h, 0) + states(h, 1) * params.kappa.array();
            const Eigen::VectorXd survival = invert_l_diff(as_span(delta), as_span(base_survival));
            q.col(h) = survival_to_q(as_span(survival));
        }
        out.push_back(std::move(q));
    }
    return out;
}

} // namespace slmort
