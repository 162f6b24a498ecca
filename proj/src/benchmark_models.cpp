#include "slmort/benchmark_models.hpp"

#include "slmort/transforms.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace slmort {

namespace {

double lc_q(double alpha, double beta, double kappa) {
    return central_rate_to_q(std::exp(alpha + beta * kappa));
}

} // namespace

Eigen::MatrixXd LcParams::fitted_log_m() const {
    return alpha.replicate(1, kappa.size()) + beta * kappa.transpose();
}

Eigen::MatrixXd LcParams::fitted_q() const {
    Eigen::MatrixXd q(alpha.size(), kappa.size());
    for (Eigen::Index t = 0; t < kappa.size(); ++t) {
        for (Eigen::Index x = 0; x < alpha.size(); ++x) {
            q(x, t) = lc_q(alpha(x), beta(x), kappa(t));
        }
    }
    return q;
}

Eigen::MatrixXd CbdParams::fitted_logit_q() const {
    Eigen::MatrixXd out(ages.size(), kappa1.size());
    for (Eigen::Index t = 0; t < kappa1.size(); ++t) {
        for (Eigen::Index x = 0; x < ages.size(); ++x) {
            const double offset = static_cast<double>(ages.min() + x) - x_bar;
            out(x, t) = kappa1(t) + kappa2(t) * offset;
        }
    }
    return out;
}

Eigen::MatrixXd CbdParams::fitted_q() const {
    return fitted_logit_q().unaryExpr([](double y) { return logistic(y); });
}

Eigen::MatrixXd CbdParams::time_series() const {
    Eigen::MatrixXd out(kappa1.size(), 2);
    out.col(0) = kappa1;
    out.col(1) = kappa2;
    return out;
}

LcParams fit_lc(const MortalitySurface &central_rates) {
    if (central_rates.kind() != Quantity::central_rate) {
        throw std::invalid_argument("fit_lc expects a central_rate surface");
    }
    const AgeRange &ages = central_rates.ages();
    const YearRange &years = central_rates.years();
    const Eigen::MatrixXd &m = central_rates.values();

    Eigen::MatrixXd log_m(m.rows(), m.cols());
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
        for (Eigen::Index x = 0; x < m.rows(); ++x) {
            if (!(m(x, t) > 0.0)) {
                throw DomainError("Lee-Carter needs positive central rates",
                                  {ages.min() + static_cast<int>(x),
                                   years.min() + static_cast<int>(t)});
            }
            log_m(x, t) = std::log(m(x, t));
        }
    }

    Eigen::VectorXd alpha = log_m.rowwise().mean();
    const Eigen::MatrixXd centered = log_m.colwise() - alpha;
    const auto n_ages = static_cast<double>(m.rows());

    // Rows that are constant over time leave only rounding noise after centring.
    const double flat_tolerance = 1e-13 * std::max(1.0, log_m.cwiseAbs().maxCoeff());
    if (centered.cwiseAbs().maxCoeff() <= flat_tolerance) {
        return {std::move(alpha), Eigen::VectorXd::Constant(m.rows(), 1.0 / n_ages),
                Eigen::VectorXd::Zero(m.cols()), ages, years};
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered,
                                                Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd beta = svd.matrixU().col(0);
    Eigen::VectorXd kappa = svd.singularValues()(0) * svd.matrixV().col(0);

    double beta_sum = beta.sum();
    if (beta_sum < 0.0) {
        beta = -beta;
        kappa = -kappa;
        beta_sum = -beta_sum;
    }
    if (beta_sum <= 1e-12 * beta.cwiseAbs().sum()) {
        throw DomainError("leading Lee-Carter age profile sums to zero; sum(beta) = 1 cannot be "
                          "imposed");
    }
    beta /= beta_sum;
    kappa *= beta_sum;

    const double kappa_mean = kappa.mean();
    alpha += beta * kappa_mean;
    kappa.array() -= kappa_mean;
    return {std::move(alpha), std::move(beta), std::move(kappa), ages, years};
}

CbdParams fit_cbd(const MortalitySurface &death_probs) {
    if (death_probs.kind() != Quantity::death_prob) {
        throw std::invalid_argument("fit_cbd expects a death_prob surface");
    }
    const AgeRange &ages = death_probs.ages();
    const YearRange &years = death_probs.years();
    if (ages.size() < 2) {
        throw std::invalid_argument("CBD fit needs at least 2 ages");
    }
    const double x_bar = ages.mean();
    Eigen::VectorXd offsets(ages.size());
    for (Eigen::Index x = 0; x < ages.size(); ++x) {
        offsets(x) = static_cast<double>(ages.min() + x) - x_bar;
    }
    const double sxx = offsets.squaredNorm();

    const Eigen::MatrixXd &q = death_probs.values();
    Eigen::VectorXd kappa1(years.size());
    Eigen::VectorXd kappa2(years.size());
    Eigen::VectorXd y(ages.size());
    for (Eigen::Index t = 0; t < years.size(); ++t) {
        for (Eigen::Index x = 0; x < ages.size(); ++x) {
            const double p = q(x, t);
            if (!(p > 0.0 && p < 1.0)) {
                throw DomainError("CBD needs death probabilities strictly inside (0, 1)",
                                  {ages.min() + static_cast<int>(x),
                                   years.min() + static_cast<int>(t)});
            }
            y(x) = logit(p);
        }
        // Offsets are centred, so the intercept is the plain mean.
        kappa1(t) = y.mean();
        kappa2(t) = offsets.dot(y) / sxx;
    }
    return {std::move(kappa1), std::move(kappa2), x_bar, ages, years};
}

std::vector<Eigen::MatrixXd> lc_forecast(const LcParams &params, const RwdParams &rwd, int horizon,
                                         const ForecastMode &mode) {
    if (rwd.dim() != 1) {
        throw std::invalid_argument("Lee-Carter forecasting needs a one-dimensional random walk");
    }
    std::vector<Eigen::MatrixXd> out;
    for (const auto &states : project_states(rwd, horizon, mode)) {
        Eigen::MatrixXd q(params.alpha.size(), horizon);
        for (int h = 0; h < horizon; ++h) {
            for (Eigen::Index x = 0; x < params.alpha.size(); ++x) {
                q(x, h) = lc_q(params.alpha(x), params.beta(x), states(h, 0));
            }
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<Eigen::MatrixXd> cbd_forecast(const CbdParams &params, const RwdParams &rwd,
                                          int horizon, const ForecastMode &mode) {
    if (rwd.dim() != 2) {
        throw std::invalid_argument("CBD forecasting needs a two-dimensional random walk");
    }
    std::vector<Eigen::MatrixXd> out;
    for (const auto &states : project_states(rwd, horizon, mode)) {
        Eigen::MatrixXd q(params.ages.size(), horizon);
        for (int h = 0; h < horizon; ++h) {
            for (Eigen::Index x = 0; x < params.ages.size(); ++x) {
                const double offset = static_cast<double>(params.ages.min() + x) - params.x_bar;
                q(x, h) = logistic(states(h, 0) + states(h, 1) * offset);
            }
        }
        out.push_back(std::move(q));
    }
    return out;
}

} // namespace slmort
