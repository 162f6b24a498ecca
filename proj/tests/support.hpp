#pragma once

// Seeded generators and small helpers shared by the unit, property and acceptance tests.

#include "slmort/lifetable.hpp"
#include "slmort/sl_model.hpp"
#include "slmort/transforms.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace slmort::testing {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen_); }
    bool coin() { return integer(0, 1) == 1; }

    Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i) = uniform(lo, hi);
        }
        return v;
    }

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            for (Eigen::Index i = 0; i < rows; ++i) {
                m(i, j) = normal(sd);
            }
        }
        return m;
    }

    std::mt19937_64 &engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

inline double max_abs(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
    return (a - b).cwiseAbs().maxCoeff();
}

/// A life-table column of `n` death probabilities; a few entries are exactly zero.
inline Eigen::VectorXd random_q_column(Rng &rng, Eigen::Index n, double q_max = 0.99) {
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        q(i) = rng.integer(0, 9) == 0 ? 0.0 : rng.uniform(0.0, q_max);
    }
    return q;
}

/// Death probabilities rising with age, like a real mortality schedule.
inline Eigen::MatrixXd random_q_surface(Rng &rng, Eigen::Index n_ages, Eigen::Index n_years) {
    Eigen::MatrixXd q(n_ages, n_years);
    const double level = rng.uniform(-6.0, -3.5);
    const double slope = rng.uniform(0.03, 0.12);
    for (Eigen::Index t = 0; t < n_years; ++t) {
        for (Eigen::Index x = 0; x < n_ages; ++x) {
            const double logit_q = level + slope * static_cast<double>(x) -
                                   0.01 * static_cast<double>(t) + rng.normal(0.05);
            q(x, t) = logistic(logit_q);
        }
    }
    return q;
}

/// Gauge-normalised SL parameters with time loadings well away from zero.
inline SlParams random_sl_params(Rng &rng, int n_ages, int n_years, int x_min = 60,
                                 int t_min = 1960) {
    Eigen::VectorXd kappa(n_ages);
    do {
        for (int x = 0; x < n_ages; ++x) {
            kappa(x) = rng.normal();
        }
        kappa.array() -= kappa.mean();
    } while (kappa.norm() < 1e-3);
    kappa.normalize();
    if (kappa(n_ages - 1) < 0.0) {
        kappa = -kappa;
    }

    const double sign = rng.coin() ? 1.0 : -1.0;
    Eigen::VectorXd alpha1(n_years);
    Eigen::VectorXd alpha2(n_years);
    for (int t = 0; t < n_years; ++t) {
        alpha1(t) = rng.uniform(-1.0, 1.0);
        alpha2(t) = sign * rng.uniform(0.1, 1.0);
    }
    return {alpha1, alpha2, kappa, t_min - 1, AgeRange(x_min, x_min + n_ages - 1),
            YearRange(t_min, t_min + n_years - 1)};
}

/// L-difference surface holding exactly the model values of `params` (base survival is
/// a plausible curve; it only matters for inversion).
inline LDiffSurface surface_from(const SlParams &params, const Eigen::MatrixXd &values) {
    const auto n = params.kappa.size();
    Eigen::VectorXd base(n);
    double s = 1.0;
    for (Eigen::Index x = 0; x < n; ++x) {
        s *= 1.0 - 0.01 * std::exp(0.08 * static_cast<double>(x));
        base(x) = s;
    }
    return {params.t0, base, params.ages, params.years, values};
}

inline LDiffSurface exact_surface(const SlParams &params) {
    return surface_from(params, params.fitted());
}

} // namespace slmort::testing
