#include "support.hpp"

#include "slmort/benchmark_models.hpp"

#include <doctest.h>

#include <cmath>

using namespace slmort;
using slmort::testing::Rng;

namespace {

/// log m = a_x + b_x c_t with sum(b) = 1 and sum(c) = 0.
struct RankOne {
    Eigen::VectorXd a, b, c;
    MortalitySurface rates;
};

RankOne rank_one(Rng &rng, int n_ages, int n_years) {
    Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(n_ages, -5.0, -2.0) + rng.uniform_vector(n_ages, -0.1, 0.1);
    Eigen::VectorXd b = rng.uniform_vector(n_ages, -0.2, 1.0);
    b /= b.sum();
    Eigen::VectorXd c = rng.uniform_vector(n_years, -3.0, 3.0);
    c.array() -= c.mean();
    const Eigen::MatrixXd log_m = a.replicate(1, n_years) + b * c.transpose();
    MortalitySurface rates(AgeRange(60, 60 + n_ages - 1), YearRange(1960, 1960 + n_years - 1),
                           Quantity::central_rate, log_m.array().exp().matrix());
    return {a, b, c, std::move(rates)};
}

CbdParams cbd_params(Eigen::VectorXd k1, Eigen::VectorXd k2) {
    const auto n = static_cast<int>(k1.size());
    return {std::move(k1), std::move(k2), 61.0, AgeRange(60, 62), YearRange(1960, 1960 + n - 1)};
}

} // namespace

TEST_SUITE("benchmark_models") {

TEST_CASE("fit_lc recovers rank-one log rates") {
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const auto fixture = rank_one(rng, rng.integer(3, 30), rng.integer(3, 30));
        const auto p = fit_lc(fixture.rates);
        CHECK(testing::max_abs(p.alpha, fixture.a) <= 1e-10);
        CHECK(testing::max_abs(p.beta, fixture.b) <= 1e-10);
        CHECK(testing::max_abs(p.kappa, fixture.c) <= 1e-10);
        CHECK(std::abs(p.beta.sum() - 1.0) <= 1e-10);
        CHECK(std::abs(p.kappa.sum()) <= 1e-10);
    }
}

TEST_CASE("fit_lc on rates constant over time") {
    Eigen::MatrixXd m(3, 4);
    for (int t = 0; t < 4; ++t) {
        m.col(t) << 0.01, 0.02, 0.05;
    }
    const auto p = fit_lc(MortalitySurface(AgeRange(70, 72), YearRange(2000, 2003), Quantity::central_rate, m));
    CHECK(p.kappa.isZero());
    CHECK(p.beta == Eigen::VectorXd::Constant(3, 1.0 / 3.0));
    CHECK(testing::max_abs(p.alpha, Eigen::Vector3d(std::log(0.01), std::log(0.02), std::log(0.05))) <= 1e-15);
}

TEST_CASE("fit_lc validates its input") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(2, 3, 0.01);
    m(1, 2) = 0.0;
    try {
        (void)fit_lc(MortalitySurface(AgeRange(60, 61), YearRange(1990, 1992), Quantity::central_rate, m));
        FAIL("expected a domain error");
    } catch (const DomainError &e) {
        CHECK(e.cell()->age == 61);
        CHECK(e.cell()->year == 1992);
    }
    CHECK_THROWS_AS((void)fit_lc(MortalitySurface(AgeRange(60, 61), YearRange(1990, 1992),
                                                  Quantity::death_prob,
                                                  Eigen::MatrixXd::Constant(2, 3, 0.01))),
                    std::invalid_argument);
}

TEST_CASE("fit_lc is locally optimal among nearby rank-one fits") {
    Rng rng(22);
    auto fixture = rank_one(rng, 12, 15);
    Eigen::MatrixXd m = fixture.rates.values();
    m.array() *= (rng.normal_matrix(12, 15, 0.05).array()).exp();
    const MortalitySurface noisy(fixture.rates.ages(), fixture.rates.years(), Quantity::central_rate, m);
    const auto p = fit_lc(noisy);
    const Eigen::MatrixXd log_m = m.array().log();
    const double best = (log_m - p.fitted_log_m()).squaredNorm();
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd db = rng.normal_matrix(12, 1, 1.0);
        Eigen::VectorXd dk = rng.normal_matrix(15, 1, 1.0);
        const double scale = 1e-3 / std::sqrt(db.squaredNorm() + dk.squaredNorm());
        LcParams perturbed = p;
        perturbed.beta += scale * db;
        perturbed.kappa += scale * dk;
        CHECK((log_m - perturbed.fitted_log_m()).squaredNorm() >= best);
    }
}

TEST_CASE("lc_forecast") {
    LcParams p{Eigen::Vector2d(-4, -3), Eigen::Vector2d(0.4, 0.6), Eigen::Vector3d(1.0, 0.0, -1.0),
               AgeRange(60, 61), YearRange(1960, 1962)};

    SUBCASE("no drift and no noise repeats the last fitted year") {
        const RwdParams still{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1),
                              Eigen::VectorXd::Constant(1, -1.0), 1962};
        const auto q = lc_forecast(p, still, 3).front();
        for (int h = 0; h < 3; ++h) {
            CHECK(testing::max_abs(q.col(h), p.fitted_q().col(2)) <= 1e-16);
        }
    }
    SUBCASE("zero beta keeps that age flat") {
        LcParams flat = p;
        flat.beta << 0.0, 1.0;
        const RwdParams moving{Eigen::VectorXd::Constant(1, -0.5), Eigen::MatrixXd::Zero(1, 1),
                               Eigen::VectorXd::Constant(1, -1.0), 1962};
        const auto q = lc_forecast(flat, moving, 4).front();
        for (int h = 0; h < 4; ++h) {
            CHECK(q(0, h) == central_rate_to_q(std::exp(-4.0)));
        }
        CHECK(q(1, 3) < q(1, 0));
    }
    SUBCASE("2 ages x 1 step hand case") {
        const RwdParams step{Eigen::VectorXd::Constant(1, -0.5), Eigen::MatrixXd::Zero(1, 1),
                             Eigen::VectorXd::Constant(1, -1.0), 1962};
        const auto q = lc_forecast(p, step, 1).front();
        // 1 - exp(-exp(alpha + beta * (-1.5))) at 30 digits.
        CHECK(std::abs(q(0, 0) - 0.0100014848911072312736565174954) <= 1e-16);
        CHECK(std::abs(q(1, 0) - 0.020038419292616882323487149748) <= 1e-16);
    }
    SUBCASE("sampled paths are seed reproducible") {
        const RwdParams noisy{Eigen::VectorXd::Constant(1, -0.5), Eigen::MatrixXd::Constant(1, 1, 0.3),
                              Eigen::VectorXd::Constant(1, -1.0), 1962};
        const auto a = lc_forecast(p, noisy, 3, SampledForecast{9, 4});
        const auto b = lc_forecast(p, noisy, 3, SampledForecast{9, 4});
        CHECK(a.size() == 4);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == b[i]);
        }
    }
}

TEST_CASE("fit_cbd") {
    SUBCASE("logit-affine probabilities are recovered exactly") {
        Eigen::MatrixXd q(5, 3);
        for (int t = 0; t < 3; ++t) {
            for (int x = 0; x < 5; ++x) {
                q(x, t) = logistic(-3.0 - 0.05 * t + (0.1 + 0.002 * t) * (x - 2));
            }
        }
        const auto p = fit_cbd(MortalitySurface(AgeRange(70, 74), YearRange(2000, 2002), Quantity::death_prob, q));
        CHECK(p.x_bar == 72.0);
        for (int t = 0; t < 3; ++t) {
            CHECK(std::abs(p.kappa1(t) - (-3.0 - 0.05 * t)) <= 1e-14);
            CHECK(std::abs(p.kappa2(t) - (0.1 + 0.002 * t)) <= 1e-14);
        }
        CHECK(testing::max_abs(p.fitted_q(), q) <= 1e-16);
    }
    SUBCASE("two ages are interpolated") {
        Eigen::MatrixXd q(2, 2);
        q << 0.01, 0.03, 0.2, 0.04;
        const auto p = fit_cbd(MortalitySurface(AgeRange(80, 81), YearRange(2000, 2001), Quantity::death_prob, q));
        CHECK(testing::max_abs(p.fitted_q(), q) <= 1e-16);
    }
    SUBCASE("3-age hand case") {
        const MortalitySurface q(AgeRange(60, 62), YearRange(2000, 2000), Quantity::death_prob,
                                 Eigen::Vector3d(0.01, 0.02, 0.05));
        const auto p = fit_cbd(q);
        // Mean and half-range of logit q, 30-digit evaluation.
        CHECK(std::abs(p.kappa1(0) - -3.81045970913721899902405565686) <= 1e-12);
        CHECK(std::abs(p.kappa2(0) - 0.825340435484074733421703309961) <= 1e-12);
    }
    SUBCASE("boundary probabilities name the cell") {
        Eigen::MatrixXd q = Eigen::MatrixXd::Constant(3, 2, 0.1);
        q(2, 0) = 0.0;
        try {
            (void)fit_cbd(MortalitySurface(AgeRange(60, 62), YearRange(2000, 2001), Quantity::death_prob, q));
            FAIL("expected a domain error");
        } catch (const DomainError &e) {
            CHECK(e.cell()->age == 62);
            CHECK(e.cell()->year == 2000);
        }
    }
}

TEST_CASE("cbd_forecast") {
    const auto p = cbd_params(Eigen::Vector3d(-3.2, -3.1, -3.0), Eigen::Vector3d(0.1, 0.1, 0.1));

    SUBCASE("no drift and no noise repeats the last fitted year") {
        const RwdParams still{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero(), Eigen::Vector2d(-3.0, 0.1), 1962};
        const auto q = cbd_forecast(p, still, 2).front();
        CHECK(testing::max_abs(q.col(1), p.fitted_q().col(2)) <= 1e-16);
    }
    SUBCASE("zero slope gives age-flat forecasts") {
        const RwdParams flat{Eigen::Vector2d(-0.05, 0.0), Eigen::Matrix2d::Zero(), Eigen::Vector2d(-3.0, 0.0), 1962};
        const auto q = cbd_forecast(p, flat, 3).front();
        for (int h = 0; h < 3; ++h) {
            CHECK(q(0, h) == q(1, h));
            CHECK(q(1, h) == q(2, h));
        }
    }
    SUBCASE("one-step hand case") {
        const RwdParams step{Eigen::Vector2d(0.0, 0.0), Eigen::Matrix2d::Zero(), Eigen::Vector2d(-3.0, 0.1), 1962};
        const auto q = cbd_forecast(p, step, 1).front();
        // logistic(-3 + 0.1 (x - 61)) at 30 digits.
        CHECK(std::abs(q(0, 0) - 0.0431072549410861225537712436711) <= 1e-16);
        CHECK(std::abs(q(1, 0) - 0.0474258731775667808788481517718) <= 1e-16);
        CHECK(std::abs(q(2, 0) - 0.0521535630784177347799553249889) <= 1e-16);
    }
    SUBCASE("dimension check") {
        const RwdParams one{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), 1962};
        CHECK_THROWS_AS((void)cbd_forecast(p, one, 1), std::invalid_argument);
    }
}

} // TEST_SUITE
