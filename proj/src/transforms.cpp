#include "slmort/transforms.hpp"

#include <cmath>
#include <string>

namespace slmort {

double l_transform(double s) {
    if (!(s > 0.0 && s < 1.0)) {
        throw DomainError("L transform needs 0 < s < 1, got " + std::to_string(s));
    }
    return std::log(-std::log(s));
}

double l_inverse(double y) {
    if (!std::isfinite(y)) {
        throw DomainError("L inverse needs a finite argument");
    }
    return std::exp(-std::exp(y));
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("logit needs 0 < p < 1, got " + std::to_string(p));
    }
    return std::log(p / (1.0 - p));
}

double logistic(double y) noexcept {
    if (y >= 0.0) {
        return 1.0 / (1.0 + std::exp(-y));
    }
    const double e = std::exp(y);
    return e / (1.0 + e);
}

namespace {

double l_of_cell(const SurvivalSurface &survival, int age, int year) {
    const double s = survival.at(age, year);
    if (s >= 1.0 - survival_one_tolerance) {
        throw DomainError("survival probability equals 1 (no deaths up to this age); "
                          "L transform undefined",
                          {age, year});
    }
    return std::log(-std::log(s));
}

} // namespace

LDiffSurface build_l_diff(const SurvivalSurface &survival, const YearRange &fit_years,
                          std::optional<int> t0) {
    const int reference = t0.value_or(fit_years.min() - 1);
    if (reference >= fit_years.min()) {
        throw std::invalid_argument("reference year " + std::to_string(reference) +
                                    " must precede the first fit year " +
                                    std::to_string(fit_years.min()));
    }
    if (!survival.years().contains(reference) || !survival.years().contains(fit_years)) {
        throw std::invalid_argument("survival surface does not cover the reference and fit years");
    }

    const AgeRange &ages = survival.ages();
    Eigen::VectorXd base_l(ages.size());
    for (int age = ages.min(); age <= ages.max(); ++age) {
        base_l(ages.index(age)) = l_of_cell(survival, age, reference);
    }

    Eigen::MatrixXd values(ages.size(), fit_years.size());
    for (int year = fit_years.min(); year <= fit_years.max(); ++year) {
        for (int age = ages.min(); age <= ages.max(); ++age) {
            values(ages.index(age), fit_years.index(year)) =
                l_of_cell(survival, age, year) - base_l(ages.index(age));
        }
    }
    return {reference, survival.curve(reference), ages, fit_years, std::move(values)};
}

Eigen::VectorXd invert_l_diff(std::span<const double> delta,
                              std::span<const double> base_survival) {
    if (delta.size() != base_survival.size()) {
        throw std::invalid_argument("delta and base survival lengths differ");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(delta.size()));
    for (std::size_t i = 0; i < delta.size(); ++i) {
        if (!std::isfinite(delta[i])) {
            throw DomainError("non-finite L difference at offset " + std::to_string(i));
        }
        out(static_cast<Eigen::Index>(i)) = l_inverse(l_transform(base_survival[i]) + delta[i]);
    }
    return out;
}

Eigen::MatrixXd invert_l_diff(const Eigen::MatrixXd &delta, const Eigen::VectorXd &base_survival) {
    if (delta.rows() != base_survival.size()) {
        throw std::invalid_argument("delta rows and base survival length differ");
    }
    Eigen::MatrixXd out(delta.rows(), delta.cols());
    for (Eigen::Index j = 0; j < delta.cols(); ++j) {
        const Eigen::VectorXd column = delta.col(j);
        out.col(j) = invert_l_diff(as_span(column), as_span(base_survival));
    }
    return out;
}

} // namespace slmort
