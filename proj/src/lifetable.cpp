#include "slmort/lifetable.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace slmort {

AgeRange::AgeRange(int x_min, int x_max) : min_{x_min}, max_{x_max} {
    if (x_min < 0 || x_max < 0) {
        throw std::invalid_argument("ages must be nonnegative");
    }
    if (x_min > x_max) {
        throw std::invalid_argument("age range is empty: x_min " + std::to_string(x_min) +
                                    " > x_max " + std::to_string(x_max));
    }
}

YearRange::YearRange(int t_min, int t_max) : min_{t_min}, max_{t_max} {
    if (t_min > t_max) {
        throw std::invalid_argument("year range is empty: t_min " + std::to_string(t_min) +
                                    " > t_max " + std::to_string(t_max));
    }
}

std::string_view to_string(Quantity kind) noexcept {
    switch (kind) {
    case Quantity::deaths:
        return "deaths";
    case Quantity::exposures:
        return "exposures";
    case Quantity::central_rate:
        return "central_rate";
    case Quantity::death_prob:
        return "death_prob";
    }
    return "unknown";
}

namespace {

Cell cell_of(const AgeRange &ages, const YearRange &years, Eigen::Index i, Eigen::Index j) {
    return {ages.min() + static_cast<int>(i), years.min() + static_cast<int>(j)};
}

} // namespace

MortalitySurface::MortalitySurface(AgeRange ages, YearRange years, Quantity kind,
                                   Eigen::MatrixXd values)
    : ages_{ages}, years_{years}, kind_{kind}, values_{std::move(values)} {
    if (values_.rows() != ages_.size() || values_.cols() != years_.size()) {
        throw std::invalid_argument("surface matrix is " + std::to_string(values_.rows()) + "x" +
                                    std::to_string(values_.cols()) + ", expected " +
                                    std::to_string(ages_.size()) + "x" +
                                    std::to_string(years_.size()));
    }
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            const double v = values_(i, j);
            if (!std::isfinite(v)) {
                throw DomainError("non-finite " + std::string(to_string(kind_)) + " value",
                                  cell_of(ages_, years_, i, j));
            }
            if (v < 0.0) {
                throw DomainError("negative " + std::string(to_string(kind_)) + " value",
                                  cell_of(ages_, years_, i, j));
            }
            if (kind_ == Quantity::death_prob && v > 1.0) {
                throw DomainError("death probability above 1", cell_of(ages_, years_, i, j));
            }
        }
    }
}

double MortalitySurface::at(int age, int year) const {
    if (!ages_.contains(age) || !years_.contains(year)) {
        throw std::out_of_range("cell (" + std::to_string(age) + ", " + std::to_string(year) +
                                ") outside surface");
    }
    return values_(ages_.index(age), years_.index(year));
}

MortalitySurface MortalitySurface::window(const AgeRange &ages, const YearRange &years) const {
    if (!ages_.contains(ages) || !years_.contains(years)) {
        throw std::out_of_range("requested window is not covered by the surface");
    }
    return {ages, years, kind_,
            values_.block(ages_.index(ages.min()), years_.index(years.min()), ages.size(),
                          years.size())};
}

SurvivalSurface::SurvivalSurface(AgeRange ages, YearRange years, Eigen::MatrixXd values)
    : ages_{ages}, years_{years}, values_{std::move(values)} {
    if (values_.rows() != ages_.size() || values_.cols() != years_.size()) {
        throw std::invalid_argument("survival matrix dimensions do not match its ranges");
    }
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            const double s = values_(i, j);
            if (!(s > 0.0 && s <= 1.0)) {
                throw DomainError("survival probability outside (0, 1]",
                                  cell_of(ages_, years_, i, j));
            }
            if (i > 0 && s > values_(i - 1, j)) {
                throw DomainError("survival function increases with age",
                                  cell_of(ages_, years_, i, j));
            }
        }
    }
}

double SurvivalSurface::at(int age, int year) const {
    if (!ages_.contains(age) || !years_.contains(year)) {
        throw std::out_of_range("cell outside survival surface");
    }
    return values_(ages_.index(age), years_.index(year));
}

Eigen::VectorXd SurvivalSurface::curve(int year) const {
    if (!years_.contains(year)) {
        throw std::out_of_range("year " + std::to_string(year) + " outside survival surface");
    }
    return values_.col(years_.index(year));
}

double central_rate_to_q(double m) {
    if (!std::isfinite(m) || m < 0.0) {
        throw DomainError("central death rate must be finite and nonnegative, got " +
                          std::to_string(m));
    }
    return -std::expm1(-m);
}

double q_to_central_rate(double q) {
    if (!(q >= 0.0 && q < 1.0)) {
        throw DomainError("death probability must lie in [0, 1), got " + std::to_string(q));
    }
    return -std::log1p(-q);
}

namespace {

void check_q(double q, std::size_t i) {
    if (!(q >= 0.0 && q < 1.0)) {
        throw DomainError("death probability at offset " + std::to_string(i) +
                          " must lie in [0, 1), got " + std::to_string(q));
    }
}

} // namespace

Eigen::VectorXd q_to_survival(std::span<const double> q) {
    if (q.empty()) {
        throw std::invalid_argument("q_to_survival: empty column");
    }
    Eigen::VectorXd s(static_cast<Eigen::Index>(q.size()));
    double running = 1.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        check_q(q[i], i);
        running *= 1.0 - q[i];
        s(static_cast<Eigen::Index>(i)) = running;
    }
    return s;
}

Eigen::VectorXd survival_to_q(std::span<const double> survival) {
    if (survival.empty()) {
        throw std::invalid_argument("survival_to_q: empty column");
    }
    Eigen::VectorXd q(static_cast<Eigen::Index>(survival.size()));
    double previous = 1.0;
    for (std::size_t i = 0; i < survival.size(); ++i) {
        const double s = survival[i];
        if (!(s > 0.0)) {
            throw DomainError("survival probability at offset " + std::to_string(i) +
                              " must be positive");
        }
        if (s > previous) {
            throw DomainError(i == 0 ? std::string("survival at the base age exceeds 1")
                                     : "survival increases at offset " + std::to_string(i));
        }
        q(static_cast<Eigen::Index>(i)) = 1.0 - s / previous;
        previous = s;
    }
    return q;
}

Eigen::VectorXd curve_of_deaths(std::span<const double> q) {
    if (q.empty()) {
        throw std::invalid_argument("curve_of_deaths: empty column");
    }
    Eigen::VectorXd r(static_cast<Eigen::Index>(q.size()));
    double alive = 1.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        check_q(q[i], i);
        r(static_cast<Eigen::Index>(i)) = alive * q[i];
        alive *= 1.0 - q[i];
    }
    return r;
}

MortalitySurface surface_m_to_q(const MortalitySurface &m) {
    if (m.kind() != Quantity::central_rate) {
        throw std::invalid_argument("surface_m_to_q expects a central_rate surface");
    }
    Eigen::MatrixXd q(m.values().rows(), m.values().cols());
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            q(i, j) = central_rate_to_q(m.values()(i, j));
        }
    }
    return {m.ages(), m.years(), Quantity::death_prob, std::move(q)};
}

MortalitySurface surface_q_to_m(const MortalitySurface &q) {
    if (q.kind() != Quantity::death_prob) {
        throw std::invalid_argument("surface_q_to_m expects a death_prob surface");
    }
    Eigen::MatrixXd m(q.values().rows(), q.values().cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double v = q.values()(i, j);
            if (v >= 1.0) {
                throw DomainError("death probability of 1 has no central rate",
                                  cell_of(q.ages(), q.years(), i, j));
            }
            m(i, j) = q_to_central_rate(v);
        }
    }
    return {q.ages(), q.years(), Quantity::central_rate, std::move(m)};
}

SurvivalSurface surface_q_to_survival(const MortalitySurface &q) {
    if (q.kind() != Quantity::death_prob) {
        throw std::invalid_argument("surface_q_to_survival expects a death_prob surface");
    }
    const auto &values = q.values();
    Eigen::MatrixXd s(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        double running = 1.0;
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            const double v = values(i, j);
            if (v >= 1.0) {
                throw DomainError("death probability of 1 sends survival to zero",
                                  cell_of(q.ages(), q.years(), i, j));
            }
            running *= 1.0 - v;
            s(i, j) = running;
        }
    }
    return {q.ages(), q.years(), std::move(s)};
}

MortalitySurface surface_survival_to_q(const SurvivalSurface &survival) {
    const auto &values = survival.values();
    Eigen::MatrixXd q(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const Eigen::VectorXd column = values.col(j);
        q.col(j) = survival_to_q(as_span(column));
    }
    return {survival.ages(), survival.years(), Quantity::death_prob, std::move(q)};
}

} // namespace slmort
