#pragma once

#include "slmort/error.hpp"

#include <Eigen/Dense>

#include <span>
#include <string_view>

namespace slmort {

/// Inclusive integer age window [x_min, x_max].
class AgeRange {
public:
    AgeRange(int x_min, int x_max);

    [[nodiscard]] int min() const noexcept { return min_; }
    [[nodiscard]] int max() const noexcept { return max_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return max_ - min_ + 1; }
    [[nodiscard]] bool contains(int age) const noexcept { return age >= min_ && age <= max_; }
    [[nodiscard]] bool contains(const AgeRange &other) const noexcept {
        return other.min_ >= min_ && other.max_ <= max_;
    }
    [[nodiscard]] Eigen::Index index(int age) const noexcept { return age - min_; }
    [[nodiscard]] double mean() const noexcept { return 0.5 * (min_ + max_); }

    bool operator==(const AgeRange &) const = default;

private:
    int min_;
    int max_;
};

/// Inclusive calendar-year window [t_min, t_max].
class YearRange {
public:
    YearRange(int t_min, int t_max);

    [[nodiscard]] int min() const noexcept { return min_; }
    [[nodiscard]] int max() const noexcept { return max_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return max_ - min_ + 1; }
    [[nodiscard]] bool contains(int year) const noexcept { return year >= min_ && year <= max_; }
    [[nodiscard]] bool contains(const YearRange &other) const noexcept {
        return other.min_ >= min_ && other.max_ <= max_;
    }
    [[nodiscard]] Eigen::Index index(int year) const noexcept { return year - min_; }

    bool operator==(const YearRange &) const = default;

private:
    int min_;
    int max_;
};

enum class Quantity { deaths, exposures, central_rate, death_prob };

[[nodiscard]] std::string_view to_string(Quantity kind) noexcept;

/// Dense ages x years grid of one mortality quantity, validated on construction.
class MortalitySurface {
public:
    MortalitySurface(AgeRange ages, YearRange years, Quantity kind, Eigen::MatrixXd values);

    [[nodiscard]] const AgeRange &ages() const noexcept { return ages_; }
    [[nodiscard]] const YearRange &years() const noexcept { return years_; }
    [[nodiscard]] Quantity kind() const noexcept { return kind_; }
    [[nodiscard]] const Eigen::MatrixXd &values() const noexcept { return values_; }

    /// Value at (age, year); throws std::out_of_range outside the grid.
    [[nodiscard]] double at(int age, int year) const;

    /// Sub-window copy; both windows must lie inside this surface.
    [[nodiscard]] MortalitySurface window(const AgeRange &ages, const YearRange &years) const;

private:
    AgeRange ages_;
    YearRange years_;
    Quantity kind_;
    Eigen::MatrixXd values_;
};

/// Per-year survival curves S_t(x) anchored at base age x0 = ages.min().
class SurvivalSurface {
public:
    SurvivalSurface(AgeRange ages, YearRange years, Eigen::MatrixXd values);

    [[nodiscard]] int base_age() const noexcept { return ages_.min(); }
    [[nodiscard]] const AgeRange &ages() const noexcept { return ages_; }
    [[nodiscard]] const YearRange &years() const noexcept { return years_; }
    [[nodiscard]] const Eigen::MatrixXd &values() const noexcept { return values_; }

    [[nodiscard]] double at(int age, int year) const;
    [[nodiscard]] Eigen::VectorXd curve(int year) const;

private:
    AgeRange ages_;
    YearRange years_;
    Eigen::MatrixXd values_;
};

// Scalar conversions under a force of mortality that is constant on each unit age-year band.

[[nodiscard]] double central_rate_to_q(double m);
[[nodiscard]] double q_to_central_rate(double q);

// Column conversions between one-year death probabilities q_x, the survival function
// S(x) = prod_{i=x0}^{x} (1 - q_i) and the curve of deaths r_x = S(x-1) q_x.

[[nodiscard]] Eigen::VectorXd q_to_survival(std::span<const double> q);
[[nodiscard]] Eigen::VectorXd survival_to_q(std::span<const double> survival);
[[nodiscard]] Eigen::VectorXd curve_of_deaths(std::span<const double> q);

/// Converts a central-rate surface to death probabilities cell by cell.
[[nodiscard]] MortalitySurface surface_m_to_q(const MortalitySurface &m);

/// Converts a death-probability surface to central rates cell by cell.
[[nodiscard]] MortalitySurface surface_q_to_m(const MortalitySurface &q);

/// Column-wise q_to_survival; errors name the offending (age, year).
[[nodiscard]] SurvivalSurface surface_q_to_survival(const MortalitySurface &q);

/// Column-wise survival_to_q back to a death-probability surface.
[[nodiscard]] MortalitySurface surface_survival_to_q(const SurvivalSurface &survival);

/// View of an Eigen vector as a span.
[[nodiscard]] inline std::span<const double> as_span(const Eigen::VectorXd &v) noexcept {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

} // namespace slmort
