#pragma once

#include "slmort/lifetable.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>

namespace slmort {

/// L(s) = log(-log s) for s in (0, 1); strictly decreasing.
[[nodiscard]] double l_transform(double s);

/// Inverse of l_transform: exp(-exp(y)).
[[nodiscard]] double l_inverse(double y);

[[nodiscard]] double logit(double p);
[[nodiscard]] double logistic(double y) noexcept;

/// Survival values this close to 1 are rejected when building L differences.
inline constexpr double survival_one_tolerance = 1e-15;

/// L(S_t(x)) - L(S_t0(x)) over an age window and a set of years after t0.
///
/// The reference year t0 is not part of the matrix; its survival curve is kept so the
/// surface can be inverted back to survival functions.
struct LDiffSurface {
    int t0;
    Eigen::VectorXd base_survival;
    AgeRange ages;
    YearRange years;
    Eigen::MatrixXd values;
};

/// Builds the L-difference surface for `fit_years` against reference year `t0`.
/// `t0` defaults to fit_years.min() - 1 and must precede every fit year.
[[nodiscard]] LDiffSurface build_l_diff(const SurvivalSurface &survival, const YearRange &fit_years,
                                        std::optional<int> t0 = std::nullopt);

/// S_t(x) = exp(-exp(L(S_t0(x)) + delta_x)).
[[nodiscard]] Eigen::VectorXd invert_l_diff(std::span<const double> delta,
                                            std::span<const double> base_survival);

/// Column-wise invert_l_diff of a whole delta matrix (ages x years).
[[nodiscard]] Eigen::MatrixXd invert_l_diff(const Eigen::MatrixXd &delta,
                                            const Eigen::VectorXd &base_survival);

} // namespace slmort
