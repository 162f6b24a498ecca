#pragma once

#include "slmort/evaluation.hpp"
#include "slmort/lifetable.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slmort {

// ---------------------------------------------------------------------------------------------
// Human Mortality Database period 1x1 tables
// ---------------------------------------------------------------------------------------------

enum class HmdColumn { female, male, total };

/// Accepts f/female, m/male, t/total (case-insensitive).
[[nodiscard]] HmdColumn parse_hmd_column(std::string_view name);
[[nodiscard]] std::string_view to_string(HmdColumn column) noexcept;

/// One data row of an HMD table. Missing values (".") are empty optionals.
struct HmdRecord {
    int year;
    int age;        // lower bound (110) for the open age group
    bool open_age;  // true for the "110+" row
    std::array<std::optional<double>, 3> values; // female, male, total
    int line;       // 1-based line number in the source

    [[nodiscard]] const std::optional<double> &value(HmdColumn column) const {
        return values[static_cast<std::size_t>(column)];
    }
};

/// Reads every data row: a title line, blank line(s), the header
/// "Year Age Female Male Total", then five whitespace-separated fields per row.
[[nodiscard]] std::vector<HmdRecord> read_hmd_records(std::istream &in);

/// Dense surface of one column over the requested window. Rows outside the window are
/// ignored; a missing value, open-age row or duplicate inside it is an error.
[[nodiscard]] MortalitySurface parse_hmd(std::istream &in, HmdColumn column, Quantity kind,
                                         const AgeRange &ages, const YearRange &years);

[[nodiscard]] MortalitySurface read_hmd_file(const std::filesystem::path &path, HmdColumn column,
                                             Quantity kind, const AgeRange &ages,
                                             const YearRange &years);

/// Writes the surface as an HMD 1x1 table with the same value in all three sex columns.
void write_hmd(std::ostream &out, const MortalitySurface &surface, std::string_view title);

/// Central death rates D / E.
[[nodiscard]] MortalitySurface estimate_m(const MortalitySurface &deaths,
                                          const MortalitySurface &exposures);

// ---------------------------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------------------------

/// Which model family the noise-free surface lies on exactly.
enum class Manifold { gompertz, lc, cbd, sl };

[[nodiscard]] Manifold parse_manifold(std::string_view name);
[[nodiscard]] std::string_view to_string(Manifold manifold) noexcept;

struct SynthConfig {
    double gompertz_a = 0.008; // central rate at ages.min() in the first year
    double gompertz_b = 0.095; // log-rate slope per year of age
    double improvement = -0.015; // log-rate drift per calendar year
    AgeRange ages{60, 94};
    YearRange years{1959, 2009};
    double noise_sd = 0.0;     // sd of multiplicative log-normal noise on m
    std::uint64_t seed = 1;
    Manifold manifold = Manifold::gompertz;

    void validate() const;
};

/// Central-rate surface for the configured manifold; deterministic for a given seed.
///
/// gompertz: log m = log a + b (x - x_min) + improvement (t - t_min)
/// lc:       as gompertz but the time trend is weighted by a declining age profile (rank one)
/// cbd:      logit q linear in age with drifting intercept and slope
/// sl:       L-differences against year t_min equal alpha1_t + alpha2_t kappa_x, both linear in t
[[nodiscard]] MortalitySurface generate_synthetic(const SynthConfig &config);

// ---------------------------------------------------------------------------------------------
// CSV artifacts (UTF-8, LF line endings, doubles with 17 significant digits)
// ---------------------------------------------------------------------------------------------

[[nodiscard]] std::string format_double(double value);

/// Writes "# <line>" for every entry.
void write_comment_header(std::ostream &out, std::span<const std::string> lines);

struct SurfaceCell {
    int age;
    int year;
    double value;
};

/// Builds a dense surface from cells given in any order; every grid cell exactly once.
[[nodiscard]] MortalitySurface surface_from_cells(Quantity kind, std::span<const SurfaceCell> cells);

/// "age,year,value" rows sorted by age then year.
void export_csv(std::ostream &out, const MortalitySurface &surface);

/// Inverse of export_csv; lines starting with '#' are skipped.
[[nodiscard]] MortalitySurface import_csv(std::istream &in, Quantity kind);

/// "country,sex,model,period,mse,mse_star,mape", a fit and a forecast row per model.
void export_csv(std::ostream &out, const BacktestReport &report);

/// "model,age,year,observed,projected" improvement-rate rows per model.
void export_mi_csv(std::ostream &out, const BacktestReport &report);

} // namespace slmort
