#include "slmort/ingest.hpp"

#include "slmort/transforms.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace slmort {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split_whitespace(const std::string &line) {
    std::vector<std::string> tokens;
    std::istringstream stream(line);
    std::string token;
    while (stream >> token) {
        tokens.push_back(std::move(token));
    }
    return tokens;
}

std::vector<std::string> split_commas(const std::string &line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

template <typename T>
std::optional<T> parse_number(std::string_view token) {
    T value{};
    const char *end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return value;
}

bool is_blank(const std::string &line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

void strip_cr(std::string &line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

[[noreturn]] void fail_line(int line, const std::string &message) {
    throw DataError("line " + std::to_string(line) + ": " + message);
}

void check_stream(const std::ostream &out) {
    if (!out) {
        throw std::runtime_error("failed writing output stream");
    }
}

} // namespace

HmdColumn parse_hmd_column(std::string_view name) {
    const auto lower = lowercase(name);
    if (lower == "f" || lower == "female") {
        return HmdColumn::female;
    }
    if (lower == "m" || lower == "male") {
        return HmdColumn::male;
    }
    if (lower == "t" || lower == "total") {
        return HmdColumn::total;
    }
    throw std::invalid_argument("unknown sex column '" + std::string(name) +
                                "' (expected f, m or total)");
}

std::string_view to_string(HmdColumn column) noexcept {
    switch (column) {
    case HmdColumn::female:
        return "female";
    case HmdColumn::male:
        return "male";
    case HmdColumn::total:
        return "total";
    }
    return "?";
}

std::vector<HmdRecord> read_hmd_records(std::istream &in) {
    static const std::vector<std::string> expected_header{"Year", "Age", "Female", "Male", "Total"};

    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) {
        throw DataError("HMD table is empty");
    }
    ++line_no;
    strip_cr(line);
    if (split_whitespace(line) == expected_header) {
        fail_line(line_no, "missing title line before the header");
    }

    bool saw_blank = false;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_blank(line)) {
            saw_blank = true;
            continue;
        }
        if (!saw_blank) {
            fail_line(line_no, "expected a blank line after the title");
        }
        if (split_whitespace(line) != expected_header) {
            fail_line(line_no, "expected header 'Year Age Female Male Total'");
        }
        saw_header = true;
        break;
    }
    if (!saw_header) {
        throw DataError("HMD table has no header line");
    }

    std::vector<HmdRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_blank(line)) {
            continue;
        }
        const auto tokens = split_whitespace(line);
        if (tokens.size() != 5) {
            fail_line(line_no, "expected 5 fields, found " + std::to_string(tokens.size()));
        }
        HmdRecord record{};
        record.line = line_no;

        const auto year = parse_number<int>(tokens[0]);
        if (!year || *year < 1750) {
            fail_line(line_no, "invalid year '" + tokens[0] + "'");
        }
        record.year = *year;

        if (tokens[1] == "110+") {
            record.age = 110;
            record.open_age = true;
        } else {
            const auto age = parse_number<int>(tokens[1]);
            if (!age || *age < 0 || *age > 110) {
                fail_line(line_no, "invalid age '" + tokens[1] + "'");
            }
            record.age = *age;
        }

        for (std::size_t k = 0; k < 3; ++k) {
            const auto &token = tokens[k + 2];
            if (token == ".") {
                continue;
            }
            const auto value = parse_number<double>(token);
            if (!value || !std::isfinite(*value)) {
                fail_line(line_no, "unparseable value '" + token + "'");
            }
            record.values[k] = *value;
        }
        records.push_back(record);
    }
    return records;
}

MortalitySurface parse_hmd(std::istream &in, HmdColumn column, Quantity kind,
                           const AgeRange &ages, const YearRange &years) {
    const auto records = read_hmd_records(in);
    Eigen::MatrixXd values(ages.size(), years.size());
    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(ages.size(), years.size());

    for (const auto &record : records) {
        if (!years.contains(record.year)) {
            continue;
        }
        if (record.open_age) {
            if (ages.max() >= 110) {
                fail_line(record.line, "open age group 110+ falls inside the requested window");
            }
            continue;
        }
        if (!ages.contains(record.age)) {
            continue;
        }
        const auto &value = record.value(column);
        if (!value) {
            fail_line(record.line, "missing value '.' inside the requested window (age " +
                                       std::to_string(record.age) + ", year " +
                                       std::to_string(record.year) + ")");
        }
        auto &count = seen(ages.index(record.age), years.index(record.year));
        if (count++ > 0) {
            fail_line(record.line, "duplicate row for age " + std::to_string(record.age) +
                                       ", year " + std::to_string(record.year));
        }
        values(ages.index(record.age), years.index(record.year)) = *value;
    }

    for (int year = years.min(); year <= years.max(); ++year) {
        for (int age = ages.min(); age <= ages.max(); ++age) {
            if (seen(ages.index(age), years.index(year)) == 0) {
                throw DataError("HMD table does not cover age " + std::to_string(age) +
                                ", year " + std::to_string(year));
            }
        }
    }
    return {ages, years, kind, std::move(values)};
}

MortalitySurface read_hmd_file(const std::filesystem::path &path, HmdColumn column, Quantity kind,
                               const AgeRange &ages, const YearRange &years) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return parse_hmd(in, column, kind, ages, years);
    } catch (const DataError &e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_hmd(std::ostream &out, const MortalitySurface &surface, std::string_view title) {
    out << title << "\n\n";
    out << fmt::format("{:>6}{:>10}{:>26}{:>26}{:>26}\n", "Year", "Age", "Female", "Male",
                       "Total");
    const auto &ages = surface.ages();
    const auto &years = surface.years();
    for (int year = years.min(); year <= years.max(); ++year) {
        for (int age = ages.min(); age <= ages.max(); ++age) {
            const auto v = format_double(surface.at(age, year));
            out << fmt::format("{:>6}{:>10}{:>26}{:>26}{:>26}\n", year, age, v, v, v);
        }
    }
    check_stream(out);
}

MortalitySurface estimate_m(const MortalitySurface &deaths, const MortalitySurface &exposures) {
    if (deaths.kind() != Quantity::deaths || exposures.kind() != Quantity::exposures) {
        throw std::invalid_argument("estimate_m expects a deaths and an exposures surface");
    }
    if (!(deaths.ages() == exposures.ages()) || !(deaths.years() == exposures.years())) {
        throw std::invalid_argument("deaths and exposures cover different grids");
    }
    const auto &d = deaths.values();
    const auto &e = exposures.values();
    Eigen::MatrixXd m(d.rows(), d.cols());
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            if (!(e(i, j) > 0.0)) {
                throw DomainError("exposure must be positive",
                                  {deaths.ages().min() + static_cast<int>(i),
                                   deaths.years().min() + static_cast<int>(j)});
            }
            m(i, j) = d(i, j) / e(i, j);
        }
    }
    return {deaths.ages(), deaths.years(), Quantity::central_rate, std::move(m)};
}

Manifold parse_manifold(std::string_view name) {
    const auto lower = lowercase(name);
    if (lower == "gompertz") {
        return Manifold::gompertz;
    }
    if (lower == "lc") {
        return Manifold::lc;
    }
    if (lower == "cbd") {
        return Manifold::cbd;
    }
    if (lower == "sl" || lower == "ls") {
        return Manifold::sl;
    }
    throw std::invalid_argument("unknown manifold '" + std::string(name) +
                                "' (expected gompertz, lc, cbd or sl)");
}

std::string_view to_string(Manifold manifold) noexcept {
    switch (manifold) {
    case Manifold::gompertz:
        return "gompertz";
    case Manifold::lc:
        return "lc";
    case Manifold::cbd:
        return "cbd";
    case Manifold::sl:
        return "sl";
    }
    return "?";
}

void SynthConfig::validate() const {
    if (!(gompertz_a > 0.0) || !std::isfinite(gompertz_a)) {
        throw std::invalid_argument("gompertz_a must be positive");
    }
    if (!(gompertz_b > 0.0) || !std::isfinite(gompertz_b)) {
        throw std::invalid_argument("gompertz_b must be positive");
    }
    if (!std::isfinite(improvement)) {
        throw std::invalid_argument("improvement must be finite");
    }
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
        throw std::invalid_argument("noise_sd must be nonnegative");
    }
}

namespace {

// Noise-free log(m / a) on each manifold; scaling by a afterwards keeps m = a exactly at the
// origin of the Gompertz grid.
Eigen::MatrixXd manifold_log_m(const SynthConfig &c) {
    const auto n_ages = c.ages.size();
    const auto n_years = c.years.size();
    const double log_a = std::log(c.gompertz_a);
    Eigen::MatrixXd log_m(n_ages, n_years);

    switch (c.manifold) {
    case Manifold::gompertz:
        for (Eigen::Index t = 0; t < n_years; ++t) {
            for (Eigen::Index x = 0; x < n_ages; ++x) {
                log_m(x, t) = c.gompertz_b * static_cast<double>(x) +
                              c.improvement * static_cast<double>(t);
            }
        }
        break;
    case Manifold::lc: {
        // Age weights 2 (n - i) / (n + 1) average to one, so the mean drift is `improvement`.
        const auto n = static_cast<double>(n_ages);
        for (Eigen::Index t = 0; t < n_years; ++t) {
            for (Eigen::Index x = 0; x < n_ages; ++x) {
                const double weight = 2.0 * (n - static_cast<double>(x)) / (n + 1.0);
                log_m(x, t) = c.gompertz_b * static_cast<double>(x) +
                              weight * c.improvement * static_cast<double>(t);
            }
        }
        break;
    }
    case Manifold::cbd: {
        const double x_mid = c.ages.mean() - c.ages.min();
        const double base_q = central_rate_to_q(c.gompertz_a * std::exp(c.gompertz_b * x_mid));
        const double level0 = logit(base_q);
        for (Eigen::Index t = 0; t < n_years; ++t) {
            const double dt = static_cast<double>(t);
            const double level = level0 + c.improvement * dt;
            const double slope = c.gompertz_b * (1.0 - 0.5 * c.improvement * dt);
            for (Eigen::Index x = 0; x < n_ages; ++x) {
                const double q = logistic(level + slope * (static_cast<double>(x) - x_mid));
                log_m(x, t) = std::log(q_to_central_rate(q)) - log_a;
            }
        }
        break;
    }
    case Manifold::sl: {
        Eigen::VectorXd base_q(n_ages);
        for (Eigen::Index x = 0; x < n_ages; ++x) {
            base_q(x) = central_rate_to_q(c.gompertz_a * std::exp(c.gompertz_b * static_cast<double>(x)));
        }
        const Eigen::VectorXd base_survival = q_to_survival(as_span(base_q));

        // Mildly convex age profile, normalised to zero mean and unit length.
        const double mid = 0.5 * static_cast<double>(n_ages - 1);
        Eigen::VectorXd kappa(n_ages);
        for (Eigen::Index x = 0; x < n_ages; ++x) {
            const double u = (static_cast<double>(x) - mid) / std::max(mid, 1.0);
            kappa(x) = u + 0.25 * u * u;
        }
        kappa.array() -= kappa.mean();
        kappa.normalize();

        const double loading = -0.3 * c.improvement * std::sqrt(static_cast<double>(n_ages));
        for (Eigen::Index t = 0; t < n_years; ++t) {
            const double dt = static_cast<double>(t);
            const Eigen::VectorXd delta = c.improvement * dt + loading * dt * kappa.array();
            const auto survival = invert_l_diff(as_span(delta), as_span(base_survival));
            const auto q = survival_to_q(as_span(survival));
            for (Eigen::Index x = 0; x < n_ages; ++x) {
                log_m(x, t) = std::log(q_to_central_rate(q(x))) - log_a;
            }
        }
        break;
    }
    }
    return log_m;
}

} // namespace

MortalitySurface generate_synthetic(const SynthConfig &config) {
    config.validate();
    Eigen::MatrixXd log_m = manifold_log_m(config);

    if (config.noise_sd > 0.0) {
        std::mt19937_64 gen(config.seed);
        std::normal_distribution<double> normal(0.0, config.noise_sd);
        // Column-major fill order fixes the noise assignment for a given seed.
        for (Eigen::Index t = 0; t < log_m.cols(); ++t) {
            for (Eigen::Index x = 0; x < log_m.rows(); ++x) {
                log_m(x, t) += normal(gen);
            }
        }
    }

    Eigen::MatrixXd m = config.gompertz_a * log_m.array().exp();
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
        for (Eigen::Index x = 0; x < m.rows(); ++x) {
            if (!std::isfinite(m(x, t)) || !(m(x, t) > 0.0)) {
                throw std::invalid_argument(
                    "synthetic configuration overflows at age " +
                    std::to_string(config.ages.min() + static_cast<int>(x)) + ", year " +
                    std::to_string(config.years.min() + static_cast<int>(t)));
            }
        }
    }
    return {config.ages, config.years, Quantity::central_rate, std::move(m)};
}

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

void write_comment_header(std::ostream &out, std::span<const std::string> lines) {
    for (const auto &line : lines) {
        out << "# " << line << '\n';
    }
    check_stream(out);
}

MortalitySurface surface_from_cells(Quantity kind, std::span<const SurfaceCell> cells) {
    if (cells.empty()) {
        throw DataError("surface has no cells");
    }
    const auto [age_lo, age_hi] = std::minmax_element(
        cells.begin(), cells.end(), [](const auto &a, const auto &b) { return a.age < b.age; });
    const auto [year_lo, year_hi] = std::minmax_element(
        cells.begin(), cells.end(), [](const auto &a, const auto &b) { return a.year < b.year; });
    const AgeRange ages(age_lo->age, age_hi->age);
    const YearRange years(year_lo->year, year_hi->year);
    if (static_cast<Eigen::Index>(cells.size()) != ages.size() * years.size()) {
        throw DataError("cells do not form a complete age x year grid");
    }

    Eigen::MatrixXd values(ages.size(), years.size());
    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(ages.size(), years.size());
    for (const auto &cell : cells) {
        auto &count = seen(ages.index(cell.age), years.index(cell.year));
        if (count++ > 0) {
            throw DataError("duplicate cell for age " + std::to_string(cell.age) + ", year " +
                            std::to_string(cell.year));
        }
        values(ages.index(cell.age), years.index(cell.year)) = cell.value;
    }
    return {ages, years, kind, std::move(values)};
}

void export_csv(std::ostream &out, const MortalitySurface &surface) {
    out << "age,year,value\n";
    const auto &ages = surface.ages();
    const auto &years = surface.years();
    for (int age = ages.min(); age <= ages.max(); ++age) {
        for (int year = years.min(); year <= years.max(); ++year) {
            out << age << ',' << year << ',' << format_double(surface.at(age, year)) << '\n';
        }
    }
    check_stream(out);
}

MortalitySurface import_csv(std::istream &in, Quantity kind) {
    std::string line;
    int line_no = 0;
    bool header = false;
    std::vector<SurfaceCell> cells;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header) {
            if (line != "age,year,value") {
                fail_line(line_no, "expected header 'age,year,value'");
            }
            header = true;
            continue;
        }
        const auto fields = split_commas(line);
        if (fields.size() != 3) {
            fail_line(line_no, "expected 3 fields");
        }
        const auto age = parse_number<int>(fields[0]);
        const auto year = parse_number<int>(fields[1]);
        const auto value = parse_number<double>(fields[2]);
        if (!age || !year || !value) {
            fail_line(line_no, "malformed row '" + line + "'");
        }
        cells.push_back({*age, *year, *value});
    }
    if (!header) {
        throw DataError("CSV surface has no header");
    }
    return surface_from_cells(kind, cells);
}

void export_csv(std::ostream &out, const BacktestReport &report) {
    out << "country,sex,model,period,mse,mse_star,mape\n";
    for (const auto &r : report.results) {
        for (const auto &[period, metrics] : {std::pair{"fit", &r.fit}, {"forecast", &r.forecast}}) {
            out << report.country << ',' << report.sex << ',' << to_string(r.model) << ','
                << period << ',' << format_double(metrics->mse) << ','
                << format_double(metrics->mse_star) << ',' << format_double(metrics->mape)
                << '\n';
        }
    }
    check_stream(out);
}

void export_mi_csv(std::ostream &out, const BacktestReport &report) {
    out << "model,age,year,observed,projected\n";
    for (const auto &r : report.results) {
        if (!r.mi) {
            continue;
        }
        for (std::size_t i = 0; i < r.mi->years.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            out << to_string(r.model) << ',' << r.mi->age << ',' << r.mi->years[i] << ','
                << format_double(r.mi->observed(k)) << ',' << format_double(r.mi->projected(k))
                << '\n';
        }
    }
    check_stream(out);
}

} // namespace slmort
