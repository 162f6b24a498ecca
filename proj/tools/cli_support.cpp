#include "cli_support.hpp"

#include "slmort/ingest.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace slmort::cli {

std::vector<std::string> expand_config_args(std::vector<std::string> args) {
    std::optional<std::string> config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) {
                throw std::invalid_argument("--config needs a file argument");
            }
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!config_path) {
        return args;
    }

    std::ifstream in(*config_path);
    if (!in) {
        throw std::invalid_argument("cannot open config file " + *config_path);
    }
    std::vector<std::string> from_file;
    for (const auto &item : CLI::ConfigTOML().from_config(in)) {
        if (!item.parents.empty()) {
            throw std::invalid_argument("config file " + *config_path +
                                        " must be flat key = value lines, found section '" +
                                        item.parents.front() + "'");
        }
        std::string joined;
        for (const auto &input : item.inputs) {
            joined += (joined.empty() ? "" : ",") + input;
        }
        from_file.push_back("--" + item.name);
        from_file.push_back(joined);
    }

    const auto sub = std::find_if(args.begin() + 1, args.end(),
                                  [](const std::string &a) { return a.empty() || a[0] != '-'; });
    if (sub == args.end()) {
        throw std::invalid_argument("--config needs a subcommand");
    }
    args.insert(sub + 1, from_file.begin(), from_file.end());
    return args;
}

std::string read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

void write_settings_header(std::ostream &out, std::string_view command, const Settings &settings) {
    std::vector<std::string> lines{fmt::format("slmort {}", command)};
    for (const auto &[key, value] : settings) {
        lines.push_back(fmt::format("{} = {}", key, value));
    }
    write_comment_header(out, lines);
}

void write_artifact(const std::filesystem::path &path, std::string_view command,
                    const Settings &settings, const std::function<void(std::ostream &)> &body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    write_settings_header(out, command, settings);
    body(out);
    out.flush();
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

Model model_of(const FittedParams &fitted) {
    return std::visit(
        [](const auto &p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SlState>) {
                return Model::sl;
            } else if constexpr (std::is_same_v<T, LcParams>) {
                return Model::lc;
            } else {
                return Model::cbd;
            }
        },
        fitted);
}

namespace {

void row(std::ostream &out, std::string_view parameter, std::string_view key, std::string_view value) {
    out << parameter << ',' << key << ',' << value << '\n';
}

void vector_rows(std::ostream &out, std::string_view parameter, const Eigen::VectorXd &v,
                 int first_key) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        row(out, parameter, std::to_string(first_key + static_cast<int>(i)),
            format_double(v(i)));
    }
}

void meta_rows(std::ostream &out, Model model, const AgeRange &ages, const YearRange &years) {
    row(out, "meta", "model", to_string(model));
    row(out, "meta", "x_min", std::to_string(ages.min()));
    row(out, "meta", "x_max", std::to_string(ages.max()));
    row(out, "meta", "t_min", std::to_string(years.min()));
    row(out, "meta", "t_max", std::to_string(years.max()));
}

template <typename T>
T parse_field(const std::string &text, int line) {
    T value{};
    const char *end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("params line " + std::to_string(line) + ": cannot parse '" + text + "'");
    }
    return value;
}

struct ParamTable {
    std::map<std::string, std::string> meta;
    std::map<std::string, std::map<int, double>> series;

    const std::string &meta_value(const std::string &key) const {
        const auto it = meta.find(key);
        if (it == meta.end()) {
            throw DataError("params file lacks meta entry '" + key + "'");
        }
        return it->second;
    }

    int meta_int(const std::string &key) const { return parse_field<int>(meta_value(key), 0); }

    Eigen::VectorXd vector(const std::string &parameter, int first, int last) const {
        const auto it = series.find(parameter);
        if (it == series.end()) {
            throw DataError("params file lacks parameter '" + parameter + "'");
        }
        if (static_cast<int>(it->second.size()) != last - first + 1 ||
            it->second.begin()->first != first || it->second.rbegin()->first != last) {
            throw DataError("parameter '" + parameter + "' must cover keys " +
                            std::to_string(first) + "-" + std::to_string(last) + " exactly");
        }
        Eigen::VectorXd v(last - first + 1);
        for (const auto &[key, value] : it->second) {
            v(key - first) = value;
        }
        return v;
    }
};

} // namespace

void write_params(std::ostream &out, const FittedParams &fitted) {
    out << "parameter,key,value\n";
    std::visit(
        [&out](const auto &p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SlState>) {
                const auto &s = p.params;
                meta_rows(out, Model::sl, s.ages, s.years);
                row(out, "meta", "t0", std::to_string(s.t0));
                vector_rows(out, "alpha1", s.alpha1, s.years.min());
                vector_rows(out, "alpha2", s.alpha2, s.years.min());
                vector_rows(out, "kappa", s.kappa, s.ages.min());
                vector_rows(out, "base_survival", p.base_survival, s.ages.min());
            } else if constexpr (std::is_same_v<T, LcParams>) {
                meta_rows(out, Model::lc, p.ages, p.years);
                vector_rows(out, "alpha", p.alpha, p.ages.min());
                vector_rows(out, "beta", p.beta, p.ages.min());
                vector_rows(out, "kappa", p.kappa, p.years.min());
            } else {
                meta_rows(out, Model::cbd, p.ages, p.years);
                row(out, "meta", "x_bar", format_double(p.x_bar));
                vector_rows(out, "kappa1", p.kappa1, p.years.min());
                vector_rows(out, "kappa2", p.kappa2, p.years.min());
            }
        },
        fitted);
    if (!out) {
        throw std::runtime_error("failed writing parameters");
    }
}

FittedParams read_params(std::istream &in) {
    ParamTable table;
    std::string line;
    int line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header) {
            if (line != "parameter,key,value") {
                throw DataError("params line " + std::to_string(line_no) +
                                ": expected header 'parameter,key,value'");
            }
            header = true;
            continue;
        }
        const auto first = line.find(',');
        const auto second = line.find(',', first == std::string::npos ? first : first + 1);
        if (first == std::string::npos || second == std::string::npos ||
            line.find(',', second + 1) != std::string::npos) {
            throw DataError("params line " + std::to_string(line_no) + ": expected 3 fields");
        }
        const auto parameter = line.substr(0, first);
        const auto key = line.substr(first + 1, second - first - 1);
        const auto value = line.substr(second + 1);
        if (parameter == "meta") {
            table.meta[key] = value;
            continue;
        }
        auto &entries = table.series[parameter];
        if (!entries.emplace(parse_field<int>(key, line_no), parse_field<double>(value, line_no))
                 .second) {
            throw DataError("params line " + std::to_string(line_no) + ": duplicate entry " +
                            parameter + "," + key);
        }
    }
    if (!header) {
        throw DataError("params file has no header");
    }

    const AgeRange ages(table.meta_int("x_min"), table.meta_int("x_max"));
    const YearRange years(table.meta_int("t_min"), table.meta_int("t_max"));
    switch (parse_model(table.meta_value("model"))) {
    case Model::sl: {
        SlParams p{table.vector("alpha1", years.min(), years.max()),
                   table.vector("alpha2", years.min(), years.max()),
                   table.vector("kappa", ages.min(), ages.max()),
                   table.meta_int("t0"),
                   ages,
                   years};
        return SlState{std::move(p), table.vector("base_survival", ages.min(), ages.max())};
    }
    case Model::lc:
        return LcParams{table.vector("alpha", ages.min(), ages.max()),
                        table.vector("beta", ages.min(), ages.max()),
                        table.vector("kappa", years.min(), years.max()), ages, years};
    case Model::cbd:
        return CbdParams{table.vector("kappa1", years.min(), years.max()),
                         table.vector("kappa2", years.min(), years.max()),
                         parse_field<double>(table.meta_value("x_bar"), 0), ages, years};
    }
    throw DataError("unknown model in params file");
}

double sample_quantile(std::vector<double> values, double p) {
    if (values.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) {
        return values.back();
    }
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

} // namespace slmort::cli
