#pragma once

#include "slmort/benchmark_models.hpp"
#include "slmort/evaluation.hpp"
#include "slmort/sl_model.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace slmort::cli {

enum ExitCode : int { ok = 0, usage = 1, not_converged = 2, data_error = 3 };

/// Resolved run settings in a fixed order; written to every artifact header.
using Settings = std::vector<std::pair<std::string, std::string>>;

/// Splices the key = value pairs of a `--config <file>` argument in front of the other
/// arguments of the selected subcommand, so explicit flags (parsed later) take precedence.
[[nodiscard]] std::vector<std::string> expand_config_args(std::vector<std::string> args);

[[nodiscard]] std::string read_file_bytes(const std::filesystem::path &path);
[[nodiscard]] std::string sha256_hex(std::string_view bytes);

/// "# slmort <command>" followed by one "# key = value" line per setting.
void write_settings_header(std::ostream &out, std::string_view command, const Settings &settings);

/// Writes `path` in binary mode (LF endings), header first; throws on I/O failure.
void write_artifact(const std::filesystem::path &path, std::string_view command,
                    const Settings &settings, const std::function<void(std::ostream &)> &body);

struct SlState {
    SlParams params;
    Eigen::VectorXd base_survival;
};

using FittedParams = std::variant<SlState, LcParams, CbdParams>;

[[nodiscard]] Model model_of(const FittedParams &fitted);

/// "parameter,key,value" rows: meta entries, then one row per parameter component.
void write_params(std::ostream &out, const FittedParams &fitted);
[[nodiscard]] FittedParams read_params(std::istream &in);

/// Linear-interpolation sample quantile (the usual "type 7" definition) of unsorted data.
[[nodiscard]] double sample_quantile(std::vector<double> values, double p);

} // namespace slmort::cli
