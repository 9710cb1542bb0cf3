#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dncnn/dataset.hpp"
#include "dncnn/degradation.hpp"
#include "dncnn/model.hpp"
#include "dncnn/train.hpp"

namespace dncnn {

/// Documented key of a run configuration.
struct ConfigKey {
    const char* name;
    const char* default_value;  // nullptr: required, no default
    const char* help;
};

/// Every accepted key, in echo order.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value run configuration with defaults filled in.
struct RunConfig {
    NetworkSpec model;
    double bn_gamma = 1.0;
    TrainConfig train;

    TaskMode mode = TaskMode::S;
    std::vector<std::string> sources;
    std::size_t patch = 0;
    std::size_t count = 0;
    DatasetScale scale = DatasetScale::desk;
    std::size_t desk_factor = 100;
    double sigma = 25.0;
    std::optional<DegradationSpec> degrade;
    std::string manifest;

    std::vector<std::string> val_sources;
    DegradationSpec val_degrade = Awgn{25.0};

    std::string init_model;
    std::uint64_t seed = 0;

    std::string out_dir = ".";
    std::string model_out;
    std::string history_out;
    std::string manifest_out;
    std::string report_out;
    std::string curves_out;

    /// Raw effective values, keyed by name.
    std::map<std::string, std::string> values;
    std::vector<std::string> warnings;

    DatasetOptions dataset_options() const;
    /// Sets one key (as if it appeared in the file) and re-resolves.
    void set(const std::string& key, const std::string& value);
    /// Text that parses back to this configuration.
    std::string echo() const;
    void write_echo(const std::filesystem::path& path) const;
};

/// Parses key=value lines; `#` starts a comment. Unknown keys and bad values
/// raise ConfigError with the line number; a repeated key wins over earlier
/// ones and leaves a warning.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

/// Throws ConfigError naming `key` when it has no value.
void require_key(const RunConfig& cfg, const std::string& key);

}  // namespace dncnn
