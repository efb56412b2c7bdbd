#pragma once

#include "auprobe/network.hpp"
#include "auprobe/train.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace auprobe {

/// Everything a pipeline run needs besides its inputs.
///
/// The text form is one `key = value` per line; `#` starts a comment. Keys are
/// the field names below with a `model.`, `train.`, `data.` or `analysis.`
/// prefix, plus the top-level `seed` and `threads`. `seed` feeds the model
/// initialization, the split and training; the AUPROBE_SEED environment
/// variable overrides it.
struct RunConfig {
    ModelConfig model;
    /// Unset: taken from the number of distinct labels in the manifest.
    std::optional<std::size_t> num_classes;
    TrainConfig train;
    std::size_t test_count = 0;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::size_t harvest_block = 0;  // 0: last conv block
    std::size_t top_n = 9;
    bool normalize = false;

    /// Copies seed and threads into the model and training sections.
    void resolve();
    void validate() const;
};

RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form with every key; parse_config(config_text(c)) == c.
std::string config_text(const RunConfig& config);
void save_config(const RunConfig& config, const std::filesystem::path& path);

/// Applies AUPROBE_SEED if set. Throws ConfigError if it is not an unsigned integer.
void apply_environment(RunConfig& config);

}  // namespace auprobe
