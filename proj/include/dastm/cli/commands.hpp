#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Subcommands as file-to-file transforms. Every command reads its own section
// of the JSON config ("simulate", "calibrate", ...) plus the top-level "seed".
// Relative paths in the config resolve against the config file's directory;
// inputs the config does not name default to the standard artifact names in
// the output directory, so the stages chain through one directory.
namespace dastm::cli {

struct CommandOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;  ///< overrides the config's seed
    std::filesystem::path out = "out";
};

using Outputs = std::vector<std::filesystem::path>;

Outputs run_simulate(const CommandOptions& options);
Outputs run_calibrate(const CommandOptions& options);
Outputs run_detect(const CommandOptions& options);
Outputs run_track(const CommandOptions& options);
Outputs run_characterize(const CommandOptions& options);
/// Writes the report even when scenarios fail, then throws DataError listing them.
Outputs run_eval_command(const CommandOptions& options);

[[nodiscard]] const std::vector<std::string>& command_names();
/// Throws ConfigError for an unknown name.
Outputs run_command(const std::string& name, const CommandOptions& options);

/// 2 for configuration errors, 3 for data and precondition errors, 1 otherwise.
[[nodiscard]] int exit_code_for(const std::exception_ptr& error);

} // namespace dastm::cli
