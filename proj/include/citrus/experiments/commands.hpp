#pragma once

// The five harness commands. Each returns its report and output files in
// memory; write_outputs stores them.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "citrus/experiments/config.hpp"

namespace citrus::experiments {

inline constexpr int exit_pass = 0;
inline constexpr int exit_assertion = 1;
inline constexpr int exit_config = 2;

struct CommandResult {
  int exit_code = exit_pass;
  nlohmann::json report;
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  std::string timing_log;  // wall-clock measurements; not byte-stable
  std::vector<std::string> failed_checks;
};

const std::vector<std::string>& command_names();

/// Default settings of a command. Throws ParseError for an unknown command.
Config default_config(const std::string& command);

CommandResult run_command(const std::string& command, const Config& cfg);

/// Writes report.json, every CSV, and timing.log (when non-empty) into
/// out_dir, each via a temporary file.
void write_outputs(const CommandResult& result, const std::string& out_dir);

}  // namespace citrus::experiments
