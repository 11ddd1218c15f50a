#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "citrus/errors.hpp"
#include "citrus/experiments/commands.hpp"

namespace ex = citrus::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Tensor product-graph diffusion experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  for (const auto& name : ex::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value settings file");
    sub->add_option("--set", overrides, "override one setting, key=value")->take_all();
    sub->add_option("--out", out_dir, "output directory (default out/<command>)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ex::exit_config;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (out_dir.empty()) out_dir = "out/" + command;

  ex::CommandResult result;
  try {
    ex::Config cfg = ex::default_config(command);
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& o : overrides) cfg.set(o);
    result = ex::run_command(command, cfg);
    ex::write_outputs(result, out_dir);
  } catch (const citrus::ParseError& e) {
    std::cerr << "citrus: " << e.what() << '\n';
    return ex::exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << "citrus: invalid setting: " << e.what() << '\n';
    return ex::exit_config;
  } catch (const std::exception& e) {
    std::cerr << "citrus: " << command << " failed: " << e.what() << '\n';
    return ex::exit_assertion;
  }

  for (const auto& name : result.failed_checks) std::cerr << "check failed: " << name << '\n';
  std::cout << command << ": " << (result.exit_code == ex::exit_pass ? "pass" : "fail")
            << " (outputs in " << out_dir << ")\n";
  return result.exit_code;
}
