#include "hemicontrol/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of elliptic boundary hemivariational inequalities"};
  app.set_version_flag("--version", std::string(hemicontrol::kVersion));

  std::string command;
  std::string config_path;
  std::string out_dir;
  app.add_option("command", command, "Command to run")
      ->required()
      ->check(CLI::IsMember({"solve-state", "solve-hvi", "optimize-limit", "optimize-alpha", "sweep-state",
                             "sweep-control", "verify-j"}));
  app.add_option("--config", config_path, "Config file (section.key = value lines)")->required();
  app.add_option("--out", out_dir, "Output directory (overrides output.dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hemicontrol::kExitConfigError;
  }

  std::optional<std::string> out;
  if (!out_dir.empty())
    out = out_dir;
  return hemicontrol::run(command, config_path, out, std::cerr);
}
