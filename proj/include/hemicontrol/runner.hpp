#pragma once

#include "hemicontrol/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace hemicontrol {

enum ExitCode : int {
  kExitOk = 0,
  kExitSolverFailure = 2,
  kExitConfigError = 3,
  kExitCertificationFailure = 4,
};

/// Runs one command on a parsed config and writes its outputs to `out_dir`
/// (config output.dir when empty). Diagnostics go to `err`.
int run(const std::string& command, const RunConfig& config, const std::optional<std::string>& out_dir,
        std::ostream& err);

/// Loads the config file first; a load failure is a config error.
int run(const std::string& command, const std::string& config_path, const std::optional<std::string>& out_dir,
        std::ostream& err);

} // namespace hemicontrol
