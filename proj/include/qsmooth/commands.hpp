#pragma once

// Subcommands of the qsmooth tool. Each writes its outputs plus a
// manifest.json into the output directory.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qsmooth/model.hpp"

namespace qsmooth {

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitValidation = 2,
  kExitQnd = 3,
  kExitCap = 4,
};

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;        // overrides experiment.seed
  unsigned threads = 1;
  std::optional<std::filesystem::path> records;  // smooth: existing trajectory CSVs
  std::vector<double> dts;                  // compare: default is experiment.dt
  std::optional<std::size_t> n_steps;       // oracle: default t_final / dt; compare: default 8
};

inline constexpr std::size_t kDefaultCompareSteps = 8;

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  std::filesystem::path manifest;
};

/// One CSV per trajectory (traj_NNNN.csv) with the record and filter estimates.
CommandResult cmd_simulate(const CommandOptions& opts);

/// As cmd_simulate plus smoother columns; with opts.records the records are
/// read from existing CSVs instead of simulated. Throws QndRequired.
CommandResult cmd_smooth(const CommandOptions& opts);

/// oracle.json: exhaustive branch table with orthogonality, unbiasedness and
/// MSE-by-record-length checks.
CommandResult cmd_oracle(const CommandOptions& opts);

/// compare.json: per-dt errors of the SDE filter and smoother against the
/// oracle and the fitted order.
CommandResult cmd_compare(const CommandOptions& opts);

/// Maps an in-flight exception to the tool's exit code, printing its message.
int report_error(std::exception_ptr error, std::ostream& err);

}  // namespace qsmooth
