#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ligm/io.hpp"

namespace ligm {

enum ExitCode : int {
  kExitPass = 0,
  kExitAssertionFailure = 1,
  kExitUsage = 2,
  kExitRuntimeAbort = 3,
};

struct CommandOutcome {
  int exit_code = kExitPass;
  std::vector<std::string> lines;
  std::vector<std::filesystem::path> artifacts;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "LIGM_OUTPUT_DIR";

/// --out, else output.directory from the config, else $LIGM_OUTPUT_DIR, else
/// "ligm_out".
std::filesystem::path resolve_output_dir(const std::optional<std::filesystem::path>& flag,
                                         const RunConfig& config);

struct RunRequest {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  bool no_correction = false;
  /// Continue from a checkpoint written by an earlier run of the same config.
  std::optional<std::filesystem::path> resume;
};

/// Runs the scheme and persists trajectory.bin, snapshots.tsv, final.tsv,
/// tv.tsv, run_summary.txt, checkpoint.bin and the resolved config.yaml.
CommandOutcome cmd_run(const RunRequest& request);

struct StudyRequest {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  bool no_correction = false;
  std::optional<double> threshold;
};

/// Convergence study over study.levels; exit 0 iff every ε, ε₁ and L¹ slope
/// reaches the threshold.
CommandOutcome cmd_study(const StudyRequest& request);

struct CheckRequest {
  std::uint64_t seed = 1;
  std::size_t count = 100000;
  /// Fault injection: replace averages by 2·max − min.
  bool corrupt_average = false;
};

/// Randomized averaging-bound checks, the shocked-cell constant study and
/// flux-gradient and wave-speed oracles for both models.
CommandOutcome cmd_check(const CheckRequest& request);

/// Runs `command`, mapping exceptions to exit codes: ConfigError, ParseError
/// and FormatError → 2, other errors → 3.
CommandOutcome guarded(const std::function<CommandOutcome()>& command);

/// Entry point for the ligm executable.
int cli_main(int argc, char** argv);

}  // namespace ligm
