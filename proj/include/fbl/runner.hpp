#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbl/config.hpp"

namespace fbl {

enum ExitCode : int { kExitOk = 0, kExitVerdictFail = 1, kExitConfig = 2, kExitNumerical = 3 };

inline constexpr const char* kSchemaVersion = "fbl-artifacts 1";
inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
    std::string out_dir;                 // empty: config output.dir
    std::optional<std::uint64_t> seed;   // overrides mc.seed
    std::size_t workers = 1;
    bool quiet = false;
};

struct StageSummary {
    std::string name;
    bool pass = false;
    std::vector<std::string> lines;  // one per verdict, "PASS ..." or "FAIL ..."
    std::vector<std::string> artifacts;
    double seconds = 0.0;
};

struct RunReport {
    std::string subcommand;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::vector<StageSummary> stages;
    double seconds = 0.0;
    bool pass() const;
};

const std::vector<std::string>& subcommands();

/// Runs the stage(s) and writes artifacts into the output directory.
/// Throws ConfigError / NumericalFailure; `run_cli` maps them to exit codes.
RunReport run(const std::string& subcommand, const RunConfig& config, const RunOptions& options);

/// Parses the config, runs, writes run_report.txt and returns the exit code:
/// 0 all verdicts pass, 1 some verdict failed, 2 configuration error,
/// 3 numerical failure. Diagnostics go to stderr.
int run_cli(const std::string& subcommand, const std::string& config_path, const RunOptions& options);

}  // namespace fbl
