#pragma once

// Command-line front end: `solve`, `mc` and `contingency` subcommands.
// Exit codes: 0 success, 1 usage or configuration error, 2 non-convergence,
// 3 infeasible base case.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "splitflow/contingency.hpp"

namespace splitflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNoConvergence = 2;
inline constexpr int kExitBaseInfeasible = 3;

inline constexpr const char* kOutDirEnv = "SPLITFLOW_OUT_DIR";
inline constexpr const char* kVersion = "0.1.0";

enum class Format { Text, Json, Csv };

/// Everything one run needs, after the config file and flags are merged.
struct RunConfig {
    std::string case_path;
    SolverOptions solver;
    LimitSpec limits;
    UncertaintySpec uncertainty;
    StudyConfig study;
    ContingencySpec contingency;
    std::optional<std::filesystem::path> out_dir;
    Format format = Format::Text;
    std::optional<std::string> trace_path;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Applies an INI file (sections case, solver, limits, uncertainty, study,
/// contingency, output) on top of `cfg`. Unknown keys and bad values throw
/// ConfigError.
void apply_config_file(const std::filesystem::path& path, RunConfig& cfg);

/// Full echo of a run, enough to reproduce it.
Json run_echo(const RunConfig& cfg, const std::string& command);

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_mc(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_contingency(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace splitflow::cli
