#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace airfc {

/// Exit codes shared by every verb.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

struct CommandOptions {
    std::filesystem::path config;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    bool no_plots = false;
};

// Each verb reports progress on `log` and diagnostics on `err`, and never throws.

/// Single instance: params.json, trace.csv, objective.json, channel.chset.json,
/// baseline.wmat.json, manifest.json.
int cmd_optimize(const CommandOptions& opts, std::ostream& log, std::ostream& err);

/// Grid sweep: trials.csv, summary.json, baseline.wmat.json, accuracy*.svg / nmse*.svg,
/// manifest.json.
int cmd_sweep(const CommandOptions& opts, std::ostream& log, std::ostream& err);

/// Schema and range checks only.
int cmd_validate(const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace airfc
