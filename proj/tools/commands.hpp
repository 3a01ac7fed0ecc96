#pragma once

#include <string>

#include "config.hpp"

namespace agrisk::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Each command writes its artifacts, `config.resolved.ini` and
/// `manifest.json` under config.output and returns the process exit code.
int cmd_fit(const RunConfig& config);
int cmd_evidence(const RunConfig& config);
int cmd_select(const RunConfig& config);
int cmd_backtest(const RunConfig& config);
int cmd_project(const RunConfig& config);
int cmd_verify(const RunConfig& config);

}  // namespace agrisk::cli
