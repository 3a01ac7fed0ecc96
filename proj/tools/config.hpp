#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "agrisk/forecast.hpp"
#include "agrisk/model.hpp"
#include "agrisk/projection.hpp"
#include "agrisk/smc.hpp"

namespace agrisk::cli {

/// A configuration problem tied to one `section.key`; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::filesystem::path output = "agrisk-out";

  struct Paths {
    std::optional<std::filesystem::path> yield, climate, countries, base, candidates, scenarios, co2e, posterior,
        fixtures;
  } paths;

  VariantKind variant = VariantKind::HierVariance;
  std::vector<VariantKind> variants;  // evidence; defaults to {variant}
  double volatility_threshold = kDefaultVolatilityThreshold;

  smc::SmcConfig smc;
  std::size_t evidence_replicates = 1;

  std::size_t selection_replicates = 3;
  double tie_margin = 0.5;
  bool order_by_production = true;

  std::size_t fit_years = 0;  // 0: every column before the evaluation years
  std::size_t eval_years = 10;
  RefitCadence cadence = RefitCadence::EveryYear;
  double level = 0.95;
  double risk_alpha = 0.01;

  int horizon = 0;  // 0: last trajectory year
  std::vector<std::pair<int, int>> decades;
  Co2eSummary co2e_summary = Co2eSummary::DecadeMean;

  std::size_t verify_particles = 2000;
};

/// Flat `section.key` -> value map; top-level keys have no section prefix.
using KeyValues = std::map<std::string, std::string>;

/// Parses an INI file. Paths inside the file are resolved against its
/// directory.
KeyValues read_ini(const std::filesystem::path& path);

/// Builds a RunConfig from file values and command-line overrides (the
/// latter win). Unknown keys and malformed values raise ConfigError.
RunConfig resolve(const KeyValues& file_values, const KeyValues& overrides,
                  const std::optional<std::filesystem::path>& config_dir);

/// Canonical INI text of every key. Without runtime keys (threads, output)
/// it identifies the results of a run.
std::string render(const RunConfig& config, bool include_runtime = true);

/// Throws ConfigError naming the key when a required path is unset or absent.
void require_path(const std::optional<std::filesystem::path>& value, const std::string& key);

}  // namespace agrisk::cli
