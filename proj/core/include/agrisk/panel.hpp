#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace agrisk {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Annual yield (or production) levels per country and their log-returns.
/// Missing entries are NaN. Column t of log_returns is the return into
/// years[t + 1].
struct YieldPanel {
  std::vector<std::string> countries;
  std::vector<int> years;
  Eigen::MatrixXd levels;       // K x T_raw
  Eigen::MatrixXd log_returns;  // K x (T_raw - 1)
  BoolMatrix missing_mask;      // aligned with log_returns
  std::size_t nonpositive_levels = 0;

  std::size_t country_count() const { return countries.size(); }
  std::ptrdiff_t country_index(const std::string& id) const;
};

/// Builds a panel from levels, deriving log-returns and the missing mask.
/// Non-positive levels are recorded as missing and counted.
YieldPanel make_yield_panel(std::vector<std::string> countries, std::vector<int> years, Eigen::MatrixXd levels);

struct CsvSchema {
  std::string country = "country";
  std::string year = "year";
  std::string value = "value";
};

/// Loads a long-format yield CSV. Countries come out sorted, years span the
/// full observed range (gaps become missing values).
YieldPanel load_yield_panel(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_yield_panel(const std::filesystem::path& path, const YieldPanel& panel);

/// Growing-season mean temperatures and their year-over-year differences.
/// Column t of delta_t is the change into years[t + 1].
struct ClimatePanel {
  std::vector<std::string> countries;
  std::vector<int> years;
  Eigen::MatrixXd mean_temp;   // K x T_raw
  Eigen::MatrixXd delta_t;     // K x (T_raw - 1)
  Eigen::MatrixXd delta_t_sq;  // K x (T_raw - 1)

  std::ptrdiff_t country_index(const std::string& id) const;
  std::ptrdiff_t year_index(int year) const;
};

ClimatePanel derive_climate_regressors(std::vector<std::string> countries, std::vector<int> years,
                                       Eigen::MatrixXd mean_temp);

CsvSchema climate_schema();
ClimatePanel load_climate_panel(const std::filesystem::path& path, const CsvSchema& schema = climate_schema());

struct VolatilityScreen {
  YieldPanel panel;
  std::vector<std::string> removed;
  std::vector<double> sds;  // sd of every input country, input order
};

inline constexpr double kDefaultVolatilityThreshold = 0.5;

/// Drops countries whose sample sd of non-missing log-returns exceeds the
/// threshold. Countries with fewer than two returns have sd 0.
VolatilityScreen volatility_filter(const YieldPanel& panel, double threshold = kDefaultVolatilityThreshold);

/// Regressor inputs for one estimation column of an AlignedDataset.
struct StepInputs {
  int time_index = 0;
  int year = 0;
  Eigen::VectorXd lag1, lag2, dt, dt2;
};

/// The estimation-ready panel: every matrix is K x T over usable years, with
/// two leading log-return years consumed as lags. time_index is 1 at the first
/// log-return year, so the first usable column has time_index 3.
struct AlignedDataset {
  std::vector<std::string> countries;
  std::vector<int> years;
  std::vector<int> time_index;
  Eigen::MatrixXd y, y_lag1, y_lag2, dt, dt2;
  /// Level at the column's year and at the year before; NaN when unknown.
  Eigen::MatrixXd level, level_prev;

  std::size_t country_count() const { return countries.size(); }
  std::size_t year_count() const { return years.size(); }
  bool observed(std::size_t i, std::size_t t) const;
  std::size_t observation_count() const;

  /// Columns [begin, end), lags and regressors intact.
  AlignedDataset slice_columns(std::size_t begin, std::size_t end) const;
  /// Rows for the requested countries, in the requested order.
  AlignedDataset subset_countries(const std::vector<std::string>& ids) const;
  StepInputs step_inputs(std::size_t column) const;
  std::ptrdiff_t country_index(const std::string& id) const;
  /// Order-sensitive digest of countries, years and every matrix entry.
  std::uint64_t fingerprint() const;
};

AlignedDataset align(const YieldPanel& yield_panel, const ClimatePanel& climate_panel);

/// Reads a country-subset file: one id per line, blank lines and '#'
/// comments ignored.
std::vector<std::string> load_country_list(const std::filesystem::path& path);

}  // namespace agrisk
