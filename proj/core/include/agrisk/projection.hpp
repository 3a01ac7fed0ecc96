#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "agrisk/inference.hpp"
#include "agrisk/panel.hpp"

namespace agrisk {

/// Future temperature trajectories per scenario and climate model. Every
/// trajectory covers the same countries and the same years.
struct ScenarioSet {
  std::vector<std::string> scenarios;
  std::vector<std::vector<std::string>> climate_models;    // per scenario
  std::vector<std::vector<ClimatePanel>> trajectories;     // [scenario][model]
  std::vector<std::vector<std::pair<int, double>>> co2e;   // per scenario: (year, ppm); may be empty

  std::size_t scenario_count() const { return scenarios.size(); }
  std::ptrdiff_t scenario_index(const std::string& id) const;
};

/// Reads `scenario,climate_model,country,year,mean_temp` and, when given,
/// `scenario,year,co2e_ppm`. Scenarios and models come out sorted.
ScenarioSet load_scenarios(const std::filesystem::path& trajectories,
                           const std::optional<std::filesystem::path>& co2e = std::nullopt);

/// State at the last observed year from which paths are propagated.
struct ProjectionStart {
  int base_year = 0;
  int base_time_index = 0;
  std::vector<std::string> countries;
  Eigen::VectorXd lag1, lag2;   // log-returns into base_year and base_year - 1
  Eigen::VectorXd base_level;   // production at base_year
};

/// Uses the last column of `data`; throws MissingLevel or MissingRegressor
/// when the base levels or lags are unknown.
ProjectionStart projection_start(const AlignedDataset& data);

struct ProjectionOptions {
  int horizon = 0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool keep_country_draws = false;
};

/// Draw tensor. Path noise for particle n is drawn from a stream derived from
/// (seed, n) alone, so every scenario and climate model sees the same noise
/// (common random numbers).
struct ProjectionDraws {
  std::vector<std::string> scenarios;
  std::vector<std::vector<std::string>> climate_models;
  std::vector<std::string> countries;
  std::vector<int> years;                 // base_year + 1 .. horizon
  int base_year = 0;
  double baseline = 0.0;                  // global production at base_year
  std::vector<double> particle_weights;   // normalized
  /// global[s][m] is N x |years| global production.
  std::vector<std::vector<Eigen::MatrixXd>> global;
  /// Optional country[s][m][n] is |years| x K log-returns.
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> country;

  std::size_t particle_count() const { return particle_weights.size(); }
  std::ptrdiff_t year_index(int year) const;
};

ProjectionDraws project(const Posterior& posterior, const ProjectionStart& start, const ScenarioSet& scenarios,
                        const ProjectionOptions& options);

/// Per-draw transform applied before summarizing.
enum class ProjectionUnit { Level, PercentChange };

/// Summary of one scenario at one year (or decade). Climate-only bands are
/// quantiles of the per-climate-model weighted means; total bands are
/// quantiles of all draws pooled with weight w_n / M.
struct ProjectionSummary {
  std::string scenario;
  std::string label;
  double mean = 0.0;
  double q25 = 0.0, q75 = 0.0;
  bool has_climate_band = false;  // false with a single climate model
  double climate_q25 = 0.0, climate_q75 = 0.0;
  double climate_lo = 0.0, climate_hi = 0.0;  // 2.5% and 97.5%
  double total_lo = 0.0, total_hi = 0.0;      // 2.5% and 97.5%
  double es01 = 0.0;                          // lower-tail 1% ES of the pooled draws
  ProjectionUnit unit = ProjectionUnit::Level;
};

/// A pooled sample: value per (model, particle) with its weight and model index.
struct PooledSample {
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<std::size_t> model;
};

/// Summarizes one per-model block of draws (values[m] has one entry per particle).
ProjectionSummary summarize_models(const std::vector<std::vector<double>>& values,
                                   const std::vector<double>& particle_weights);

/// Uncertainty bands for every (scenario, year).
std::vector<ProjectionSummary> decompose_uncertainty(const ProjectionDraws& draws,
                                                     ProjectionUnit unit = ProjectionUnit::Level);

/// Percent change 100 (global / baseline - 1) per draw, summarized per year.
std::vector<ProjectionSummary> percent_change_curve(const ProjectionDraws& draws);

/// Decade-mean global production per (model, particle) for one scenario.
PooledSample decadal_density(const ProjectionDraws& draws, std::size_t scenario, int first_year, int last_year);

enum class Co2eSummary { DecadeMean, EndYear };

struct EsCurvePoint {
  std::string scenario;
  double co2e = 0.0;
  ProjectionSummary summary;  // in percent change of the decade mean
};

/// One point per scenario, sorted by the CO2e coordinate.
std::vector<EsCurvePoint> es_vs_co2e_curve(const ProjectionDraws& draws, const ScenarioSet& scenarios, int first_year,
                                           int last_year, Co2eSummary x = Co2eSummary::DecadeMean,
                                           double alpha = 0.01);

}  // namespace agrisk
