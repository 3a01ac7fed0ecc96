#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agrisk/inference.hpp"
#include "agrisk/panel.hpp"
#include "agrisk/risk.hpp"

namespace agrisk {

enum class EnsembleKind { LogReturn, YieldLevel, ProductionLevel };

/// Weighted draws of one target year's observables: row n is draw n, column
/// k is country k.
struct PredictiveEnsemble {
  int target_year = 0;
  std::vector<std::string> countries;
  Eigen::MatrixXd values;
  std::vector<double> weights;  // normalized
  EnsembleKind kind = EnsembleKind::LogReturn;

  std::size_t size() const { return weights.size(); }
  std::vector<double> column(std::size_t k) const;
};

/// Regressors for the year after the last column of `data`: lags are the two
/// latest log-returns, temperature differences come from `climate`.
StepInputs next_step_inputs(const AlignedDataset& data, const ClimatePanel& climate);

/// One draw per posterior particle from N(mu(theta_n), sigma_n^2) for every
/// country. Particle n uses its own stream derived from (seed, n), so the
/// ensemble does not depend on evaluation order.
PredictiveEnsemble posterior_predictive(const Posterior& posterior, const StepInputs& inputs,
                                        const std::vector<std::string>& countries, std::uint64_t seed);

struct CalibrationReport {
  std::string country;
  double nominal = 0.95;
  double empirical = 0.0;
  double squared_error = 0.0;
  std::size_t observations = 0;
};

/// Coverage of observations by intervals (lo <= obs <= hi). NaN observations
/// are skipped; at least one must remain.
CalibrationReport calibration_squared_error(std::span<const Interval> intervals, std::span<const double> observed,
                                            double nominal, std::string country = {});

/// Produces a posterior from a training window; the seed is the only source
/// of randomness.
using Fitter = std::function<Posterior(const AlignedDataset& train, std::uint64_t seed)>;
Fitter smc_fitter(VariantKind kind, smc::SmcConfig config);

struct ElpdResult {
  double elpd = 0.0;
  std::vector<int> years;
  std::vector<double> per_year;
  std::size_t floored = 0;  // KDE evaluations that hit the density floor
};

/// Joint log predictive density of the observed cells of one column: the sum
/// over observed countries of the weighted Gaussian KDE log-density.
double ensemble_log_density(const PredictiveEnsemble& ensemble, const AlignedDataset& data, std::size_t column,
                            std::size_t* floored = nullptr);

/// Exact leave-future-out refits. tau is a 1-based column of `data`: for
/// t = tau-1 .. T-1 the model is fit on columns 1..t and scored on column t+1.
ElpdResult lfo_cv_elpd(const AlignedDataset& data, const Fitter& fitter, std::size_t tau, std::uint64_t seed);
ElpdResult lfo_cv_elpd(const AlignedDataset& data, VariantKind kind, const smc::SmcConfig& config, std::size_t tau);

enum class RefitCadence { EveryYear, FitOnce };

struct BacktestPlan {
  std::size_t fit_columns = 0;  // columns [0, fit_columns) form the first training window
  std::size_t eval_years = 0;   // evaluation columns follow immediately
  RefitCadence cadence = RefitCadence::EveryYear;
  double level = 0.95;
  double risk_alpha = 0.01;
  bool score_elpd = true;
};

struct ForecastRow {
  int year = 0;
  std::string country;
  double mean = 0.0, median = 0.0, lo = 0.0, hi = 0.0, var = 0.0, es = 0.0;
  double observed = 0.0;  // NaN when unobserved
};

struct BacktestResult {
  std::vector<ForecastRow> rows;                 // year-major, countries in dataset order
  std::vector<ForecastRow> global_rows;          // aggregated production, when levels are known
  std::vector<CalibrationReport> calibration;    // one per country
  std::vector<RiskReport> risk;                  // aligned with rows
  ElpdResult elpd;
};

BacktestResult backtest(const AlignedDataset& data, const Fitter& fitter, const BacktestPlan& plan,
                        std::uint64_t seed);

/// Global production per draw: sum_i w_i * last_level_i * exp(y_i).
PredictiveEnsemble aggregate_production(const PredictiveEnsemble& log_returns, std::span<const double> last_levels,
                                        std::span<const double> country_weights = {});

/// Forecast summary of one ensemble column.
ForecastRow summarize(const PredictiveEnsemble& ensemble, std::size_t k, double level, double alpha, Tail tail);

}  // namespace agrisk
