#include "agrisk/forecast.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "agrisk/distributions.hpp"
#include "agrisk/error.hpp"
#include "agrisk/rng.hpp"

namespace agrisk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<double> PredictiveEnsemble::column(std::size_t k) const {
  const Eigen::VectorXd c = values.col(static_cast<Eigen::Index>(k));
  return {c.data(), c.data() + c.size()};
}

StepInputs next_step_inputs(const AlignedDataset& data, const ClimatePanel& climate) {
  if (data.year_count() == 0) throw Error(Errc::InvalidArgument, "dataset has no columns");
  const std::size_t last = data.year_count() - 1;
  const auto c = static_cast<Eigen::Index>(last);
  const auto k = static_cast<Eigen::Index>(data.country_count());
  StepInputs in;
  in.year = data.years[last] + 1;
  in.time_index = data.time_index[last] + 1;
  in.lag1 = data.y.col(c);
  in.lag2 = data.y_lag1.col(c);
  in.dt.resize(k);
  in.dt2.resize(k);
  const std::ptrdiff_t yi = climate.year_index(in.year);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& id = data.countries[static_cast<std::size_t>(i)];
    const std::ptrdiff_t ci = climate.country_index(id);
    double dt = kNaN;
    if (ci >= 0 && yi >= 1) dt = climate.delta_t(ci, yi - 1);
    if (!std::isfinite(dt)) {
      throw Error(Errc::MissingClimateForTarget, fmt::format("no temperature change for '{}' into {}", id, in.year));
    }
    in.dt(i) = dt;
    in.dt2(i) = dt * dt;
  }
  return in;
}

PredictiveEnsemble posterior_predictive(const Posterior& posterior, const StepInputs& inputs,
                                        const std::vector<std::string>& countries, std::uint64_t seed) {
  const std::size_t k = countries.size();
  if (posterior.layout.variant().countries != k || static_cast<std::size_t>(inputs.lag1.size()) != k) {
    throw Error(Errc::DimensionMismatch, "posterior, inputs and country list disagree on K");
  }
  if (posterior.size() < 1) throw Error(Errc::InvalidArgument, "empty posterior");
  PredictiveEnsemble ens;
  ens.target_year = inputs.year;
  ens.countries = countries;
  ens.values.resize(static_cast<Eigen::Index>(posterior.size()), static_cast<Eigen::Index>(k));
  ens.weights = posterior.weights;
  ens.kind = EnsembleKind::LogReturn;
  for (std::size_t n = 0; n < posterior.size(); ++n) {
    const ParameterVector p = posterior.draw(n);
    Rng rng = make_rng(seed, "predictive", n);
    for (std::size_t i = 0; i < k; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double mu = mean_value(p, i, inputs.time_index, inputs.lag1(r), inputs.lag2(r), inputs.dt(r), inputs.dt2(r));
      const double sd = std::sqrt(std::max(0.0, p.sigma2_of(i)));
      ens.values(static_cast<Eigen::Index>(n), r) = mu + sd * dist::sample_normal(rng, 0.0, 1.0);
    }
  }
  return ens;
}

CalibrationReport calibration_squared_error(std::span<const Interval> intervals, std::span<const double> observed,
                                            double nominal, std::string country) {
  if (intervals.size() != observed.size()) throw Error(Errc::DimensionMismatch, "interval and observation counts differ");
  CalibrationReport rep;
  rep.country = std::move(country);
  rep.nominal = nominal;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < observed.size(); ++t) {
    if (std::isnan(observed[t])) continue;
    ++rep.observations;
    if (intervals[t].lo <= observed[t] && observed[t] <= intervals[t].hi) ++hits;
  }
  if (rep.observations == 0) throw Error(Errc::InvalidArgument, "calibration needs at least one observation");
  rep.empirical = static_cast<double>(hits) / static_cast<double>(rep.observations);
  rep.squared_error = (rep.empirical - nominal) * (rep.empirical - nominal);
  return rep;
}

Fitter smc_fitter(VariantKind kind, smc::SmcConfig config) {
  return [kind, config](const AlignedDataset& train, std::uint64_t seed) {
    smc::SmcConfig c = config;
    c.seed = seed;
    return fit(train, kind, c);
  };
}

double ensemble_log_density(const PredictiveEnsemble& ensemble, const AlignedDataset& data, std::size_t column,
                            std::size_t* floored) {
  double total = 0.0;
  const auto c = static_cast<Eigen::Index>(column);
  for (std::size_t i = 0; i < data.country_count(); ++i) {
    if (!data.observed(i, column)) continue;
    const auto values = ensemble.column(i);
    const double bw = silverman_bandwidth(values, ensemble.weights);
    const KdeValue v = kde_log_density(values, ensemble.weights, bw, data.y(static_cast<Eigen::Index>(i), c));
    if (v.floored && floored) ++*floored;
    total += v.log_density;
  }
  return total;
}

ElpdResult lfo_cv_elpd(const AlignedDataset& data, const Fitter& fitter, std::size_t tau, std::uint64_t seed) {
  const std::size_t T = data.year_count();
  if (tau < 2 || tau > T) {
    throw Error(Errc::InvalidArgument, fmt::format("tau must lie in [2, {}], got {}", T, tau));
  }
  ElpdResult out;
  for (std::size_t t = tau - 1; t <= T - 1; ++t) {
    const Posterior post = fitter(data.slice_columns(0, t), derive_seed(seed, "lfo-fit", t));
    const auto ens = posterior_predictive(post, data.step_inputs(t), data.countries, derive_seed(seed, "lfo-predict", t));
    const double lpd = ensemble_log_density(ens, data, t, &out.floored);
    out.years.push_back(data.years[t]);
    out.per_year.push_back(lpd);
    out.elpd += lpd;
  }
  return out;
}

ElpdResult lfo_cv_elpd(const AlignedDataset& data, VariantKind kind, const smc::SmcConfig& config, std::size_t tau) {
  return lfo_cv_elpd(data, smc_fitter(kind, config), tau, config.seed);
}

ForecastRow summarize(const PredictiveEnsemble& ensemble, std::size_t k, double level, double alpha, Tail tail) {
  const auto values = ensemble.column(k);
  ForecastRow row;
  row.year = ensemble.target_year;
  row.country = ensemble.countries[k];
  row.mean = weighted_mean(values, ensemble.weights);
  row.median = weighted_quantile(values, ensemble.weights, 0.5);
  const Interval pi = prediction_interval(values, ensemble.weights, level);
  row.lo = pi.lo;
  row.hi = pi.hi;
  row.var = value_at_risk(values, ensemble.weights, alpha);
  row.es = expected_shortfall(values, ensemble.weights, alpha, tail);
  row.observed = kNaN;
  return row;
}

BacktestResult backtest(const AlignedDataset& data, const Fitter& fitter, const BacktestPlan& plan,
                        std::uint64_t seed) {
  BacktestResult out;
  if (plan.eval_years == 0) return out;
  if (plan.fit_columns < 1 || plan.fit_columns + plan.eval_years > data.year_count()) {
    throw Error(Errc::InvalidArgument, fmt::format("backtest plan needs {} + {} columns, dataset has {}",
                                                   plan.fit_columns, plan.eval_years, data.year_count()));
  }
  const std::size_t k = data.country_count();
  std::vector<std::vector<Interval>> intervals(k);
  std::vector<std::vector<double>> observed(k);

  std::optional<Posterior> posterior;
  if (plan.cadence == RefitCadence::FitOnce) {
    posterior = fitter(data.slice_columns(0, plan.fit_columns), derive_seed(seed, "backtest-fit", plan.fit_columns));
  }
  for (std::size_t e = 0; e < plan.eval_years; ++e) {
    const std::size_t c = plan.fit_columns + e;
    if (plan.cadence == RefitCadence::EveryYear) {
      posterior = fitter(data.slice_columns(0, c), derive_seed(seed, "backtest-fit", c));
    }
    const auto ens = posterior_predictive(*posterior, data.step_inputs(c), data.countries,
                                          derive_seed(seed, "backtest-predict", c));
    for (std::size_t i = 0; i < k; ++i) {
      ForecastRow row = summarize(ens, i, plan.level, plan.risk_alpha, Tail::LowerIsBad);
      if (data.observed(i, c)) row.observed = data.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      intervals[i].push_back({row.lo, row.hi});
      observed[i].push_back(row.observed);
      out.risk.push_back({plan.risk_alpha, row.var, row.es, Tail::LowerIsBad});
      out.rows.push_back(std::move(row));
    }

    const Eigen::VectorXd prev = data.level_prev.col(static_cast<Eigen::Index>(c));
    if (prev.size() == static_cast<Eigen::Index>(k) && prev.allFinite() && (prev.array() > 0.0).all()) {
      const auto global = aggregate_production(ens, std::span<const double>(prev.data(), k));
      ForecastRow row = summarize(global, 0, plan.level, plan.risk_alpha, Tail::LowerIsBad);
      const Eigen::VectorXd now = data.level.col(static_cast<Eigen::Index>(c));
      if (now.allFinite()) row.observed = now.sum();
      out.global_rows.push_back(std::move(row));
    }
    if (plan.score_elpd) {
      const double lpd = ensemble_log_density(ens, data, c, &out.elpd.floored);
      out.elpd.years.push_back(data.years[c]);
      out.elpd.per_year.push_back(lpd);
      out.elpd.elpd += lpd;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    bool any = false;
    for (double v : observed[i]) any = any || !std::isnan(v);
    if (any) out.calibration.push_back(calibration_squared_error(intervals[i], observed[i], plan.level, data.countries[i]));
  }
  return out;
}

PredictiveEnsemble aggregate_production(const PredictiveEnsemble& log_returns, std::span<const double> last_levels,
                                        std::span<const double> country_weights) {
  const std::size_t k = log_returns.countries.size();
  if (last_levels.size() != k) throw Error(Errc::MissingLevel, fmt::format("{} levels for {} countries", last_levels.size(), k));
  if (!country_weights.empty() && country_weights.size() != k) {
    throw Error(Errc::DimensionMismatch, "country weight count differs from K");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!(last_levels[i] > 0.0) || !std::isfinite(last_levels[i])) {
      throw Error(Errc::MissingLevel, fmt::format("no positive level for '{}'", log_returns.countries[i]));
    }
  }
  PredictiveEnsemble out;
  out.target_year = log_returns.target_year;
  out.countries = {"global"};
  out.weights = log_returns.weights;
  out.kind = EnsembleKind::ProductionLevel;
  out.values.resize(log_returns.values.rows(), 1);
  for (Eigen::Index n = 0; n < log_returns.values.rows(); ++n) {
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double w = country_weights.empty() ? 1.0 : country_weights[i];
      total += w * last_levels[i] * std::exp(log_returns.values(n, static_cast<Eigen::Index>(i)));
    }
    out.values(n, 0) = total;
  }
  return out;
}

}  // namespace agrisk
