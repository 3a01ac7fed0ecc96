#include "agrisk/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "agrisk/csv.hpp"
#include "agrisk/distributions.hpp"
#include "agrisk/error.hpp"
#include "agrisk/parallel.hpp"
#include "agrisk/risk.hpp"
#include "agrisk/rng.hpp"

namespace agrisk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Series = std::map<int, double>;
using CountrySeries = std::map<std::string, Series>;

ClimatePanel build_trajectory(const CountrySeries& rows, int first, int last) {
  std::vector<std::string> countries;
  for (const auto& [id, _] : rows) countries.push_back(id);
  std::vector<int> years(static_cast<std::size_t>(last - first + 1));
  std::iota(years.begin(), years.end(), first);
  Eigen::MatrixXd temps = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(countries.size()),
                                                    static_cast<Eigen::Index>(years.size()), kNaN);
  Eigen::Index i = 0;
  for (const auto& [id, series] : rows) {
    for (const auto& [year, value] : series) temps(i, year - first) = value;
    ++i;
  }
  return derive_climate_regressors(std::move(countries), std::move(years), std::move(temps));
}

}  // namespace

std::ptrdiff_t ScenarioSet::scenario_index(const std::string& id) const {
  const auto it = std::find(scenarios.begin(), scenarios.end(), id);
  return it == scenarios.end() ? -1 : it - scenarios.begin();
}

ScenarioSet load_scenarios(const std::filesystem::path& trajectories, const std::optional<std::filesystem::path>& co2e) {
  const csv::Table table = csv::read(trajectories);
  const std::size_t c_scen = table.column("scenario"), c_model = table.column("climate_model"),
                    c_country = table.column("country"), c_year = table.column("year"),
                    c_temp = table.column("mean_temp");
  std::map<std::string, std::map<std::string, CountrySeries>> grouped;
  int first = std::numeric_limits<int>::max(), last = std::numeric_limits<int>::min();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = fmt::format("{}:{}", trajectories.string(), table.line_numbers[r]);
    const int year = static_cast<int>(csv::parse_int(row[c_year], where));
    const double temp = csv::parse_double(row[c_temp], where);
    auto& series = grouped[row[c_scen]][row[c_model]][row[c_country]];
    if (!series.emplace(year, temp).second) {
      throw Error(Errc::DuplicateKey, fmt::format("{}: repeated ({}, {}, {}, {})", where, row[c_scen], row[c_model],
                                                  row[c_country], year));
    }
    first = std::min(first, year);
    last = std::max(last, year);
  }
  if (grouped.empty()) throw Error(Errc::MalformedFile, fmt::format("{}: no trajectories", trajectories.string()));

  ScenarioSet set;
  std::vector<std::string> reference_countries;
  for (const auto& [scenario, models] : grouped) {
    set.scenarios.push_back(scenario);
    set.climate_models.emplace_back();
    set.trajectories.emplace_back();
    for (const auto& [model, rows] : models) {
      std::vector<std::string> ids;
      for (const auto& [id, _] : rows) ids.push_back(id);
      if (reference_countries.empty()) reference_countries = ids;
      if (ids != reference_countries) {
        throw Error(Errc::MalformedFile,
                    fmt::format("trajectory ({}, {}) covers a different country set", scenario, model));
      }
      for (const auto& [id, series] : rows) {
        if (series.begin()->first != first || series.rbegin()->first != last ||
            series.size() != static_cast<std::size_t>(last - first + 1)) {
          throw Error(Errc::MalformedFile, fmt::format("trajectory ({}, {}, {}) does not span {}-{}", scenario, model,
                                                       id, first, last));
        }
      }
      set.climate_models.back().push_back(model);
      set.trajectories.back().push_back(build_trajectory(rows, first, last));
    }
  }
  set.co2e.resize(set.scenarios.size());
  if (co2e) {
    const csv::Table ct = csv::read(*co2e);
    const std::size_t s_col = ct.column("scenario"), y_col = ct.column("year"), v_col = ct.column("co2e_ppm");
    for (std::size_t r = 0; r < ct.rows.size(); ++r) {
      const auto& row = ct.rows[r];
      const std::string where = fmt::format("{}:{}", co2e->string(), ct.line_numbers[r]);
      const std::ptrdiff_t s = set.scenario_index(row[s_col]);
      if (s < 0) throw Error(Errc::MalformedFile, fmt::format("{}: scenario '{}' has no trajectories", where, row[s_col]));
      set.co2e[static_cast<std::size_t>(s)].emplace_back(static_cast<int>(csv::parse_int(row[y_col], where)),
                                                         csv::parse_double(row[v_col], where));
    }
    for (auto& path : set.co2e) {
      std::sort(path.begin(), path.end());
      for (std::size_t j = 1; j < path.size(); ++j) {
        if (path[j].first == path[j - 1].first) {
          throw Error(Errc::DuplicateKey, fmt::format("{}: repeated CO2e year {}", co2e->string(), path[j].first));
        }
      }
    }
  }
  return set;
}

ProjectionStart projection_start(const AlignedDataset& data) {
  if (data.year_count() == 0) throw Error(Errc::InvalidArgument, "dataset has no columns");
  const std::size_t last = data.year_count() - 1;
  const auto c = static_cast<Eigen::Index>(last);
  ProjectionStart start;
  start.base_year = data.years[last];
  start.base_time_index = data.time_index[last];
  start.countries = data.countries;
  start.lag1 = data.y.col(c);
  start.lag2 = data.y_lag1.col(c);
  start.base_level = data.level.col(c);
  for (std::size_t i = 0; i < data.country_count(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (!std::isfinite(start.lag1(r)) || !std::isfinite(start.lag2(r))) {
      throw Error(Errc::MissingRegressor, fmt::format("'{}' lacks log-returns at {}", data.countries[i], start.base_year));
    }
    if (!(start.base_level(r) > 0.0) || !std::isfinite(start.base_level(r))) {
      throw Error(Errc::MissingLevel, fmt::format("'{}' has no level at {}", data.countries[i], start.base_year));
    }
  }
  return start;
}

std::ptrdiff_t ProjectionDraws::year_index(int year) const {
  const auto it = std::find(years.begin(), years.end(), year);
  return it == years.end() ? -1 : it - years.begin();
}

ProjectionDraws project(const Posterior& posterior, const ProjectionStart& start, const ScenarioSet& scenarios,
                        const ProjectionOptions& options) {
  const std::size_t k = start.countries.size();
  if (posterior.layout.variant().countries != k) {
    throw Error(Errc::DimensionMismatch, "posterior and projection start disagree on K");
  }
  if (options.horizon <= start.base_year) {
    throw Error(Errc::InvalidArgument, fmt::format("horizon {} is not after the base year {}", options.horizon,
                                                   start.base_year));
  }
  const std::size_t n_years = static_cast<std::size_t>(options.horizon - start.base_year);
  const std::size_t n = posterior.size();

  ProjectionDraws out;
  out.scenarios = scenarios.scenarios;
  out.climate_models = scenarios.climate_models;
  out.countries = start.countries;
  out.base_year = start.base_year;
  out.baseline = start.base_level.sum();
  out.particle_weights = posterior.weights;
  for (std::size_t j = 0; j < n_years; ++j) out.years.push_back(start.base_year + 1 + static_cast<int>(j));

  // Temperature differences per task as a K x years matrix.
  struct Task {
    std::size_t scenario, model;
    Eigen::MatrixXd dt;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < scenarios.scenario_count(); ++s) {
    for (std::size_t m = 0; m < scenarios.trajectories[s].size(); ++m) {
      const ClimatePanel& traj = scenarios.trajectories[s][m];
      Task task{s, m, Eigen::MatrixXd(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n_years))};
      for (std::size_t i = 0; i < k; ++i) {
        const std::ptrdiff_t ci = traj.country_index(start.countries[i]);
        if (ci < 0) {
          throw Error(Errc::MissingClimateForTarget, fmt::format("trajectory ({}, {}) lacks country '{}'",
                                                                 scenarios.scenarios[s],
                                                                 scenarios.climate_models[s][m], start.countries[i]));
        }
        for (std::size_t j = 0; j < n_years; ++j) {
          const std::ptrdiff_t yi = traj.year_index(out.years[j]);
          const double dt = yi >= 1 ? traj.delta_t(ci, yi - 1) : kNaN;
          if (!std::isfinite(dt)) {
            throw Error(Errc::HorizonExceedsTrajectory,
                        fmt::format("trajectory ({}, {}) has no temperature change for '{}' into {}",
                                    scenarios.scenarios[s], scenarios.climate_models[s][m], start.countries[i],
                                    out.years[j]));
          }
          task.dt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dt;
        }
      }
      tasks.push_back(std::move(task));
    }
  }

  std::vector<ParameterVector> params;
  params.reserve(n);
  for (std::size_t p = 0; p < n; ++p) params.push_back(posterior.draw(p));

  out.global.resize(scenarios.scenario_count());
  if (options.keep_country_draws) out.country.resize(scenarios.scenario_count());
  for (std::size_t s = 0; s < scenarios.scenario_count(); ++s) {
    const std::size_t models = scenarios.trajectories[s].size();
    out.global[s].assign(models, Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_years)));
    if (options.keep_country_draws) {
      out.country[s].assign(models, std::vector<Eigen::MatrixXd>(n));
    }
  }

  parallel_for(tasks.size(), options.threads, [&](std::size_t t) {
    const Task& task = tasks[t];
    Eigen::MatrixXd& global = out.global[task.scenario][task.model];
    for (std::size_t p = 0; p < n; ++p) {
      const ParameterVector& theta = params[p];
      Rng rng = make_rng(options.seed, "projection", p);
      Eigen::VectorXd lag1 = start.lag1, lag2 = start.lag2, level = start.base_level;
      Eigen::MatrixXd* returns = nullptr;
      if (options.keep_country_draws) {
        returns = &out.country[task.scenario][task.model][p];
        returns->resize(static_cast<Eigen::Index>(n_years), static_cast<Eigen::Index>(k));
      }
      for (std::size_t j = 0; j < n_years; ++j) {
        const double tidx = static_cast<double>(start.base_time_index) + static_cast<double>(j + 1);
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          const double dt = task.dt(r, static_cast<Eigen::Index>(j));
          const double mu = mean_value(theta, i, tidx, lag1(r), lag2(r), dt, dt * dt);
          const double sd = std::sqrt(std::max(0.0, theta.sigma2_of(i)));
          const double y = mu + sd * dist::sample_normal(rng, 0.0, 1.0);
          lag2(r) = lag1(r);
          lag1(r) = y;
          level(r) *= std::exp(y);
          total += level(r);
          if (returns) (*returns)(static_cast<Eigen::Index>(j), r) = y;
        }
        global(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = total;
      }
    }
  });
  return out;
}

ProjectionSummary summarize_models(const std::vector<std::vector<double>>& values,
                                   const std::vector<double>& particle_weights) {
  const std::size_t models = values.size();
  if (models == 0) throw Error(Errc::InvalidArgument, "no climate models to summarize");
  const double total_w = std::accumulate(particle_weights.begin(), particle_weights.end(), 0.0);
  PooledSample pooled;
  std::vector<double> means;
  for (std::size_t m = 0; m < models; ++m) {
    if (values[m].size() != particle_weights.size()) throw Error(Errc::DimensionMismatch, "draws and weights differ");
    double mean = 0.0;
    for (std::size_t p = 0; p < values[m].size(); ++p) {
      mean += particle_weights[p] / total_w * values[m][p];
      pooled.values.push_back(values[m][p]);
      pooled.weights.push_back(particle_weights[p] / total_w / static_cast<double>(models));
    }
    means.push_back(mean);
  }
  ProjectionSummary out;
  out.mean = weighted_mean(pooled.values, pooled.weights);
  const double ps[] = {0.025, 0.25, 0.75, 0.975};
  const auto q = weighted_quantiles(pooled.values, pooled.weights, ps);
  out.total_lo = q[0];
  out.q25 = q[1];
  out.q75 = q[2];
  out.total_hi = q[3];
  out.es01 = expected_shortfall(pooled.values, pooled.weights, 0.01, Tail::LowerIsBad);
  if (models >= 2) {
    const std::vector<double> equal(models, 1.0 / static_cast<double>(models));
    const auto cq = weighted_quantiles(means, equal, ps);
    out.has_climate_band = true;
    out.climate_lo = cq[0];
    out.climate_q25 = cq[1];
    out.climate_q75 = cq[2];
    out.climate_hi = cq[3];
  }
  return out;
}

std::vector<ProjectionSummary> decompose_uncertainty(const ProjectionDraws& draws, ProjectionUnit unit) {
  if (unit == ProjectionUnit::PercentChange && !(draws.baseline > 0.0)) {
    throw Error(Errc::ZeroBaseline, "baseline production is not positive");
  }
  std::vector<ProjectionSummary> out;
  for (std::size_t s = 0; s < draws.scenarios.size(); ++s) {
    for (std::size_t j = 0; j < draws.years.size(); ++j) {
      std::vector<std::vector<double>> values;
      for (const auto& block : draws.global[s]) {
        std::vector<double> col(static_cast<std::size_t>(block.rows()));
        for (Eigen::Index p = 0; p < block.rows(); ++p) {
          const double v = block(p, static_cast<Eigen::Index>(j));
          col[static_cast<std::size_t>(p)] = unit == ProjectionUnit::Level ? v : 100.0 * (v / draws.baseline - 1.0);
        }
        values.push_back(std::move(col));
      }
      ProjectionSummary summary = summarize_models(values, draws.particle_weights);
      summary.scenario = draws.scenarios[s];
      summary.label = std::to_string(draws.years[j]);
      summary.unit = unit;
      out.push_back(std::move(summary));
    }
  }
  return out;
}

std::vector<ProjectionSummary> percent_change_curve(const ProjectionDraws& draws) {
  return decompose_uncertainty(draws, ProjectionUnit::PercentChange);
}

PooledSample decadal_density(const ProjectionDraws& draws, std::size_t scenario, int first_year, int last_year) {
  const std::ptrdiff_t a = draws.year_index(first_year), b = draws.year_index(last_year);
  if (a < 0 || b < 0 || b < a) {
    throw Error(Errc::InvalidArgument, fmt::format("decade {}-{} is outside the projected years", first_year, last_year));
  }
  if (scenario >= draws.scenarios.size()) throw Error(Errc::InvalidArgument, "scenario index out of range");
  const auto& blocks = draws.global[scenario];
  const double total_w = std::accumulate(draws.particle_weights.begin(), draws.particle_weights.end(), 0.0);
  PooledSample out;
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    for (Eigen::Index p = 0; p < blocks[m].rows(); ++p) {
      out.values.push_back(blocks[m].row(p).segment(a, b - a + 1).mean());
      out.weights.push_back(draws.particle_weights[static_cast<std::size_t>(p)] / total_w /
                            static_cast<double>(blocks.size()));
      out.model.push_back(m);
    }
  }
  return out;
}

std::vector<EsCurvePoint> es_vs_co2e_curve(const ProjectionDraws& draws, const ScenarioSet& scenarios, int first_year,
                                           int last_year, Co2eSummary x, double alpha) {
  if (draws.scenarios.size() < 2) throw Error(Errc::InvalidArgument, "an ES curve needs at least two scenarios");
  if (!(draws.baseline > 0.0)) throw Error(Errc::ZeroBaseline, "baseline production is not positive");
  std::vector<EsCurvePoint> out;
  for (std::size_t s = 0; s < draws.scenarios.size(); ++s) {
    const std::ptrdiff_t si = scenarios.scenario_index(draws.scenarios[s]);
    if (si < 0) throw Error(Errc::InvalidArgument, fmt::format("scenario '{}' missing from set", draws.scenarios[s]));
    const auto& path = scenarios.co2e[static_cast<std::size_t>(si)];
    double co2e = kNaN;
    if (x == Co2eSummary::EndYear) {
      for (const auto& [year, value] : path) {
        if (year == last_year) co2e = value;
      }
    } else {
      double sum = 0.0;
      int count = 0;
      for (const auto& [year, value] : path) {
        if (year >= first_year && year <= last_year) {
          sum += value;
          ++count;
        }
      }
      if (count > 0) co2e = sum / count;
    }
    if (std::isnan(co2e)) {
      throw Error(Errc::InvalidArgument, fmt::format("scenario '{}' has no CO2e values for {}-{}", draws.scenarios[s],
                                                     first_year, last_year));
    }
    const PooledSample decade = decadal_density(draws, s, first_year, last_year);
    std::vector<std::vector<double>> values(draws.global[s].size());
    for (std::size_t q = 0; q < decade.values.size(); ++q) {
      values[decade.model[q]].push_back(100.0 * (decade.values[q] / draws.baseline - 1.0));
    }
    ProjectionSummary summary = summarize_models(values, draws.particle_weights);
    std::vector<double> pooled, weights;
    for (std::size_t q = 0; q < decade.values.size(); ++q) {
      pooled.push_back(100.0 * (decade.values[q] / draws.baseline - 1.0));
      weights.push_back(decade.weights[q]);
    }
    summary.es01 = expected_shortfall(pooled, weights, alpha, Tail::LowerIsBad);
    summary.scenario = draws.scenarios[s];
    summary.label = fmt::format("{}-{}", first_year, last_year);
    summary.unit = ProjectionUnit::PercentChange;
    out.push_back({draws.scenarios[s], co2e, std::move(summary)});
  }
  std::stable_sort(out.begin(), out.end(), [](const EsCurvePoint& a, const EsCurvePoint& b) { return a.co2e < b.co2e; });
  return out;
}

}  // namespace agrisk
