#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>

#include <fmt/format.h>

#include "agrisk/csv.hpp"
#include "agrisk/error.hpp"
#include "agrisk/forecast.hpp"
#include "agrisk/inference.hpp"
#include "agrisk/oracle.hpp"
#include "agrisk/panel.hpp"
#include "agrisk/projection.hpp"
#include "agrisk/rng.hpp"
#include "agrisk/selection.hpp"
#include "json.hpp"

namespace agrisk::cli {

namespace {

using Json = nlohmann::ordered_json;

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, fmt::format("cannot read '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex(fnv1a(bytes));
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::uint64_t require_seed(const RunConfig& config) {
  if (!config.seed) throw ConfigError("seed", "a seed is required (config key `seed` or --seed)");
  return *config.seed;
}

/// Collects the manifest and writes it with the resolved config at the end
/// of a successful command.
class Run {
 public:
  Run(const RunConfig& config, std::string command) : config_(config), command_(std::move(command)) {
    std::error_code ec;
    std::filesystem::create_directories(config.output, ec);
    if (ec) throw Error(Errc::Io, fmt::format("cannot create output directory '{}'", config.output.string()));
    manifest_["command"] = command_;
    manifest_["tool_version"] = kToolVersion;
    manifest_["config_hash"] = hex(fnv1a(render(config, false)));
    manifest_["seed"] = config.seed ? Json(*config.seed) : Json(nullptr);
    Json inputs = Json::object();
    const auto add_input = [&](const char* key, const std::optional<std::filesystem::path>& p) {
      if (p && std::filesystem::exists(*p)) inputs[key] = {{"path", p->string()}, {"fnv1a", file_digest(*p)}};
    };
    add_input("paths.yield", config.paths.yield);
    add_input("paths.climate", config.paths.climate);
    add_input("paths.countries", config.paths.countries);
    add_input("paths.base", config.paths.base);
    add_input("paths.candidates", config.paths.candidates);
    add_input("paths.scenarios", config.paths.scenarios);
    add_input("paths.co2e", config.paths.co2e);
    add_input("paths.posterior", config.paths.posterior);
    add_input("paths.fixtures", config.paths.fixtures);
    manifest_["inputs"] = inputs;
  }

  std::filesystem::path path(const std::string& name) {
    outputs_.push_back(name);
    return config_.output / name;
  }
  Json& manifest() { return manifest_; }

  void finish() {
    {
      auto out = open_output(config_.output / "config.resolved.ini");
      out << render(config_);
    }
    manifest_["outputs"] = outputs_;
    auto out = open_output(config_.output / "manifest.json");
    out << manifest_.dump(2) << '\n';
  }

 private:
  const RunConfig& config_;
  std::string command_;
  Json manifest_;
  std::vector<std::string> outputs_;
};

struct Prepared {
  AlignedDataset data;
  std::vector<std::string> removed;
  std::string country_set = "all";
};

Prepared prepare(const RunConfig& config, Run& run) {
  require_path(config.paths.yield, "paths.yield");
  require_path(config.paths.climate, "paths.climate");
  const YieldPanel yield = load_yield_panel(*config.paths.yield);
  const ClimatePanel climate = load_climate_panel(*config.paths.climate);
  const VolatilityScreen screen = volatility_filter(yield, config.volatility_threshold);
  Prepared p{align(screen.panel, climate), screen.removed, "all"};
  if (config.paths.countries) {
    require_path(config.paths.countries, "paths.countries");
    const auto ids = load_country_list(*config.paths.countries);
    for (const auto& id : ids) {
      if (p.data.country_index(id) < 0) {
        throw ConfigError("paths.countries", fmt::format("country '{}' is not in the aligned data", id));
      }
    }
    p.data = p.data.subset_countries(ids);
    p.country_set = config.paths.countries->stem().string();
  }
  run.manifest()["data"] = {{"countries", p.data.countries},
                            {"removed_by_volatility_screen", p.removed},
                            {"nonpositive_levels", yield.nonpositive_levels},
                            {"first_year", p.data.years.empty() ? 0 : p.data.years.front()},
                            {"last_year", p.data.years.empty() ? 0 : p.data.years.back()},
                            {"observations", p.data.observation_count()},
                            {"fingerprint", hex(p.data.fingerprint())}};
  return p;
}

smc::SmcConfig smc_for(const RunConfig& config, std::string_view command) {
  smc::SmcConfig c = config.smc;
  c.seed = derive_seed(require_seed(config), command);
  c.threads = config.threads;
  return c;
}

std::string percent_label(const char* prefix, double fraction) {
  return fmt::format("{}{:02d}", prefix, static_cast<int>(std::lround(fraction * 100.0)));
}

void write_forecast_rows(const std::filesystem::path& path, const std::vector<ForecastRow>& rows, double level,
                         double alpha) {
  auto out = open_output(path);
  csv::Writer w(out);
  w.row({"year", "country", "mean", "median", percent_label("lo", level), percent_label("hi", level),
         percent_label("var", alpha), percent_label("es", alpha)});
  for (const auto& r : rows) {
    w.field(r.year).field(r.country).field(r.mean).field(r.median).field(r.lo).field(r.hi).field(r.var).field(r.es);
    w.end_row();
  }
}

}  // namespace

int cmd_fit(const RunConfig& config) {
  Run run(config, "fit");
  const Prepared p = prepare(config, run);
  const Posterior post = fit(p.data, config.variant, smc_for(config, "fit"));
  write_posterior_csv(run.path("posterior.csv"), post);
  write_trace_csv(run.path("diagnostics.csv"), post.trace);
  run.manifest()["results"] = {{"variant", variant_name(config.variant)},
                               {"log_evidence", post.log_evidence},
                               {"particles", post.size()},
                               {"stages", post.trace.size()}};
  run.finish();
  fmt::print("fit {}: log evidence {:.6f} over {} stages\n", variant_name(config.variant), post.log_evidence,
             post.trace.size());
  return 0;
}

int cmd_evidence(const RunConfig& config) {
  Run run(config, "evidence");
  const Prepared p = prepare(config, run);
  const smc::SmcConfig smc = smc_for(config, "evidence");
  std::vector<EvidenceRecord> records;
  for (VariantKind kind : config.variants) records.push_back(estimate_evidence(p.data, kind, smc, config.evidence_replicates));

  {
    auto out = open_output(run.path("evidence.csv"));
    csv::Writer w(out);
    w.row({"variant", "country_set", "countries", "log_evidence", "se", "replicates", "log_bayes_factor_vs_first"});
    for (const auto& r : records) {
      w.field(variant_name(r.variant)).field(p.country_set).field(r.country_set.size()).field(r.log_evidence);
      w.field(r.se_estimate).field(r.replicates.size()).field(log_bayes_factor(r, records.front()));
      w.end_row();
    }
  }
  {
    auto out = open_output(run.path("evidence_replicates.csv"));
    csv::Writer w(out);
    w.row({"variant", "replicate", "seed", "log_evidence"});
    for (const auto& r : records) {
      for (std::size_t i = 0; i < r.replicates.size(); ++i) {
        w.field(variant_name(r.variant)).field(i + 1).field(std::to_string(r.seed_set[i])).field(r.replicates[i]);
        w.end_row();
      }
    }
  }
  Json results = Json::array();
  for (const auto& r : records) {
    results.push_back({{"variant", variant_name(r.variant)},
                       {"log_evidence", r.log_evidence},
                       {"se", r.se_estimate},
                       {"smc_config_hash", hex(r.config_hash)}});
  }
  run.manifest()["results"] = results;
  run.finish();
  for (const auto& r : records) {
    fmt::print("{:<16} log evidence {:>14.4f}  se {:.4f}\n", variant_name(r.variant), r.log_evidence, r.se_estimate);
  }
  return 0;
}

int cmd_select(const RunConfig& config) {
  Run run(config, "select");
  require_path(config.paths.base, "paths.base");
  const Prepared p = prepare(config, run);
  const auto base = load_country_list(*config.paths.base);
  for (const auto& id : base) {
    if (p.data.country_index(id) < 0) throw ConfigError("paths.base", fmt::format("country '{}' is not in the data", id));
  }
  std::vector<std::string> candidates;
  if (config.paths.candidates) {
    require_path(config.paths.candidates, "paths.candidates");
    candidates = load_country_list(*config.paths.candidates);
    for (const auto& id : candidates) {
      if (p.data.country_index(id) < 0) {
        throw ConfigError("paths.candidates", fmt::format("country '{}' is not in the data", id));
      }
    }
  } else {
    const std::set<std::string> in_base(base.begin(), base.end());
    for (const auto& id : p.data.countries) {
      if (!in_base.count(id)) candidates.push_back(id);
    }
  }
  if (config.order_by_production) candidates = order_by_production(p.data, candidates);

  const SelectionResult result = forward_select(p.data, base, candidates, config.variant, smc_for(config, "select"),
                                                config.selection_replicates, config.tie_margin);
  {
    auto out = open_output(run.path("selected_countries.txt"));
    for (const auto& id : result.selected) out << id << '\n';
  }
  {
    auto out = open_output(run.path("selection_audit.csv"));
    csv::Writer w(out);
    w.row({"step", "candidate", "decision", "log_evidence_base", "log_evidence_with", "delta"});
    for (const auto& s : result.audit) {
      w.field(s.step).field(s.candidate).field(s.accepted ? "accept" : "reject").field(s.base.log_evidence);
      w.field(s.with.log_evidence).field(s.delta);
      w.end_row();
    }
  }
  run.manifest()["results"] = {{"variant", variant_name(config.variant)}, {"selected", result.selected}};
  run.finish();
  fmt::print("selected {} of {} countries\n", result.selected.size(), base.size() + candidates.size());
  return 0;
}

int cmd_backtest(const RunConfig& config) {
  Run run(config, "backtest");
  const Prepared p = prepare(config, run);
  BacktestPlan plan;
  plan.eval_years = config.eval_years;
  plan.fit_columns = config.fit_years;
  if (plan.fit_columns == 0) {
    if (config.eval_years >= p.data.year_count()) {
      throw ConfigError("backtest.eval_years", fmt::format("must be below the {} usable years", p.data.year_count()));
    }
    plan.fit_columns = p.data.year_count() - config.eval_years;
  }
  if (plan.fit_columns + plan.eval_years > p.data.year_count()) {
    throw ConfigError("backtest.fit_years",
                      fmt::format("fit + evaluation years exceed the {} usable years", p.data.year_count()));
  }
  plan.cadence = config.cadence;
  plan.level = config.level;
  plan.risk_alpha = config.risk_alpha;
  const smc::SmcConfig smc = smc_for(config, "backtest");
  const BacktestResult result = backtest(p.data, smc_fitter(config.variant, smc), plan, smc.seed);

  write_forecast_rows(run.path("forecast.csv"), result.rows, plan.level, plan.risk_alpha);
  if (!result.global_rows.empty()) {
    write_forecast_rows(run.path("forecast_global.csv"), result.global_rows, plan.level, plan.risk_alpha);
  }
  {
    auto out = open_output(run.path("calibration.csv"));
    csv::Writer w(out);
    w.row({"country", "nominal", "empirical", "squared_error", "observations"});
    for (const auto& c : result.calibration) {
      w.field(c.country).field(c.nominal).field(c.empirical).field(c.squared_error).field(c.observations);
      w.end_row();
    }
  }
  {
    auto out = open_output(run.path("elpd.csv"));
    csv::Writer w(out);
    w.row({"year", "log_predictive_density"});
    for (std::size_t i = 0; i < result.elpd.years.size(); ++i) {
      w.field(result.elpd.years[i]).field(result.elpd.per_year[i]);
      w.end_row();
    }
  }
  run.manifest()["results"] = {{"variant", variant_name(config.variant)},
                               {"fit_years", plan.fit_columns},
                               {"eval_years", plan.eval_years},
                               {"elpd", result.elpd.elpd},
                               {"kde_floor_hits", result.elpd.floored}};
  run.finish();
  if (result.elpd.floored > 0) {
    fmt::print(stderr, "warning: {} predictive densities fell below 1e-300 and were floored\n", result.elpd.floored);
  }
  fmt::print("backtest: {} evaluation years, elpd {:.4f}\n", plan.eval_years, result.elpd.elpd);
  return 0;
}

int cmd_project(const RunConfig& config) {
  Run run(config, "project");
  require_path(config.paths.scenarios, "paths.scenarios");
  if (config.paths.co2e) require_path(config.paths.co2e, "paths.co2e");
  const Prepared p = prepare(config, run);
  const ScenarioSet scenarios = load_scenarios(*config.paths.scenarios, config.paths.co2e);

  Posterior post = [&] {
    if (config.paths.posterior) {
      require_path(config.paths.posterior, "paths.posterior");
      return read_posterior_csv(*config.paths.posterior,
                                ParameterLayout(ModelVariant{config.variant, p.data.country_count()}, p.data.countries));
    }
    return fit(p.data, config.variant, smc_for(config, "project-fit"));
  }();
  if (!config.paths.posterior) write_posterior_csv(run.path("posterior.csv"), post);

  const ProjectionStart start = projection_start(p.data);
  ProjectionOptions options;
  options.horizon = config.horizon > 0 ? config.horizon : scenarios.trajectories.front().front().years.back();
  options.seed = derive_seed(require_seed(config), "project-paths");
  options.threads = config.threads;
  const ProjectionDraws draws = project(post, start, scenarios, options);

  {
    auto out = open_output(run.path("projection_curve.csv"));
    csv::Writer w(out);
    w.row({"scenario", "year", "mean", "q25", "q75", "climate_q25", "climate_q75", "climate_lo", "climate_hi",
           "total_lo", "total_hi", "es01"});
    for (const auto& s : percent_change_curve(draws)) {
      w.field(s.scenario).field(s.label).field(s.mean).field(s.q25).field(s.q75);
      if (s.has_climate_band) {
        w.field(s.climate_q25).field(s.climate_q75).field(s.climate_lo).field(s.climate_hi);
      } else {
        w.field("").field("").field("").field("");
      }
      w.field(s.total_lo).field(s.total_hi).field(s.es01);
      w.end_row();
    }
  }
  auto decades = config.decades;
  if (decades.empty()) decades.emplace_back(std::max(start.base_year + 1, options.horizon - 9), options.horizon);
  {
    auto out = open_output(run.path("decadal_density.csv"));
    csv::Writer w(out);
    w.row({"scenario", "decade", "climate_model", "particle", "value", "weight"});
    for (const auto& [a, b] : decades) {
      for (std::size_t s = 0; s < draws.scenarios.size(); ++s) {
        const PooledSample sample = decadal_density(draws, s, a, b);
        for (std::size_t q = 0; q < sample.values.size(); ++q) {
          w.field(draws.scenarios[s]).field(fmt::format("{}-{}", a, b));
          w.field(draws.climate_models[s][sample.model[q]]).field(q % draws.particle_count() + 1);
          w.field(sample.values[q]).field(sample.weights[q]);
          w.end_row();
        }
      }
    }
  }
  bool wrote_curve = false;
  const bool have_co2e = std::all_of(scenarios.co2e.begin(), scenarios.co2e.end(), [](const auto& v) { return !v.empty(); });
  if (have_co2e && scenarios.scenario_count() >= 2) {
    const auto& [a, b] = decades.back();
    auto out = open_output(run.path("es_curve.csv"));
    csv::Writer w(out);
    w.row({"scenario", "co2e", "mean", "climate_lo", "climate_hi", "total_lo", "total_hi", "es01"});
    for (const auto& pt : es_vs_co2e_curve(draws, scenarios, a, b, config.co2e_summary, 0.01)) {
      w.field(pt.scenario).field(pt.co2e).field(pt.summary.mean);
      if (pt.summary.has_climate_band) {
        w.field(pt.summary.climate_lo).field(pt.summary.climate_hi);
      } else {
        w.field("").field("");
      }
      w.field(pt.summary.total_lo).field(pt.summary.total_hi).field(pt.summary.es01);
      w.end_row();
    }
    wrote_curve = true;
  }
  run.manifest()["results"] = {{"variant", variant_name(config.variant)},
                               {"base_year", start.base_year},
                               {"horizon", options.horizon},
                               {"baseline_production", draws.baseline},
                               {"scenarios", draws.scenarios},
                               {"es_curve", wrote_curve}};
  run.finish();
  fmt::print("projected {} scenarios to {}\n", draws.scenarios.size(), options.horizon);
  return 0;
}

int cmd_verify(const RunConfig& config) {
  Run run(config, "verify");
  std::vector<oracle::ConjugateSpec> fixtures;
  std::vector<std::optional<double>> expected;
  if (config.paths.fixtures) {
    require_path(config.paths.fixtures, "paths.fixtures");
    try {
      std::ifstream in(*config.paths.fixtures);
      const Json doc = Json::parse(in);
      const Json& list = doc.is_array() ? doc : doc.at("fixtures");
      for (const auto& item : list) {
        oracle::ConjugateSpec spec;
        spec.prior_mean = item.at("prior_mean").get<double>();
        spec.prior_var = item.at("prior_var").get<double>();
        spec.obs_var = item.at("obs_var").get<double>();
        spec.observations = item.at("observations").get<std::vector<double>>();
        spec.validate();
        fixtures.push_back(std::move(spec));
        expected.push_back(item.contains("log_evidence") ? std::optional<double>(item["log_evidence"].get<double>())
                                                         : std::nullopt);
      }
    } catch (const Json::exception& e) {
      throw ConfigError("paths.fixtures", e.what());
    } catch (const Error& e) {
      throw ConfigError("paths.fixtures", e.what());
    }
  } else {
    fixtures = oracle::default_conjugate_fixtures();
    expected.assign(fixtures.size(), std::nullopt);
  }
  oracle::VerifyOptions options;
  options.particles = config.verify_particles;
  options.seed = derive_seed(config.seed.value_or(1), "verify");
  options.threads = config.threads;
  const auto checks = oracle::run_oracle_suite(fixtures, expected, options);

  bool all = true;
  fmt::print("{:<46} {:>16} {:>16} {:>10} {:>10}  {}\n", "check", "measured", "reference", "error", "tolerance",
             "status");
  {
    auto out = open_output(run.path("verify.csv"));
    csv::Writer w(out);
    w.row({"check", "measured", "reference", "error", "tolerance", "status"});
    for (const auto& c : checks) {
      all = all && c.passed;
      fmt::print("{:<46} {:>16.10f} {:>16.10f} {:>10.3g} {:>10.3g}  {}\n", c.name, c.measured, c.reference, c.error(),
                 c.tolerance, c.passed ? "PASS" : "FAIL");
      w.field(c.name).field(c.measured).field(c.reference).field(c.error()).field(c.tolerance);
      w.field(c.passed ? "pass" : "fail");
      w.end_row();
    }
  }
  run.manifest()["results"] = {{"checks", checks.size()}, {"all_passed", all}};
  run.finish();
  return all ? 0 : 3;
}

}  // namespace agrisk::cli
