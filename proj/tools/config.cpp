#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "agrisk/csv.hpp"
#include "agrisk/error.hpp"

namespace agrisk::cli {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value, T min_value) {
  T out{};
  const std::string v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, fmt::format("expected an integer, got '{}'", value));
  }
  if (out < min_value) throw ConfigError(key, fmt::format("must be at least {}", min_value));
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(key, fmt::format("expected a number, got '{}'", value));
  }
  return out;
}

double parse_fraction(const std::string& key, const std::string& value) {
  const double x = parse_real(key, value);
  if (!(x > 0.0 && x < 1.0)) throw ConfigError(key, "must lie strictly between 0 and 1");
  return x;
}

VariantKind parse_variant_key(const std::string& key, const std::string& value) {
  try {
    return parse_variant(trim(value));
  } catch (const Error&) {
    throw ConfigError(key, fmt::format("unknown variant '{}'; expected one of pooled, hier-intercept, "
                                       "hier-variance, hier-iv, independent-iv, full-hier",
                                       value));
  }
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool runtime = false;  // excluded from the run identity
};

using OptPath = std::optional<std::filesystem::path> RunConfig::Paths::*;

Field path_field(const std::string& name, OptPath member) {
  const std::string key = "paths." + name;
  return {key, [member](RunConfig& c, const std::string& v) { c.paths.*member = std::filesystem::path(trim(v)); },
          [member](const RunConfig& c) { return (c.paths.*member) ? (c.paths.*member)->string() : std::string(); }};
}

std::string real(double v) { return csv::format_double(v); }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"seed",
                 [](RunConfig& c, const std::string& v) { c.seed = parse_integer<std::uint64_t>("seed", v, 0); },
                 [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }});
    f.push_back({"threads",
                 [](RunConfig& c, const std::string& v) { c.threads = parse_integer<unsigned>("threads", v, 1); },
                 [](const RunConfig& c) { return std::to_string(c.threads); }, true});
    f.push_back({"output", [](RunConfig& c, const std::string& v) { c.output = trim(v); },
                 [](const RunConfig& c) { return c.output.string(); }, true});
    f.push_back(path_field("yield", &RunConfig::Paths::yield));
    f.push_back(path_field("climate", &RunConfig::Paths::climate));
    f.push_back(path_field("countries", &RunConfig::Paths::countries));
    f.push_back(path_field("base", &RunConfig::Paths::base));
    f.push_back(path_field("candidates", &RunConfig::Paths::candidates));
    f.push_back(path_field("scenarios", &RunConfig::Paths::scenarios));
    f.push_back(path_field("co2e", &RunConfig::Paths::co2e));
    f.push_back(path_field("posterior", &RunConfig::Paths::posterior));
    f.push_back(path_field("fixtures", &RunConfig::Paths::fixtures));
    f.push_back({"model.variant",
                 [](RunConfig& c, const std::string& v) { c.variant = parse_variant_key("model.variant", v); },
                 [](const RunConfig& c) { return std::string(variant_name(c.variant)); }});
    f.push_back({"model.variants",
                 [](RunConfig& c, const std::string& v) {
                   c.variants.clear();
                   for (const auto& item : split_list(v)) c.variants.push_back(parse_variant_key("model.variants", item));
                   if (c.variants.empty()) throw ConfigError("model.variants", "list is empty");
                 },
                 [](const RunConfig& c) {
                   std::vector<std::string> names;
                   for (auto k : c.variants) names.emplace_back(variant_name(k));
                   return join(names);
                 }});
    f.push_back({"model.volatility_threshold",
                 [](RunConfig& c, const std::string& v) {
                   c.volatility_threshold = parse_real("model.volatility_threshold", v);
                   if (!(c.volatility_threshold > 0.0)) throw ConfigError("model.volatility_threshold", "must be positive");
                 },
                 [](const RunConfig& c) { return real(c.volatility_threshold); }});
    f.push_back({"smc.particles",
                 [](RunConfig& c, const std::string& v) {
                   c.smc.n_particles = parse_integer<std::size_t>("smc.particles", v, 2);
                 },
                 [](const RunConfig& c) { return std::to_string(c.smc.n_particles); }});
    f.push_back({"smc.ess_threshold",
                 [](RunConfig& c, const std::string& v) {
                   c.smc.ess_threshold = parse_real("smc.ess_threshold", v);
                   if (!(c.smc.ess_threshold > 0.0 && c.smc.ess_threshold <= 1.0)) {
                     throw ConfigError("smc.ess_threshold", "must lie in (0, 1]");
                   }
                 },
                 [](const RunConfig& c) { return real(c.smc.ess_threshold); }});
    f.push_back({"smc.ess_target",
                 [](RunConfig& c, const std::string& v) { c.smc.ess_target = parse_fraction("smc.ess_target", v); },
                 [](const RunConfig& c) { return real(c.smc.ess_target); }});
    f.push_back({"smc.scale_candidates",
                 [](RunConfig& c, const std::string& v) {
                   c.smc.scale_candidates.clear();
                   for (const auto& item : split_list(v)) {
                     const double x = parse_real("smc.scale_candidates", item);
                     if (!(x > 0.0)) throw ConfigError("smc.scale_candidates", "entries must be positive");
                     c.smc.scale_candidates.push_back(x);
                   }
                   if (c.smc.scale_candidates.empty()) throw ConfigError("smc.scale_candidates", "list is empty");
                 },
                 [](const RunConfig& c) {
                   std::vector<std::string> items;
                   for (double x : c.smc.scale_candidates) items.push_back(real(x));
                   return join(items);
                 }});
    f.push_back({"smc.esjd_target",
                 [](RunConfig& c, const std::string& v) {
                   c.smc.esjd_target_fraction = parse_real("smc.esjd_target", v);
                   if (!(c.smc.esjd_target_fraction > 0.0 && c.smc.esjd_target_fraction <= 1.0)) {
                     throw ConfigError("smc.esjd_target", "must lie in (0, 1]");
                   }
                 },
                 [](const RunConfig& c) { return real(c.smc.esjd_target_fraction); }});
    f.push_back({"smc.max_move_iters",
                 [](RunConfig& c, const std::string& v) {
                   c.smc.max_move_iters = parse_integer<int>("smc.max_move_iters", v, 1);
                 },
                 [](const RunConfig& c) { return std::to_string(c.smc.max_move_iters); }});
    f.push_back({"evidence.replicates",
                 [](RunConfig& c, const std::string& v) {
                   c.evidence_replicates = parse_integer<std::size_t>("evidence.replicates", v, 1);
                 },
                 [](const RunConfig& c) { return std::to_string(c.evidence_replicates); }});
    f.push_back({"selection.replicates",
                 [](RunConfig& c, const std::string& v) {
                   c.selection_replicates = parse_integer<std::size_t>("selection.replicates", v, 1);
                 },
                 [](const RunConfig& c) { return std::to_string(c.selection_replicates); }});
    f.push_back({"selection.tie_margin",
                 [](RunConfig& c, const std::string& v) {
                   c.tie_margin = parse_real("selection.tie_margin", v);
                   if (c.tie_margin < 0.0) throw ConfigError("selection.tie_margin", "must be non-negative");
                 },
                 [](const RunConfig& c) { return real(c.tie_margin); }});
    f.push_back({"selection.order",
                 [](RunConfig& c, const std::string& v) {
                   const std::string s = trim(v);
                   if (s == "production") {
                     c.order_by_production = true;
                   } else if (s == "given") {
                     c.order_by_production = false;
                   } else {
                     throw ConfigError("selection.order", "expected 'production' or 'given'");
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.order_by_production ? "production" : "given"); }});
    f.push_back({"backtest.fit_years",
                 [](RunConfig& c, const std::string& v) {
                   c.fit_years = parse_integer<std::size_t>("backtest.fit_years", v, 0);
                 },
                 [](const RunConfig& c) { return std::to_string(c.fit_years); }});
    f.push_back({"backtest.eval_years",
                 [](RunConfig& c, const std::string& v) {
                   c.eval_years = parse_integer<std::size_t>("backtest.eval_years", v, 0);
                 },
                 [](const RunConfig& c) { return std::to_string(c.eval_years); }});
    f.push_back({"backtest.cadence",
                 [](RunConfig& c, const std::string& v) {
                   const std::string s = trim(v);
                   if (s == "every-year") {
                     c.cadence = RefitCadence::EveryYear;
                   } else if (s == "fit-once") {
                     c.cadence = RefitCadence::FitOnce;
                   } else {
                     throw ConfigError("backtest.cadence", "expected 'every-year' or 'fit-once'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.cadence == RefitCadence::EveryYear ? "every-year" : "fit-once");
                 }});
    f.push_back({"backtest.level",
                 [](RunConfig& c, const std::string& v) { c.level = parse_fraction("backtest.level", v); },
                 [](const RunConfig& c) { return real(c.level); }});
    f.push_back({"backtest.alpha",
                 [](RunConfig& c, const std::string& v) { c.risk_alpha = parse_fraction("backtest.alpha", v); },
                 [](const RunConfig& c) { return real(c.risk_alpha); }});
    f.push_back({"projection.horizon",
                 [](RunConfig& c, const std::string& v) { c.horizon = parse_integer<int>("projection.horizon", v, 0); },
                 [](const RunConfig& c) { return std::to_string(c.horizon); }});
    f.push_back({"projection.decades",
                 [](RunConfig& c, const std::string& v) {
                   c.decades.clear();
                   for (const auto& item : split_list(v)) {
                     const auto dash = item.find('-');
                     if (dash == std::string::npos) {
                       throw ConfigError("projection.decades", fmt::format("'{}' is not FIRST-LAST", item));
                     }
                     const int a = parse_integer<int>("projection.decades", item.substr(0, dash), 0);
                     const int b = parse_integer<int>("projection.decades", item.substr(dash + 1), 0);
                     if (b < a) throw ConfigError("projection.decades", fmt::format("'{}' ends before it starts", item));
                     c.decades.emplace_back(a, b);
                   }
                 },
                 [](const RunConfig& c) {
                   std::vector<std::string> items;
                   for (const auto& [a, b] : c.decades) items.push_back(fmt::format("{}-{}", a, b));
                   return join(items);
                 }});
    f.push_back({"projection.co2e_summary",
                 [](RunConfig& c, const std::string& v) {
                   const std::string s = trim(v);
                   if (s == "decade-mean") {
                     c.co2e_summary = Co2eSummary::DecadeMean;
                   } else if (s == "end-year") {
                     c.co2e_summary = Co2eSummary::EndYear;
                   } else {
                     throw ConfigError("projection.co2e_summary", "expected 'decade-mean' or 'end-year'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.co2e_summary == Co2eSummary::DecadeMean ? "decade-mean" : "end-year");
                 }});
    f.push_back({"verify.particles",
                 [](RunConfig& c, const std::string& v) {
                   c.verify_particles = parse_integer<std::size_t>("verify.particles", v, 2);
                 },
                 [](const RunConfig& c) { return std::to_string(c.verify_particles); }});
    return f;
  }();
  return table;
}

}  // namespace

KeyValues read_ini(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("--config", fmt::format("'{}' does not exist", path.string()));
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("--config", e.what());
  }
  KeyValues out;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      out[name] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw ConfigError(name + "." + key, "nested sections are not supported");
      out[name + "." + key] = leaf.data();
    }
  }
  return out;
}

RunConfig resolve(const KeyValues& file_values, const KeyValues& overrides,
                  const std::optional<std::filesystem::path>& config_dir) {
  RunConfig config;
  auto apply = [&](const KeyValues& values, bool from_file) {
    for (const auto& [key, value] : values) {
      const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return f.key == key; });
      if (it == fields().end()) throw ConfigError(key, "unknown configuration key");
      std::string v = value;
      const bool is_path = key.rfind("paths.", 0) == 0 || key == "output";
      if (from_file && is_path && config_dir && !trim(v).empty()) {
        const std::filesystem::path p(trim(v));
        if (p.is_relative()) v = (*config_dir / p).lexically_normal().string();
      }
      it->set(config, v);
    }
  };
  apply(file_values, true);
  apply(overrides, false);
  if (config.variants.empty()) config.variants = {config.variant};
  return config;
}

std::string render(const RunConfig& config, bool include_runtime) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.runtime && !include_runtime) continue;
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      out += fmt::format("\n[{}]\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", name, f.get(config));
  }
  return out;
}

void require_path(const std::optional<std::filesystem::path>& value, const std::string& key) {
  if (!value || value->empty()) throw ConfigError(key, "required path is not set");
  if (!std::filesystem::exists(*value)) throw ConfigError(key, fmt::format("'{}' does not exist", value->string()));
}

}  // namespace agrisk::cli
