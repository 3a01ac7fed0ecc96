#include <cstring>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "agrisk/error.hpp"
#include "commands.hpp"
#include "config.hpp"

namespace {

using agrisk::Errc;

int exit_code(Errc code) {
  switch (code) {
    case Errc::Io:
    case Errc::MalformedFile:
    case Errc::DuplicateKey:
      return 4;
    case Errc::AllWeightsZero:
    case Errc::NonPositiveVariance:
    case Errc::UnnormalizedWeights:
    case Errc::DimensionMismatch:
      return 3;
    default:
      return 2;
  }
}

/// Splits `--section.key=value` overrides from the arguments CLI11 handles.
agrisk::cli::KeyValues take_overrides(std::vector<std::string>& args) {
  agrisk::cli::KeyValues out;
  std::vector<std::string> rest;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    const bool dotted = a.rfind("--", 0) == 0 && eq != std::string::npos && a.substr(2, eq - 2).find('.') != std::string::npos;
    if (dotted) {
      out[a.substr(2, eq - 2)] = a.substr(eq + 1);
    } else {
      rest.push_back(a);
    }
  }
  args = std::move(rest);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  agrisk::cli::KeyValues overrides = take_overrides(args);

  CLI::App app{"Bayesian crop-yield risk: fit, compare, backtest and project", "agrisk"};
  app.set_version_flag("--version", agrisk::cli::kToolVersion);
  app.require_subcommand(1);

  std::optional<std::string> config_path, output;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  using Command = std::function<int(const agrisk::cli::RunConfig&)>;
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"fit", "Fit one model variant and write the weighted posterior", agrisk::cli::cmd_fit},
      {"evidence", "Estimate log evidence for each configured variant", agrisk::cli::cmd_evidence},
      {"select", "Forward-select countries by log evidence", agrisk::cli::cmd_select},
      {"backtest", "Rolling one-step-ahead forecasts, calibration, risk and elpd", agrisk::cli::cmd_backtest},
      {"project", "Project global production under climate scenarios", agrisk::cli::cmd_project},
      {"verify", "Run the analytic oracle suite", agrisk::cli::cmd_verify},
  };
  std::optional<Command> chosen;
  std::string chosen_name;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI configuration file");
    sub->add_option("--output", output, "Output directory");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--threads", threads, "Worker cap (results do not depend on it)")->check(CLI::PositiveNumber);
    sub->footer("Any config key can be overridden as --section.key=value.");
    sub->callback([&chosen, &chosen_name, fn = fn, name = std::string(name)] {
      chosen = fn;
      chosen_name = name;
    });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    agrisk::cli::KeyValues file_values;
    std::optional<std::filesystem::path> config_dir;
    if (config_path) {
      file_values = agrisk::cli::read_ini(*config_path);
      config_dir = std::filesystem::absolute(*config_path).parent_path();
    }
    if (seed) overrides["seed"] = std::to_string(*seed);
    if (threads) overrides["threads"] = std::to_string(*threads);
    if (output) overrides["output"] = *output;
    const agrisk::cli::RunConfig config = agrisk::cli::resolve(file_values, overrides, config_dir);
    if (!config.seed && chosen_name != "verify") {
      throw agrisk::cli::ConfigError("seed", "a seed is required (config key `seed` or --seed)");
    }
    return (*chosen)(config);
  } catch (const agrisk::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const agrisk::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
