#include "synthetic_files.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "agrisk/csv.hpp"
#include "agrisk/distributions.hpp"
#include "agrisk/rng.hpp"

namespace agrisk::testing {

YieldPanel levels_of(const AlignedDataset& data, int first_year) {
  const auto K = static_cast<Eigen::Index>(data.country_count());
  const auto T = static_cast<Eigen::Index>(data.year_count());
  Eigen::MatrixXd levels(K, T + 3);
  for (Eigen::Index i = 0; i < K; ++i) {
    levels(i, 2) = data.level_prev(i, 0);
    levels(i, 1) = levels(i, 2) / std::exp(data.y_lag1(i, 0));
    levels(i, 0) = levels(i, 1) / std::exp(data.y_lag2(i, 0));
    for (Eigen::Index t = 0; t < T; ++t) levels(i, t + 3) = data.level(i, t);
  }
  std::vector<int> years;
  for (Eigen::Index t = 0; t < T + 3; ++t) years.push_back(first_year + static_cast<int>(t));
  return make_yield_panel(data.countries, years, levels);
}

void write_climate_csv(const std::filesystem::path& path, const ClimatePanel& climate) {
  std::ofstream out(path);
  csv::Writer w(out);
  w.row({"country", "year", "mean_temp"});
  for (std::size_t i = 0; i < climate.countries.size(); ++i) {
    for (std::size_t t = 0; t < climate.years.size(); ++t) {
      w.field(climate.countries[i]).field(climate.years[t]);
      w.field(climate.mean_temp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
      w.end_row();
    }
  }
}

void write_scenarios_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  csv::Writer w(out);
  w.row({"scenario", "climate_model", "country", "year", "mean_temp"});
  for (const auto& tr : trajectories) {
    for (std::size_t i = 0; i < tr.panel.countries.size(); ++i) {
      for (std::size_t t = 0; t < tr.panel.years.size(); ++t) {
        w.field(tr.scenario).field(tr.climate_model).field(tr.panel.countries[i]).field(tr.panel.years[t]);
        w.field(tr.panel.mean_temp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
        w.end_row();
      }
    }
  }
}

void write_co2e_csv(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>>& pathways) {
  std::ofstream out(path);
  csv::Writer w(out);
  w.row({"scenario", "year", "co2e_ppm"});
  for (const auto& [scenario, points] : pathways) {
    for (const auto& [year, ppm] : points) {
      w.field(scenario).field(year).field(ppm);
      w.end_row();
    }
  }
}

ClimatePanel random_walk_climate(const std::vector<std::string>& countries, int first_year, int last_year,
                                 double start, double step_sd, std::uint64_t seed) {
  Rng rng = make_rng(seed, "test-climate");
  const auto K = static_cast<Eigen::Index>(countries.size());
  const auto T = static_cast<Eigen::Index>(last_year - first_year + 1);
  Eigen::MatrixXd temp(K, T);
  for (Eigen::Index i = 0; i < K; ++i) {
    temp(i, 0) = start;
    for (Eigen::Index t = 1; t < T; ++t) temp(i, t) = temp(i, t - 1) + dist::sample_normal(rng, 0.0, step_sd);
  }
  std::vector<int> years;
  for (int y = first_year; y <= last_year; ++y) years.push_back(y);
  return derive_climate_regressors(countries, years, temp);
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("agrisk-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace agrisk::testing
