#include "agrisk/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "agrisk/csv.hpp"
#include "agrisk/error.hpp"
#include "agrisk/rng.hpp"

namespace agrisk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ptrdiff_t find_index(const std::vector<std::string>& ids, const std::string& id) {
  const auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : std::distance(ids.begin(), it);
}

void check_years(const std::vector<int>& years) {
  for (std::size_t t = 1; t < years.size(); ++t) {
    if (years[t] != years[t - 1] + 1) {
      throw Error(Errc::InvalidArgument, fmt::format("years must be consecutive, found {} after {}", years[t],
                                                     years[t - 1]));
    }
  }
}

struct LongTable {
  std::vector<std::string> countries;
  std::vector<int> years;
  Eigen::MatrixXd values;
};

LongTable read_long(const std::filesystem::path& path, const CsvSchema& schema) {
  const csv::Table table = csv::read(path);
  const std::size_t c_col = table.column(schema.country);
  const std::size_t y_col = table.column(schema.year);
  const std::size_t v_col = table.column(schema.value);

  std::map<std::pair<std::string, int>, double> cells;
  std::set<std::string> countries;
  int y_min = std::numeric_limits<int>::max();
  int y_max = std::numeric_limits<int>::min();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = fmt::format("{}:{}", path.string(), table.line_numbers[r]);
    const std::string& country = row[c_col];
    if (country.empty()) throw Error(Errc::MalformedFile, where + ": empty country id");
    const auto year = static_cast<int>(csv::parse_int(row[y_col], where));
    const double value = csv::parse_double(row[v_col], where);
    if (!cells.emplace(std::make_pair(country, year), value).second) {
      throw Error(Errc::DuplicateKey, fmt::format("{}: duplicate ({}, {})", where, country, year));
    }
    countries.insert(country);
    y_min = std::min(y_min, year);
    y_max = std::max(y_max, year);
  }
  LongTable out;
  if (cells.empty()) return out;
  out.countries.assign(countries.begin(), countries.end());
  for (int y = y_min; y <= y_max; ++y) out.years.push_back(y);
  out.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(out.countries.size()),
                                         static_cast<Eigen::Index>(out.years.size()), kNaN);
  for (const auto& [key, value] : cells) {
    const auto i = find_index(out.countries, key.first);
    out.values(i, key.second - y_min) = value;
  }
  return out;
}

}  // namespace

std::ptrdiff_t YieldPanel::country_index(const std::string& id) const { return find_index(countries, id); }

YieldPanel make_yield_panel(std::vector<std::string> countries, std::vector<int> years, Eigen::MatrixXd levels) {
  check_years(years);
  if (levels.rows() != static_cast<Eigen::Index>(countries.size()) ||
      levels.cols() != static_cast<Eigen::Index>(years.size())) {
    throw Error(Errc::DimensionMismatch, "levels must be K x T_raw");
  }
  YieldPanel panel;
  panel.countries = std::move(countries);
  panel.years = std::move(years);
  const Eigen::Index k = levels.rows();
  const Eigen::Index t_raw = levels.cols();
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index t = 0; t < t_raw; ++t) {
      double& v = levels(i, t);
      if (!std::isnan(v) && !(v > 0.0)) {
        ++panel.nonpositive_levels;
        v = kNaN;
      }
    }
  }
  const Eigen::Index t_ret = std::max<Eigen::Index>(t_raw - 1, 0);
  panel.log_returns = Eigen::MatrixXd::Constant(k, t_ret, kNaN);
  panel.missing_mask = BoolMatrix::Constant(k, t_ret, true);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index t = 0; t < t_ret; ++t) {
      const double prev = levels(i, t);
      const double next = levels(i, t + 1);
      if (std::isfinite(prev) && std::isfinite(next)) {
        panel.log_returns(i, t) = std::log(next / prev);
        panel.missing_mask(i, t) = false;
      }
    }
  }
  panel.levels = std::move(levels);
  return panel;
}

YieldPanel load_yield_panel(const std::filesystem::path& path, const CsvSchema& schema) {
  LongTable t = read_long(path, schema);
  return make_yield_panel(std::move(t.countries), std::move(t.years), std::move(t.values));
}

void write_yield_panel(const std::filesystem::path& path, const YieldPanel& panel) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write '{}'", path.string()));
  csv::Writer w(out);
  w.row({"country", "year", "value"});
  for (std::size_t i = 0; i < panel.countries.size(); ++i) {
    for (std::size_t t = 0; t < panel.years.size(); ++t) {
      w.field(panel.countries[i]).field(panel.years[t]).field(panel.levels(static_cast<Eigen::Index>(i),
                                                                           static_cast<Eigen::Index>(t)));
      w.end_row();
    }
  }
}

std::ptrdiff_t ClimatePanel::country_index(const std::string& id) const { return find_index(countries, id); }

std::ptrdiff_t ClimatePanel::year_index(int year) const {
  if (years.empty() || year < years.front() || year > years.back()) return -1;
  return year - years.front();
}

ClimatePanel derive_climate_regressors(std::vector<std::string> countries, std::vector<int> years,
                                       Eigen::MatrixXd mean_temp) {
  check_years(years);
  if (years.size() < 2) throw Error(Errc::InsufficientYears, "climate panel needs at least two years");
  if (mean_temp.rows() != static_cast<Eigen::Index>(countries.size()) ||
      mean_temp.cols() != static_cast<Eigen::Index>(years.size())) {
    throw Error(Errc::DimensionMismatch, "mean_temp must be K x T_raw");
  }
  ClimatePanel panel;
  panel.countries = std::move(countries);
  panel.years = std::move(years);
  const Eigen::Index t_d = mean_temp.cols() - 1;
  panel.delta_t = mean_temp.rightCols(t_d) - mean_temp.leftCols(t_d);
  panel.delta_t_sq = panel.delta_t.array().square().matrix();
  panel.mean_temp = std::move(mean_temp);
  return panel;
}

CsvSchema climate_schema() { return CsvSchema{"country", "year", "mean_temp"}; }

ClimatePanel load_climate_panel(const std::filesystem::path& path, const CsvSchema& schema) {
  LongTable t = read_long(path, schema);
  return derive_climate_regressors(std::move(t.countries), std::move(t.years), std::move(t.values));
}

VolatilityScreen volatility_filter(const YieldPanel& panel, double threshold) {
  if (!(threshold > 0.0)) throw Error(Errc::InvalidArgument, "volatility threshold must be positive");
  VolatilityScreen screen;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < panel.countries.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index t = 0; t < panel.log_returns.cols(); ++t) {
      if (!panel.missing_mask(row, t)) {
        sum += panel.log_returns(row, t);
        ++n;
      }
    }
    double sd = 0.0;
    if (n >= 2) {
      const double mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (Eigen::Index t = 0; t < panel.log_returns.cols(); ++t) {
        if (!panel.missing_mask(row, t)) ss += (panel.log_returns(row, t) - mean) * (panel.log_returns(row, t) - mean);
      }
      sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    screen.sds.push_back(sd);
    if (sd > threshold) {
      screen.removed.push_back(panel.countries[i]);
    } else {
      keep.push_back(row);
    }
  }
  if (keep.empty()) throw Error(Errc::AllCountriesRemoved, fmt::format("threshold {} removes every country", threshold));

  YieldPanel& out = screen.panel;
  out.years = panel.years;
  out.levels.resize(static_cast<Eigen::Index>(keep.size()), panel.levels.cols());
  out.log_returns.resize(static_cast<Eigen::Index>(keep.size()), panel.log_returns.cols());
  out.missing_mask.resize(static_cast<Eigen::Index>(keep.size()), panel.missing_mask.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto dst = static_cast<Eigen::Index>(r);
    out.countries.push_back(panel.countries[static_cast<std::size_t>(keep[r])]);
    out.levels.row(dst) = panel.levels.row(keep[r]);
    out.log_returns.row(dst) = panel.log_returns.row(keep[r]);
    out.missing_mask.row(dst) = panel.missing_mask.row(keep[r]);
  }
  out.nonpositive_levels = panel.nonpositive_levels;
  return screen;
}

bool AlignedDataset::observed(std::size_t i, std::size_t t) const {
  const auto r = static_cast<Eigen::Index>(i);
  const auto c = static_cast<Eigen::Index>(t);
  return std::isfinite(y(r, c)) && std::isfinite(y_lag1(r, c)) && std::isfinite(y_lag2(r, c)) &&
         std::isfinite(dt(r, c)) && std::isfinite(dt2(r, c));
}

std::size_t AlignedDataset::observation_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < country_count(); ++i) {
    for (std::size_t t = 0; t < year_count(); ++t) n += observed(i, t) ? 1 : 0;
  }
  return n;
}

AlignedDataset AlignedDataset::slice_columns(std::size_t begin, std::size_t end) const {
  if (begin > end || end > year_count()) throw Error(Errc::InvalidArgument, "column slice out of range");
  const auto b = static_cast<Eigen::Index>(begin);
  const auto n = static_cast<Eigen::Index>(end - begin);
  AlignedDataset out;
  out.countries = countries;
  out.years.assign(years.begin() + b, years.begin() + b + n);
  out.time_index.assign(time_index.begin() + b, time_index.begin() + b + n);
  out.y = y.middleCols(b, n);
  out.y_lag1 = y_lag1.middleCols(b, n);
  out.y_lag2 = y_lag2.middleCols(b, n);
  out.dt = dt.middleCols(b, n);
  out.dt2 = dt2.middleCols(b, n);
  out.level = level.middleCols(b, n);
  out.level_prev = level_prev.middleCols(b, n);
  return out;
}

AlignedDataset AlignedDataset::subset_countries(const std::vector<std::string>& ids) const {
  AlignedDataset out;
  out.years = years;
  out.time_index = time_index;
  const auto k = static_cast<Eigen::Index>(ids.size());
  const auto t = static_cast<Eigen::Index>(year_count());
  for (auto* m : {&out.y, &out.y_lag1, &out.y_lag2, &out.dt, &out.dt2, &out.level, &out.level_prev}) m->resize(k, t);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto src = country_index(ids[r]);
    if (src < 0) throw Error(Errc::InvalidArgument, fmt::format("country '{}' not in dataset", ids[r]));
    const auto dst = static_cast<Eigen::Index>(r);
    out.countries.push_back(ids[r]);
    out.y.row(dst) = y.row(src);
    out.y_lag1.row(dst) = y_lag1.row(src);
    out.y_lag2.row(dst) = y_lag2.row(src);
    out.dt.row(dst) = dt.row(src);
    out.dt2.row(dst) = dt2.row(src);
    out.level.row(dst) = level.row(src);
    out.level_prev.row(dst) = level_prev.row(src);
  }
  return out;
}

StepInputs AlignedDataset::step_inputs(std::size_t column) const {
  if (column >= year_count()) throw Error(Errc::InvalidArgument, "step column out of range");
  const auto c = static_cast<Eigen::Index>(column);
  StepInputs in;
  in.time_index = time_index[column];
  in.year = years[column];
  in.lag1 = y_lag1.col(c);
  in.lag2 = y_lag2.col(c);
  in.dt = dt.col(c);
  in.dt2 = dt2.col(c);
  return in;
}

std::ptrdiff_t AlignedDataset::country_index(const std::string& id) const { return find_index(countries, id); }

std::uint64_t AlignedDataset::fingerprint() const {
  std::uint64_t h = fnv1a("aligned");
  for (const auto& c : countries) h = fnv1a(c + '\n', h);
  for (std::size_t t = 0; t < years.size(); ++t) {
    h = fnv1a(fmt::format("{}:{};", years[t], time_index[t]), h);
  }
  for (const auto* m : {&y, &y_lag1, &y_lag2, &dt, &dt2}) {
    for (Eigen::Index j = 0; j < m->cols(); ++j) {
      for (Eigen::Index i = 0; i < m->rows(); ++i) {
        double v = (*m)(i, j);
        if (std::isnan(v)) v = kNaN;
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h);
      }
    }
  }
  return h;
}

AlignedDataset align(const YieldPanel& yield_panel, const ClimatePanel& climate_panel) {
  std::vector<std::string> countries;
  for (const auto& c : yield_panel.countries) {
    if (climate_panel.country_index(c) >= 0) countries.push_back(c);
  }
  if (countries.empty()) throw Error(Errc::EmptyIntersection, "yield and climate panels share no country");
  if (yield_panel.years.size() < 2 || climate_panel.years.size() < 2) {
    throw Error(Errc::EmptyIntersection, "panels need at least one log-return year");
  }
  // Log-returns and temperature differences are labelled by the later year.
  const int first = std::max(yield_panel.years.front(), climate_panel.years.front()) + 1;
  const int last = std::min(yield_panel.years.back(), climate_panel.years.back());
  const int return_years = last - first + 1;
  if (return_years < 3) {
    throw Error(Errc::EmptyIntersection, "overlapping years leave no usable column after two lags");
  }
  const auto k = static_cast<Eigen::Index>(countries.size());
  const auto t = static_cast<Eigen::Index>(return_years - 2);

  AlignedDataset out;
  out.countries = countries;
  for (auto* m : {&out.y, &out.y_lag1, &out.y_lag2, &out.dt, &out.dt2, &out.level, &out.level_prev}) {
    m->setConstant(k, t, kNaN);
  }
  const int y0 = yield_panel.years.front();
  const int c0 = climate_panel.years.front();
  for (Eigen::Index col = 0; col < t; ++col) {
    const int year = first + 2 + static_cast<int>(col);
    out.years.push_back(year);
    out.time_index.push_back(year - first + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto yi = yield_panel.country_index(countries[static_cast<std::size_t>(i)]);
      const auto ci = climate_panel.country_index(countries[static_cast<std::size_t>(i)]);
      out.y(i, col) = yield_panel.log_returns(yi, year - y0 - 1);
      out.y_lag1(i, col) = yield_panel.log_returns(yi, year - y0 - 2);
      out.y_lag2(i, col) = yield_panel.log_returns(yi, year - y0 - 3);
      out.dt(i, col) = climate_panel.delta_t(ci, year - c0 - 1);
      out.dt2(i, col) = climate_panel.delta_t_sq(ci, year - c0 - 1);
      out.level(i, col) = yield_panel.levels(yi, year - y0);
      out.level_prev(i, col) = yield_panel.levels(yi, year - y0 - 1);
    }
  }
  return out;
}

std::vector<std::string> load_country_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, fmt::format("cannot open '{}'", path.string()));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    ids.push_back(line.substr(b, e - b + 1));
  }
  return ids;
}

}  // namespace agrisk
