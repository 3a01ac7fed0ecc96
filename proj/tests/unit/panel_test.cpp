#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "agrisk/csv.hpp"
#include "agrisk/error.hpp"
#include "agrisk/panel.hpp"
#include "agrisk/rng.hpp"
#include "agrisk/distributions.hpp"
#include "synthetic_files.hpp"

namespace agrisk {
namespace {

std::filesystem::path write_text(const std::string& name, const std::string& text) {
  const auto dir = testing::scratch_dir("panel-" + name);
  const auto path = dir / "data.csv";
  std::ofstream(path) << text;
  return path;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no agrisk::Error thrown";
  return Errc::InvalidArgument;
}

TEST(Csv, QuotedFieldsAndDoubledQuotes) {
  const auto fields = csv::split_line(R"(a,"b,c","d""e",)");
  ASSERT_EQ(fields.size(), 4u);
  EXPECT_EQ(fields[1], "b,c");
  EXPECT_EQ(fields[2], "d\"e");
  EXPECT_EQ(fields[3], "");
}

TEST(Csv, DoubleRoundTripIsExact) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)}) {
    EXPECT_EQ(csv::parse_double(csv::format_double(v), "x"), v);
  }
  EXPECT_TRUE(std::isnan(csv::parse_double("", "x")));
  EXPECT_EQ(csv::format_double(std::nan("")), "");
}

TEST(Csv, RaggedRowIsMalformed) {
  std::istringstream in("a,b\n1,2\n3\n");
  EXPECT_EQ(code_of([&] { csv::parse(in, "mem"); }), Errc::MalformedFile);
}

TEST(LoadYield, LogReturnDefinition) {
  const auto p = write_text("one", "country,year,value\nAUS,2000,100\nAUS,2001,110\n");
  const YieldPanel panel = load_yield_panel(p);
  ASSERT_EQ(panel.log_returns.cols(), 1);
  EXPECT_NEAR(panel.log_returns(0, 0), 0.09531017980432493, 1e-15);
  EXPECT_FALSE(panel.missing_mask(0, 0));
}

TEST(LoadYield, NonPositiveLevelForcesMissing) {
  const auto p = write_text("zero", "country,year,value\nX,2000,100\nX,2001,0\nX,2002,120\n");
  const YieldPanel panel = load_yield_panel(p);
  EXPECT_TRUE(panel.missing_mask(0, 0));
  EXPECT_TRUE(panel.missing_mask(0, 1));
  EXPECT_TRUE(std::isnan(panel.log_returns(0, 0)));
  EXPECT_EQ(panel.nonpositive_levels, 1u);
}

TEST(LoadYield, SortedByCountryAndGapsBecomeMissing) {
  const auto p = write_text("sort", "country,year,value\nZ,2001,5\nA,2003,2\nA,2000,1\nZ,2000,4\n");
  const YieldPanel panel = load_yield_panel(p);
  EXPECT_EQ(panel.countries, (std::vector<std::string>{"A", "Z"}));
  EXPECT_EQ(panel.years, (std::vector<int>{2000, 2001, 2002, 2003}));
  EXPECT_TRUE(std::isnan(panel.levels(0, 1)));
  EXPECT_TRUE(panel.missing_mask(0, 0));
  EXPECT_FALSE(panel.missing_mask(1, 0));
}

TEST(LoadYield, Errors) {
  EXPECT_EQ(code_of([] { load_yield_panel(write_text("dup", "country,year,value\nA,2000,1\nA,2000,2\n")); }),
            Errc::DuplicateKey);
  EXPECT_EQ(code_of([] { load_yield_panel(write_text("bad", "country,year,value\nA,20x0,1\n")); }),
            Errc::MalformedFile);
  EXPECT_EQ(code_of([] { load_yield_panel(write_text("col", "country,yr,value\nA,2000,1\n")); }),
            Errc::MalformedFile);
  EXPECT_EQ(code_of([] { load_yield_panel("/nonexistent/yield.csv"); }), Errc::Io);
}

TEST(LoadYield, WriteReloadIsBitExact) {
  Rng rng = make_rng(7, "panel-roundtrip");
  Eigen::MatrixXd levels(3, 12);
  for (Eigen::Index i = 0; i < levels.size(); ++i) levels(i) = std::exp(dist::sample_normal(rng, 1.0, 0.7));
  levels(1, 4) = std::nan("");
  const YieldPanel panel = make_yield_panel({"A", "B", "C"}, {1990, 1991, 1992, 1993, 1994, 1995, 1996, 1997, 1998,
                                                              1999, 2000, 2001},
                                            levels);
  const auto path = testing::scratch_dir("panel-roundtrip") / "y.csv";
  write_yield_panel(path, panel);
  const YieldPanel back = load_yield_panel(path);
  EXPECT_EQ(back.countries, panel.countries);
  EXPECT_EQ(back.years, panel.years);
  for (Eigen::Index i = 0; i < levels.size(); ++i) {
    if (std::isnan(levels(i))) {
      EXPECT_TRUE(std::isnan(back.levels(i)));
    } else {
      EXPECT_EQ(back.levels(i), levels(i));
    }
  }
  EXPECT_TRUE((back.missing_mask == panel.missing_mask).all());
}

TEST(ClimateRegressors, Differences) {
  Eigen::MatrixXd t(3, 3);
  t << 15.0, 15.5, 15.5, 20, 20, 20, 10, 12, 9;
  const ClimatePanel c = derive_climate_regressors({"a", "b", "c"}, {1, 2, 3}, t);
  EXPECT_DOUBLE_EQ(c.delta_t(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c.delta_t_sq(0, 0), 0.25);
  EXPECT_EQ(c.delta_t(1, 0), 0.0);
  EXPECT_EQ(c.delta_t(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(c.delta_t(2, 0), 2.0);
  EXPECT_DOUBLE_EQ(c.delta_t(2, 1), -3.0);
  EXPECT_DOUBLE_EQ(c.delta_t_sq(2, 0), 4.0);
  EXPECT_DOUBLE_EQ(c.delta_t_sq(2, 1), 9.0);
}

TEST(ClimateRegressors, SingleYearIsInsufficient) {
  Eigen::MatrixXd t(1, 1);
  t << 15.0;
  EXPECT_EQ(code_of([&] { derive_climate_regressors({"a"}, {2000}, t); }), Errc::InsufficientYears);
}

YieldPanel panel_from_returns(const std::vector<std::vector<double>>& returns) {
  const auto K = static_cast<Eigen::Index>(returns.size());
  const auto T = static_cast<Eigen::Index>(returns.front().size()) + 1;
  Eigen::MatrixXd levels(K, T);
  std::vector<std::string> ids;
  std::vector<int> years;
  for (Eigen::Index t = 0; t < T; ++t) years.push_back(2000 + static_cast<int>(t));
  for (Eigen::Index i = 0; i < K; ++i) {
    ids.push_back("C" + std::to_string(i));
    levels(i, 0) = 1.0;
    for (Eigen::Index t = 1; t < T; ++t) levels(i, t) = levels(i, t - 1) * std::exp(returns[i][t - 1]);
  }
  return make_yield_panel(ids, years, levels);
}

TEST(VolatilityFilter, Examples) {
  const YieldPanel p = panel_from_returns({{2, -2, 2, -2}, {0, 0, 0, 0}});
  const VolatilityScreen s = volatility_filter(p, 0.5);
  EXPECT_EQ(s.removed, std::vector<std::string>{"C0"});
  EXPECT_EQ(s.panel.countries, std::vector<std::string>{"C1"});
  EXPECT_NEAR(s.sds[0], std::sqrt(16.0 / 3.0), 1e-12);

  const YieldPanel zeros = panel_from_returns({{0, 0, 0}});
  EXPECT_TRUE(volatility_filter(zeros, 1e-9).removed.empty());
  EXPECT_EQ(code_of([&] { volatility_filter(p, 0.0); }), Errc::InvalidArgument);
  const YieldPanel wild = panel_from_returns({{2, -2, 2, -2}});
  EXPECT_EQ(code_of([&] { volatility_filter(wild, 0.5); }), Errc::AllCountriesRemoved);
}

TEST(VolatilityFilter, InjectedSeriesAgainstDirectSd) {
  Rng rng = make_rng(11, "vol");
  std::vector<std::vector<double>> r(8, std::vector<double>(60));
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (auto& v : r[i]) v = dist::sample_normal(rng, 0.0, i == 5 ? 1.0 : 0.1);
  }
  const VolatilityScreen s = volatility_filter(panel_from_returns(r), 0.5);
  for (std::size_t i = 0; i < r.size(); ++i) {
    double m = 0, ss = 0;
    for (double v : r[i]) m += v;
    m /= static_cast<double>(r[i].size());
    for (double v : r[i]) ss += (v - m) * (v - m);
    EXPECT_NEAR(s.sds[i], std::sqrt(ss / static_cast<double>(r[i].size() - 1)), 1e-9);
  }
  EXPECT_EQ(s.removed, std::vector<std::string>{"C5"});
}

TEST(VolatilityFilter, LoweringThresholdIsMonotone) {
  Rng rng = make_rng(12, "vol-mono");
  std::vector<std::vector<double>> r(15, std::vector<double>(30));
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (auto& v : r[i]) v = dist::sample_normal(rng, 0.0, 0.05 * static_cast<double>(i + 1));
  }
  const YieldPanel p = panel_from_returns(r);
  std::vector<std::string> prev_removed;
  for (double th : {2.0, 1.0, 0.6, 0.4, 0.2}) {
    const auto removed = volatility_filter(p, th).removed;
    for (const auto& id : prev_removed) {
      EXPECT_NE(std::find(removed.begin(), removed.end(), id), removed.end()) << id << " at " << th;
    }
    prev_removed = removed;
  }
}

TEST(Align, LagConsumptionAndIntersection) {
  const YieldPanel y = panel_from_returns({{0.1, 0.2, 0.3, 0.4, 0.5}, {0.0, 0.1, 0.0, 0.1, 0.0}});
  Eigen::MatrixXd temp = Eigen::MatrixXd::Constant(1, 6, 15.0);
  temp(0, 5) = 16.0;
  const ClimatePanel c = derive_climate_regressors({"C1"}, {2000, 2001, 2002, 2003, 2004, 2005}, temp);
  const AlignedDataset d = align(y, c);
  EXPECT_EQ(d.countries, std::vector<std::string>{"C1"});
  EXPECT_EQ(d.year_count(), 3u);
  EXPECT_EQ(d.years, (std::vector<int>{2003, 2004, 2005}));
  EXPECT_EQ(d.time_index, (std::vector<int>{3, 4, 5}));
  EXPECT_DOUBLE_EQ(d.y(0, 0), 0.0);
  EXPECT_NEAR(d.y_lag1(0, 0), 0.1, 1e-14);
  EXPECT_DOUBLE_EQ(d.y_lag2(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(d.dt(0, 2), 1.0);
}

TEST(Align, SixtyYearSpanCounts) {
  std::vector<std::vector<double>> r(57, std::vector<double>(57, 0.01));
  YieldPanel y = panel_from_returns(r);
  for (auto& yr : y.years) yr += 1961 - 2000;
  const ClimatePanel c =
      testing::random_walk_climate(y.countries, 1961, 2018, 15.0, 1.0, 3);
  EXPECT_EQ(y.country_count(), 57u);
  EXPECT_EQ(y.years.size(), 58u);
  EXPECT_EQ(y.log_returns.cols(), 57);
  const AlignedDataset d = align(y, c);
  EXPECT_EQ(d.year_count(), 55u);
  EXPECT_EQ(d.years.front(), 1964);
  EXPECT_EQ(d.time_index.front(), 3);
  EXPECT_EQ(d.time_index.back(), 57);
}

TEST(Align, ShiftInvariantHoldsExactly) {
  Rng rng = make_rng(5, "shift");
  std::vector<std::vector<double>> r(4, std::vector<double>(20));
  for (auto& row : r) {
    for (auto& v : row) v = dist::sample_normal(rng, 0.0, 0.2);
  }
  YieldPanel y = panel_from_returns(r);
  const ClimatePanel c = testing::random_walk_climate(y.countries, 2000, 2020, 10.0, 1.0, 4);
  const AlignedDataset d = align(y, c);
  for (std::size_t i = 0; i < d.country_count(); ++i) {
    for (std::size_t t = 1; t < d.year_count(); ++t) {
      const auto I = static_cast<Eigen::Index>(i), Tt = static_cast<Eigen::Index>(t);
      EXPECT_EQ(d.y_lag1(I, Tt), d.y(I, Tt - 1));
      if (t >= 2) EXPECT_EQ(d.y_lag2(I, Tt), d.y(I, Tt - 2));
    }
  }
}

TEST(Align, DisjointPanelsAreRejected) {
  const YieldPanel y = panel_from_returns({{0.1, 0.2, 0.3, 0.4}});
  const ClimatePanel c = testing::random_walk_climate({"other"}, 2000, 2004, 10.0, 1.0, 1);
  EXPECT_EQ(code_of([&] { align(y, c); }), Errc::EmptyIntersection);
}

TEST(CountryList, CommentsAndBlanks) {
  const auto p = write_text("list", "# base set\nUSA\n\n  CHN  \n# trailing\nIND\n");
  EXPECT_EQ(load_country_list(p), (std::vector<std::string>{"USA", "CHN", "IND"}));
}

}  // namespace
}  // namespace agrisk
