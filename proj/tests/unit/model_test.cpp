#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "agrisk/distributions.hpp"
#include "agrisk/error.hpp"
#include "agrisk/model.hpp"
#include "agrisk/oracle.hpp"
#include "synthetic_files.hpp"

namespace agrisk {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AlignedDataset single_cell(double y, int time_index, double lag1, double lag2, double dt) {
  AlignedDataset d;
  d.countries = {"A"};
  d.years = {2000};
  d.time_index = {time_index};
  d.y = Eigen::MatrixXd::Constant(1, 1, y);
  d.y_lag1 = Eigen::MatrixXd::Constant(1, 1, lag1);
  d.y_lag2 = Eigen::MatrixXd::Constant(1, 1, lag2);
  d.dt = Eigen::MatrixXd::Constant(1, 1, dt);
  d.dt2 = Eigen::MatrixXd::Constant(1, 1, dt * dt);
  d.level = Eigen::MatrixXd::Constant(1, 1, std::nan(""));
  d.level_prev = d.level;
  return d;
}

TEST(ConditionalMean, Examples) {
  const AlignedDataset d = single_cell(0.0, 5, 0.05, -0.3, 0.7);
  EXPECT_EQ(conditional_mean(ParameterVector::shared(0, 0.1, 0, 0, 0, 0, 1), d, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(conditional_mean(ParameterVector::shared(0.2, 0, 1, 0, 0, 0, 1), d, 0, 0), 0.25);
}

TEST(ConditionalMean, AgainstHighPrecisionClosedForm) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  const AlignedDataset d = single_cell(0.0, 10, 0.0, 0.0, 1.5);
  const double mu = conditional_mean(ParameterVector::shared(0.1, 0.05, 0, 0, 0.02, -0.01, 1), d, 0, 0);
  const Big exact = Big("0.1") * boost::multiprecision::exp(Big("-0.5")) + Big("0.03") - Big("0.0225");
  EXPECT_NEAR(mu, exact.convert_to<double>(), 1e-15);
}

TEST(ConditionalMean, MissingRegressor) {
  const AlignedDataset d = single_cell(0.0, 3, std::nan(""), 0.0, 0.0);
  try {
    conditional_mean(ParameterVector::shared(0.1, 0, 0, 0, 0, 0, 1), d, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingRegressor);
  }
}

TEST(LogLikelihood, StandardNormalAtMode) {
  const AlignedDataset d = single_cell(0.25, 3, 0.05, 0.0, 0.0);
  const double ll = log_likelihood(ParameterVector::shared(0.2, 0, 1, 0, 0, 0, 1), d, {VariantKind::Pooled, 1});
  EXPECT_NEAR(ll, -0.918938533204672742, 1e-15);
}

TEST(LogLikelihood, TwoObservationsAdd) {
  AlignedDataset a = single_cell(0.3, 3, 0.1, 0.0, 0.5);
  AlignedDataset b = single_cell(-0.2, 4, 0.3, 0.1, -1.0);
  AlignedDataset both = a;
  both.years = {2000, 2001};
  both.time_index = {3, 4};
  for (auto* m : {&both.y, &both.y_lag1, &both.y_lag2, &both.dt, &both.dt2, &both.level, &both.level_prev}) {
    m->conservativeResize(1, 2);
  }
  both.y(0, 1) = b.y(0, 0);
  both.y_lag1(0, 1) = b.y_lag1(0, 0);
  both.y_lag2(0, 1) = b.y_lag2(0, 0);
  both.dt(0, 1) = b.dt(0, 0);
  both.dt2(0, 1) = b.dt2(0, 0);
  const auto p = ParameterVector::shared(0.1, 0.02, 0.3, -0.1, 0.05, -0.02, 0.4);
  const ModelVariant v{VariantKind::Pooled, 1};
  EXPECT_NEAR(log_likelihood(p, both, v), log_likelihood(p, a, v) + log_likelihood(p, b, v), 1e-13);
}

/// Term-by-term density product over a K = 2, T = 3 panel, coded from the
/// model equation without library helpers.
double brute_force_loglik(const AlignedDataset& d, const std::vector<double>& a, const std::vector<double>& lambda,
                          const std::array<double, 4>& th, const std::vector<double>& s2) {
  double product_log = 0.0;
  for (Eigen::Index i = 0; i < d.y.rows(); ++i) {
    for (Eigen::Index t = 0; t < d.y.cols(); ++t) {
      const double mu = a[i] * std::exp(-lambda[i] * d.time_index[t]) + th[0] * d.y_lag1(i, t) +
                        th[1] * d.y_lag2(i, t) + th[2] * d.dt(i, t) + th[3] * d.dt(i, t) * d.dt(i, t);
      const double z = d.y(i, t) - mu;
      product_log += std::log(std::exp(-z * z / (2 * s2[i])) / std::sqrt(2 * M_PI * s2[i]));
    }
  }
  return product_log;
}

AlignedDataset toy_panel() {
  const auto truth = ParameterVector::shared(0.2, 0.05, 0.3, -0.2, 0.04, -0.01, 0.05);
  auto panel = oracle::make_recovery_panel(VariantKind::Pooled, truth, 2, 3, 99);
  return panel.data;
}

TEST(LogLikelihood, MatchesBruteForceProduct) {
  const AlignedDataset d = toy_panel();
  ParameterVector p;
  p.a = {0.13, 0.31};
  p.lambda = {0.07, 0.01};
  p.theta1 = {0.25};
  p.theta2 = {-0.15};
  p.theta3 = {0.03};
  p.theta4 = {-0.02};
  p.sigma2 = {0.08, 0.02};
  const double ll = log_likelihood(p, d, {VariantKind::IndependentIV, 2});
  EXPECT_NEAR(ll, brute_force_loglik(d, p.a, p.lambda, {0.25, -0.15, 0.03, -0.02}, p.sigma2), 1e-12);
}

TEST(LogLikelihood, Errors) {
  const AlignedDataset d = toy_panel();
  auto p = ParameterVector::shared(0.1, 0.01, 0, 0, 0, 0, 0.0);
  try {
    log_likelihood(p, d, {VariantKind::Pooled, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonPositiveVariance);
  }
  p.sigma2 = {0.1, 0.1, 0.1};
  try {
    log_likelihood(p, d, {VariantKind::HierVariance, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(LogLikelihood, AdditiveOverCountryPartition) {
  const auto truth = ParameterVector::shared(0.2, 0.05, 0.3, -0.2, 0.04, -0.01, 0.05);
  const AlignedDataset d = oracle::make_recovery_panel(VariantKind::Pooled, truth, 5, 12, 3).data;
  ParameterVector p = expand_to(truth, {VariantKind::HierVariance, 5});
  p.sigma2 = {0.02, 0.05, 0.1, 0.03, 0.07};
  const double whole = log_likelihood(p, d, {VariantKind::HierVariance, 5});
  ParameterVector left = p, right = p;
  left.sigma2 = {0.02, 0.05};
  right.sigma2 = {0.1, 0.03, 0.07};
  const double parts = log_likelihood(left, d.subset_countries({"C01", "C02"}), {VariantKind::HierVariance, 2}) +
                       log_likelihood(right, d.subset_countries({"C03", "C04", "C05"}), {VariantKind::HierVariance, 3});
  EXPECT_NEAR(whole, parts, 1e-10);
}

TEST(LogLikelihood, EqualVariancesReduceToPooled) {
  const auto truth = ParameterVector::shared(0.2, 0.05, 0.3, -0.2, 0.04, -0.01, 0.05);
  const AlignedDataset d = oracle::make_recovery_panel(VariantKind::Pooled, truth, 4, 15, 8).data;
  const ParameterVector hier = expand_to(truth, {VariantKind::HierVariance, 4});
  EXPECT_EQ(log_likelihood(hier, d, {VariantKind::HierVariance, 4}), log_likelihood(truth, d, {VariantKind::Pooled, 4}));
}

TEST(LogLikelihood, MissingCellsAreDropped) {
  const auto truth = ParameterVector::shared(0.2, 0.05, 0.3, -0.2, 0.04, -0.01, 0.05);
  AlignedDataset d = oracle::make_recovery_panel(VariantKind::Pooled, truth, 2, 6, 2).data;
  const ModelVariant v{VariantKind::Pooled, 2};
  AlignedDataset single = d.subset_countries({"C02"});
  const double only_second = log_likelihood(truth, single, {VariantKind::Pooled, 1});
  d.y.row(0).setConstant(std::nan(""));
  EXPECT_NEAR(log_likelihood(truth, d, v), only_second, 1e-12);
}

TEST(Densities, ClosedFormValues) {
  EXPECT_NEAR(dist::inv_gamma_log_pdf(1.0, 2.0, 1.0), -1.0, 1e-14);
  EXPECT_NEAR(std::exp(dist::gamma_log_pdf(2.0, 2.0, 1.0)), 2.0 * std::exp(-2.0), 1e-15);
  EXPECT_EQ(dist::uniform_log_pdf(0.6, 0.0, 0.5), -kInf);
  EXPECT_EQ(dist::inv_gamma_log_pdf(-1.0, 2.0, 1.0), -kInf);
}

TEST(Densities, InvGammaIntegratesToOne) {
  const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double x) { return std::exp(dist::inv_gamma_log_pdf(x, 2.0, 1.0)); }, 0.0, 200.0, 15, 1e-12);
  EXPECT_GE(mass, 0.999);
  EXPECT_LE(mass, 1.0);
}

TEST(LogPrior, SupportViolations) {
  const ModelVariant pooled{VariantKind::Pooled, 1};
  EXPECT_TRUE(std::isfinite(log_prior(ParameterVector::shared(0.25, 0.1, 0, 0, 0, 0, 1), pooled)));
  EXPECT_EQ(log_prior(ParameterVector::shared(0.6, 0.1, 0, 0, 0, 0, 1), pooled), -kInf);
  EXPECT_EQ(log_prior(ParameterVector::shared(-0.01, 0.1, 0, 0, 0, 0, 1), pooled), -kInf);
  EXPECT_EQ(log_prior(ParameterVector::shared(0.25, 0.21, 0, 0, 0, 0, 1), pooled), -kInf);
  EXPECT_EQ(log_prior(ParameterVector::shared(0.25, 0.1, 0, 0, 0, 0, -1), pooled), -kInf);

  ParameterVector h = expand_to(ParameterVector::shared(0.25, 0.1, 0, 0, 0, 0, 1), {VariantKind::HierVariance, 3});
  EXPECT_TRUE(std::isfinite(log_prior(h, {VariantKind::HierVariance, 3})));
  h.alpha_sigma = 0.0;
  EXPECT_EQ(log_prior(h, {VariantKind::HierVariance, 3}), -kInf);
  h.alpha_sigma = 1.0;
  h.beta_sigma = -2.0;
  EXPECT_EQ(log_prior(h, {VariantKind::HierVariance, 3}), -kInf);
}

TEST(LogPrior, PooledEqualsSumOfMarginals) {
  const auto p = ParameterVector::shared(0.3, 0.05, 0.2, -0.4, 0.1, -0.05, 0.7);
  const double expected = std::log(2.0) + std::log(5.0) + dist::normal_log_pdf(0.2, 0, 0.5) +
                          dist::normal_log_pdf(-0.4, 0, 0.5) + dist::normal_log_pdf(0.1, 0, 0.2) +
                          dist::normal_log_pdf(-0.05, 0, 0.1) + dist::inv_gamma_log_pdf(0.7, 2, 1);
  EXPECT_NEAR(log_prior(p, {VariantKind::Pooled, 1}), expected, 1e-13);
}

TEST(Dimension, FormulaForEveryVariant) {
  for (std::size_t k : {1u, 2u, 7u, 40u, 57u}) {
    EXPECT_EQ(parameter_dimension({VariantKind::Pooled, k}), 7u);
    EXPECT_EQ(parameter_dimension({VariantKind::HierVariance, k}), 6 + k + 2);
    EXPECT_EQ(parameter_dimension({VariantKind::HierIntercept, k}), 4 + 2 * k + 4 + 1);
    EXPECT_EQ(parameter_dimension({VariantKind::HierInterceptVariance, k}), 3 * k + 10);
    EXPECT_EQ(parameter_dimension({VariantKind::IndependentIV, k}), 3 * k + 4);
    EXPECT_EQ(parameter_dimension({VariantKind::FullHier, k}), 7 * k + 14);
    for (VariantKind kind : all_variants()) {
      const ModelVariant v{kind, k};
      EXPECT_EQ(ParameterLayout(v).dimension(), parameter_dimension(v));
    }
  }
}

TEST(Variants, CliNamesRoundTrip) {
  for (VariantKind kind : all_variants()) EXPECT_EQ(parse_variant(variant_name(kind)), kind);
  EXPECT_EQ(variant_name(VariantKind::HierInterceptVariance), "hier-iv");
  EXPECT_THROW(parse_variant("nope"), Error);
}

TEST(SamplePrior, UniformAndNormalMoments) {
  Rng rng = make_rng(2024, "prior-moments");
  const ModelVariant v{VariantKind::Pooled, 1};
  double sum_a = 0, sum_t4 = 0, sum_t4_sq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ParameterVector p = sample_prior(v, rng);
    sum_a += p.a[0];
    sum_t4 += p.theta4[0];
    sum_t4_sq += p.theta4[0] * p.theta4[0];
  }
  EXPECT_NEAR(sum_a / n, 0.25, 0.01);
  const double m = sum_t4 / n;
  const double sd = std::sqrt(sum_t4_sq / n - m * m);
  EXPECT_NEAR(sd, 0.1, 0.002);
}

TEST(SamplePrior, AlwaysInsideSupport) {
  Rng rng = make_rng(5, "prior-support");
  for (VariantKind kind : all_variants()) {
    const ModelVariant v{kind, 4};
    for (int i = 0; i < 500; ++i) {
      const ParameterVector p = sample_prior(v, rng);
      EXPECT_NO_THROW(check_dimensions(p, v));
      EXPECT_TRUE(std::isfinite(log_prior(p, v))) << variant_name(kind);
    }
  }
}

/// Two-stage forward simulation of sigma_i^2 written against std:: engines.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

TEST(SamplePrior, HierarchicalVarianceMatchesTwoStageMixture) {
  const int n = 100000;
  Rng rng = make_rng(31, "prior-hier");
  std::vector<double> lib;
  for (int i = 0; i < n; ++i) lib.push_back(sample_prior({VariantKind::HierVariance, 1}, rng).sigma2[0]);

  std::mt19937_64 eng(123456789);
  std::vector<double> ref;
  for (int i = 0; i < n; ++i) {
    const double alpha = std::gamma_distribution<double>(2.0, 1.0)(eng);
    const double beta = std::gamma_distribution<double>(2.0, 1.0)(eng);
    ref.push_back(1.0 / std::gamma_distribution<double>(alpha, 1.0 / beta)(eng));
  }
  EXPECT_LT(ks_statistic(lib, ref), 0.01);
}

TEST(Simulate, NoiselessLimitFollowsMean) {
  const auto p = ParameterVector::shared(0.2, 0.03, 0, 0, 0.05, -0.02, 1e-12);
  const ClimatePanel c = testing::random_walk_climate({"A", "B"}, 1961, 2000, 15, 1, 4);
  Rng rng = make_rng(1, "sim");
  const AlignedDataset d = simulate_dataset(p, {VariantKind::Pooled, 2}, 2, 30, c, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 0; t < 30; ++t) {
      EXPECT_NEAR(d.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)), conditional_mean(p, d, i, t), 1e-5);
    }
  }
}

TEST(Simulate, ArOneRecursionDecaysGeometrically) {
  const auto p = ParameterVector::shared(0, 0, 0.3, 0, 0, 0, 0.0);
  const ClimatePanel c = testing::random_walk_climate({"A"}, 1961, 1975, 15, 1, 4);
  Rng rng = make_rng(1, "sim");
  SimulationOptions opts;
  opts.initial = Eigen::MatrixXd::Ones(1, 2);
  const AlignedDataset d = simulate_dataset(p, {VariantKind::Pooled, 1}, 1, 10, c, rng, opts);
  for (Eigen::Index t = 0; t < 10; ++t) EXPECT_NEAR(d.y(0, t), std::pow(0.3, t + 1), 1e-15);
}

TEST(Simulate, MonteCarloMeanWithinThreeStandardErrors) {
  const auto p = ParameterVector::shared(0.3, 0.05, 0, 0, 0.05, -0.02, 0.04);
  const ClimatePanel c = testing::random_walk_climate({"A"}, 1961, 1975, 15, 1, 9);
  double sum = 0, sum_sq = 0;
  const int reps = 10000;
  double mu = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_rng(77, "sim-mc", static_cast<std::uint64_t>(r));
    const AlignedDataset d = simulate_dataset(p, {VariantKind::Pooled, 1}, 1, 8, c, rng);
    sum += d.y(0, 5);
    sum_sq += d.y(0, 5) * d.y(0, 5);
    mu = conditional_mean(p, d, 0, 5);
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
  EXPECT_LT(std::abs(mean - mu), 3 * se);
}

TEST(Simulate, ClimateTooShortIsRejected) {
  const ClimatePanel c = testing::random_walk_climate({"A"}, 1961, 1970, 15, 1, 4);
  Rng rng = make_rng(1, "sim");
  EXPECT_THROW(simulate_dataset(ParameterVector::shared(0, 0, 0, 0, 0, 0, 1), {VariantKind::Pooled, 1}, 1, 20, c, rng),
               Error);
}

TEST(Layout, PackUnpackAndWorkingRoundTrip) {
  Rng rng = make_rng(3, "layout");
  for (VariantKind kind : all_variants()) {
    const ModelVariant v{kind, 3};
    const ParameterLayout layout(v, {"X", "Y", "Z"});
    for (int r = 0; r < 20; ++r) {
      const ParameterVector p = sample_prior(v, rng);
      const auto packed = layout.pack(p);
      EXPECT_EQ(layout.pack(layout.unpack(packed)), packed);
      const auto working = layout.to_working(packed);
      std::vector<double> back(packed.size());
      layout.from_working(working, back);
      for (std::size_t j = 0; j < packed.size(); ++j) EXPECT_NEAR(back[j], packed[j], 1e-9 * (1 + std::abs(packed[j])));
    }
  }
}

TEST(Layout, LogJacobianMatchesFiniteDifferences) {
  const ModelVariant v{VariantKind::HierVariance, 2};
  const ParameterLayout layout(v);
  Rng rng = make_rng(4, "jac");
  const auto working = layout.to_working(layout.pack(sample_prior(v, rng)));
  std::vector<double> nat(working.size());
  const double log_jac = layout.from_working(working, nat);
  double expected = 0;
  for (std::size_t j = 0; j < working.size(); ++j) {
    auto up = working, down = working;
    const double h = 1e-6;
    up[j] += h;
    down[j] -= h;
    std::vector<double> nu(working.size()), nd(working.size());
    layout.from_working(up, nu);
    layout.from_working(down, nd);
    expected += std::log(std::abs((nu[j] - nd[j]) / (2 * h)));
  }
  EXPECT_NEAR(log_jac, expected, 1e-6);
}

TEST(Layout, NamesAreCountryQualified) {
  const ParameterLayout layout({VariantKind::HierVariance, 2}, {"AUS", "USA"});
  const auto names = layout.names();
  EXPECT_NE(std::find(names.begin(), names.end(), "sigma2[AUS]"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "alpha_sigma"), names.end());
}

}  // namespace
}  // namespace agrisk
