#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "agrisk/csv.hpp"
#include "agrisk/error.hpp"
#include "agrisk/inference.hpp"
#include "agrisk/oracle.hpp"
#include "synthetic_files.hpp"

namespace agrisk {
namespace {

const ParameterVector kTruth = ParameterVector::shared(0.2, 0.05, 0.2, -0.1, 0.03, -0.01, 0.02);

TEST(MarxTarget, LikelihoodAgreesWithModelOnNaturalScale) {
  const auto panel = oracle::make_recovery_panel(VariantKind::HierVariance, kTruth, 3, 12, 5);
  for (VariantKind kind : all_variants()) {
    const MarxTarget target(panel.data, kind);
    const ModelVariant v{kind, 3};
    Rng rng = make_rng(1, "marx", static_cast<std::uint64_t>(kind));
    for (int r = 0; r < 5; ++r) {
      const ParameterVector p = sample_prior(v, rng);
      const auto natural = target.layout().pack(p);
      const auto working = target.layout().to_working(natural);
      EXPECT_NEAR(target.log_likelihood(working), log_likelihood(p, panel.data, v), 1e-8);
      EXPECT_NEAR(target.natural_log_likelihood(natural), log_likelihood(p, panel.data, v), 1e-8);
    }
  }
}

TEST(MarxTarget, PriorCarriesJacobian) {
  const auto panel = oracle::make_recovery_panel(VariantKind::Pooled, kTruth, 2, 8, 5);
  const MarxTarget target(panel.data, VariantKind::Pooled);
  Rng rng = make_rng(2, "marx-prior");
  const ParameterVector p = sample_prior({VariantKind::Pooled, 2}, rng);
  const auto working = target.layout().to_working(target.layout().pack(p));
  std::vector<double> nat(working.size());
  const double jac = target.layout().from_working(working, nat);
  EXPECT_NEAR(target.log_prior(working), log_prior(p, {VariantKind::Pooled, 2}) + jac, 1e-9);
}

TEST(MarxTarget, EmptyPanelHasZeroLikelihood) {
  auto data = oracle::make_recovery_panel(VariantKind::Pooled, kTruth, 2, 5, 1).data;
  data.y.setConstant(std::nan(""));
  const MarxTarget target(data, VariantKind::HierVariance);
  EXPECT_EQ(target.observation_count(), 0u);
  std::vector<double> w(target.dimension(), 0.1);
  EXPECT_EQ(target.log_likelihood(w), 0.0);
}

TEST(Fit, ZeroObservationPanelReturnsPrior) {
  auto data = oracle::make_recovery_panel(VariantKind::Pooled, kTruth, 2, 5, 1).data;
  data.y.setConstant(std::nan(""));
  smc::SmcConfig cfg;
  cfg.n_particles = 2000;
  const Posterior post = fit(data, VariantKind::Pooled, cfg);
  EXPECT_EQ(post.log_evidence, 0.0);
  EXPECT_NEAR(post.mean()(0), 0.25, 4 * std::sqrt(0.25 / 12 / 2000));
}

TEST(Posterior, SummariesAndCsvRoundTrip) {
  const auto panel = oracle::make_recovery_panel(VariantKind::HierVariance, kTruth, 3, 20, 8);
  smc::SmcConfig cfg;
  cfg.n_particles = 300;
  cfg.seed = 3;
  const Posterior post = fit(panel.data, VariantKind::HierVariance, cfg);
  EXPECT_EQ(post.draws.rows(), 300);
  EXPECT_EQ(post.draws.cols(), 11);
  EXPECT_NEAR(std::accumulate(post.weights.begin(), post.weights.end(), 0.0), 1.0, 1e-12);
  const Eigen::VectorXd lo = post.quantile(0.05), hi = post.quantile(0.95), m = post.mean();
  for (Eigen::Index j = 0; j < m.size(); ++j) {
    EXPECT_LE(lo(j), hi(j));
    EXPECT_GE(post.sd()(j), 0.0);
  }

  const auto dir = testing::scratch_dir("posterior");
  write_posterior_csv(dir / "p.csv", post);
  const Posterior back = read_posterior_csv(dir / "p.csv", post.layout);
  EXPECT_TRUE(back.draws == post.draws);
  for (std::size_t i = 0; i < post.size(); ++i) EXPECT_NEAR(back.weights[i], post.weights[i], 1e-15);
  const auto header = csv::read(dir / "p.csv").header;
  EXPECT_EQ(header.front(), "a");
  EXPECT_EQ(header.back(), "weight");

  write_trace_csv(dir / "t.csv", post.trace);
  EXPECT_EQ(csv::read(dir / "t.csv").header,
            (std::vector<std::string>{"stage", "gamma", "ess", "scale", "r_t", "acc_rate", "log_evidence_increment"}));
}

TEST(Posterior, ReadRejectsWrongHeader) {
  const auto dir = testing::scratch_dir("posterior-bad");
  std::ofstream(dir / "p.csv") << "a,lambda,weight\n0.1,0.1,1\n";
  try {
    read_posterior_csv(dir / "p.csv", ParameterLayout({VariantKind::Pooled, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedFile);
  }
}

TEST(Posterior, PointPosteriorIsDegenerate) {
  const ModelVariant v{VariantKind::HierVariance, 2};
  const Posterior p = point_posterior(expand_to(kTruth, v), v, 4);
  EXPECT_EQ(p.size(), 4u);
  EXPECT_EQ(p.sd().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(p.draw(3).sigma2[1], 0.02);
}

}  // namespace
}  // namespace agrisk
