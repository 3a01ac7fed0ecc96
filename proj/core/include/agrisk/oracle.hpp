#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agrisk/model.hpp"
#include "agrisk/panel.hpp"
#include "agrisk/risk.hpp"
#include "agrisk/smc.hpp"

// Closed-form references used by the test suite and by `agrisk verify`.
// Not part of the stable interface.
namespace agrisk::oracle {

/// y_i ~ N(mu, obs_var) i.i.d., mu ~ N(prior_mean, prior_var).
struct ConjugateSpec {
  double prior_mean = 0.0;
  double prior_var = 1.0;
  double obs_var = 1.0;
  std::vector<double> observations;

  /// Throws InvalidArgument unless both variances are positive and finite.
  void validate() const;
};

/// Exact log marginal likelihood, from the Sherman-Morrison form of the
/// n-variate normal N(prior_mean 1, obs_var I + prior_var 1 1').
double conjugate_log_evidence(const ConjugateSpec& spec);

/// The same quantity by adaptive Gauss-Kronrod quadrature over mu.
double conjugate_log_evidence_quadrature(const ConjugateSpec& spec);

struct NormalMoments {
  double mean = 0.0;
  double var = 0.0;
};

/// Posterior of mu under likelihood^gamma times the prior.
NormalMoments tempered_conjugate_posterior(const ConjugateSpec& spec, double gamma);

/// Posterior predictive of one new observation.
NormalMoments conjugate_predictive(const ConjugateSpec& spec);

/// The conjugate model as a one-dimensional SMC target.
class ConjugateTarget final : public smc::Target {
 public:
  explicit ConjugateTarget(ConjugateSpec spec);
  std::size_t dimension() const override { return 1; }
  double log_prior(std::span<const double> x) const override;
  double log_likelihood(std::span<const double> x) const override;
  void sample_prior(Rng& rng, std::span<double> x) const override;

 private:
  ConjugateSpec spec_;
  double sum_ = 0.0, sum_sq_ = 0.0;
};

/// Five fixtures with n = 5, 10, 20, 35, 50 observations drawn from fixed
/// seeds under varied priors and noise levels.
std::vector<ConjugateSpec> default_conjugate_fixtures();

/// Normal VaR at quantile level alpha.
double normal_var(double alpha, double mean, double sd);
/// Normal ES: mean - sd phi(z_a) / a for LowerIsBad (alpha = tail mass),
/// mean + sd phi(z_a) / (1 - a) for UpperIsBad (alpha = confidence level).
double normal_es(double alpha, double mean, double sd, Tail tail);

struct RecoveryPanel {
  AlignedDataset data;
  ClimatePanel climate;
  ParameterVector truth;
};

/// Simulated panel with known parameters. Each country's temperature follows
/// a random walk from 15 C with N(0, 1) steps, so the regressors dT are i.i.d.
/// N(0, 1). Country ids are C01, C02, ...; years start in 1961.
RecoveryPanel make_recovery_panel(VariantKind kind, const ParameterVector& truth, std::size_t countries,
                                  std::size_t years, std::uint64_t seed, const SimulationOptions& options = {});

/// One line of the verification report.
struct OracleCheck {
  std::string name;
  double measured = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  double error() const;
};

struct VerifyOptions {
  std::size_t particles = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Runs the oracle suite: closed form against quadrature and against any
/// expected values shipped with the fixtures, SMC evidence against the closed
/// form, and the normal tail formulas against tabulated constants and
/// Monte Carlo.
std::vector<OracleCheck> run_oracle_suite(const std::vector<ConjugateSpec>& fixtures,
                                          const std::vector<std::optional<double>>& expected,
                                          const VerifyOptions& options);

}  // namespace agrisk::oracle
