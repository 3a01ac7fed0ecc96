#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "agrisk/rng.hpp"

namespace agrisk::smc {

/// A static Bayesian target: prior density, likelihood and a prior sampler
/// over an R^d coordinate space. Implementations must be safe to call
/// concurrently from several threads.
class Target {
 public:
  virtual ~Target() = default;
  virtual std::size_t dimension() const = 0;
  virtual double log_prior(std::span<const double> x) const = 0;
  virtual double log_likelihood(std::span<const double> x) const = 0;
  virtual void sample_prior(Rng& rng, std::span<double> x) const = 0;
};

struct SmcConfig {
  std::size_t n_particles = 1000;
  /// Resample and move when ESS < ess_threshold * N.
  double ess_threshold = 0.9;
  /// Adaptive tempering keeps ESS >= ess_target * N after each reweight.
  double ess_target = 0.8;
  /// Multipliers on the reference scale 2.38 / sqrt(d).
  std::vector<double> scale_candidates = {0.125, 0.25, 0.5, 1.0, 2.0};
  /// Fraction of particles whose cumulative ESJD must exceed D_desired.
  double esjd_target_fraction = 0.5;
  int max_move_iters = 30;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
  /// Canonical text form; hashed into evidence records.
  std::string canonical() const;
};

/// Weighted particle population. Row i of `particles` is particle i.
struct ParticleSystem {
  Eigen::MatrixXd particles;
  std::vector<double> log_weights;  // normalized: logsumexp == 0
  std::vector<double> log_likelihoods;
  std::vector<double> log_priors;
  double gamma = 0.0;
  double log_evidence = 0.0;
  int stage = 0;
  std::vector<Rng> streams;  // one per particle slot
  Rng master;

  std::size_t size() const { return log_weights.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(particles.cols()); }
  std::vector<double> weights() const;
};

struct StageRecord {
  int stage = 0;
  double gamma = 0.0;
  double ess = 0.0;
  double scale = 0.0;
  int moves = 0;
  double acceptance_rate = 0.0;
  double log_evidence_increment = 0.0;
  bool resampled = false;
};

struct ProposalCovariance {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd cholesky;  // lower factor of the matrix actually used
  bool diagonal_fallback = false;
};

struct ScaleTuning {
  double scale = 0.0;
  std::vector<std::pair<double, double>> median_esjd_by_candidate;  // (h, median ESJD)
};

struct MoveResult {
  int sweeps = 0;
  double acceptance_rate = 0.0;
  double d_desired = 0.0;
};

struct SmcResult {
  ParticleSystem system;
  double log_evidence = 0.0;
  std::vector<StageRecord> trace;
};

/// 1 / sum(w_i^2) for normalized weights; throws UnnormalizedWeights if the
/// weights do not sum to one within 1e-9.
double ess(std::span<const double> weights);
double ess_from_log_weights(std::span<const double> log_weights);

/// Draws N particles from the prior with equal weights and gamma = 0.
ParticleSystem initialize(const Target& target, const SmcConfig& config);

/// Largest gamma' in (gamma, 1] whose reweighted ESS stays at or above
/// ess_target * N, by bisection to 1e-6; returns exactly 1 when 1 qualifies or
/// when gamma is within 1e-6 of 1.
double next_temperature(const ParticleSystem& system, const SmcConfig& config);

/// Multiplies weights by L^(gamma_next - gamma), renormalizes and returns the
/// log-evidence increment log sum_i W_i L_i^(gamma_next - gamma).
double reweight(ParticleSystem& system, double gamma_next);

/// Offspring indices for systematic resampling with offset u in [0, 1).
std::vector<std::size_t> systematic_indices(std::span<const double> weights, double u);
void resample_systematic(ParticleSystem& system, Rng& rng);

/// Weighted particle covariance with its Cholesky factor; falls back to the
/// diagonal plus 1e-10 jitter when the matrix is not positive definite.
ProposalCovariance estimate_covariance(const ParticleSystem& system);

/// Squared Mahalanobis distance of x from the proposal mean.
double mahalanobis_sq(const ProposalCovariance& cov, const Eigen::VectorXd& x);

/// ESJD of one proposal: acceptance probability times squared Mahalanobis jump.
inline double esjd(double acceptance_probability, double mahalanobis_jump_sq) {
  return acceptance_probability * mahalanobis_jump_sq;
}

ScaleTuning tune_scale(ParticleSystem& system, const Target& target, const SmcConfig& config,
                       const ProposalCovariance& cov);

/// Random-walk Metropolis sweeps at the current temperature until the
/// configured fraction of particles has cumulative ESJD above D_desired (the
/// median squared Mahalanobis distance of particles from their mean), or
/// max_move_iters sweeps have run. At least one sweep is always applied.
MoveResult move_particles(ParticleSystem& system, const Target& target, const SmcConfig& config, double scale,
                          const ProposalCovariance& cov);

/// Likelihood-annealed SMC from prior (gamma = 0) to posterior (gamma = 1).
SmcResult run_smc(const Target& target, const SmcConfig& config);

/// log target at temperature gamma, treating 0 * (-inf) as 0.
inline double tempered(double gamma, double log_likelihood, double log_prior) {
  if (gamma == 0.0) return log_prior;
  return gamma * log_likelihood + log_prior;
}

}  // namespace agrisk::smc
