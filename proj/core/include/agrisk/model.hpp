#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "agrisk/panel.hpp"
#include "agrisk/rng.hpp"

namespace agrisk {

/// The six model variants compared by marginal likelihood.
enum class VariantKind {
  Pooled,                 // one error variance shared by all countries
  HierIntercept,          // per-country a, lambda with a hyperprior layer
  HierVariance,           // per-country sigma^2 ~ InvGamma(alpha, beta)
  HierInterceptVariance,  // both of the above
  IndependentIV,          // per-country a, lambda, sigma^2 with fixed priors
  FullHier,               // every coefficient per country, all hierarchical
};

struct ModelVariant {
  VariantKind kind = VariantKind::Pooled;
  std::size_t countries = 1;

  bool per_country_intercept() const;
  bool per_country_variance() const;
  bool per_country_slopes() const;
  bool intercept_hyper() const;
  bool variance_hyper() const;
  bool slope_hyper() const;
};

/// CLI spelling: pooled | hier-intercept | hier-variance | hier-iv | independent-iv | full-hier.
std::string_view variant_name(VariantKind kind);
VariantKind parse_variant(std::string_view name);
std::vector<VariantKind> all_variants();

std::size_t parameter_dimension(const ModelVariant& variant);

namespace prior {
inline constexpr double kAMax = 0.5;
inline constexpr double kLambdaMax = 0.2;
/// Prior standard deviations of theta1..theta4.
inline constexpr std::array<double, 4> kThetaSd = {0.5, 0.5, 0.2, 0.1};
inline constexpr double kSigma2Shape = 2.0;
inline constexpr double kSigma2Scale = 1.0;
/// Gamma(shape, rate) hyperprior used for alpha_sigma, beta_sigma and every scale hyperparameter.
inline constexpr double kHyperShape = 2.0;
inline constexpr double kHyperRate = 1.0;
/// Prior sd of the location hyperparameter of each slope coefficient.
inline constexpr double kSlopeMeanSd = 0.5;
/// Variances below this are rejected by the likelihood.
inline constexpr double kMinVariance = 1e-300;
}  // namespace prior

struct Hyper {
  double mean = 0.0;
  double scale = 1.0;
};

/// One draw of every sampled quantity, in natural units. Each coefficient
/// vector holds one entry (shared) or K entries (per country) depending on the
/// variant; the hyperparameters are meaningful only for variants that have
/// the corresponding hierarchy.
struct ParameterVector {
  std::vector<double> a, lambda, theta1, theta2, theta3, theta4, sigma2;
  double alpha_sigma = 1.0;
  double beta_sigma = 1.0;
  Hyper a_hyper{0.25, 1.0};
  Hyper lambda_hyper{0.1, 1.0};
  std::array<Hyper, 4> theta_hyper{};

  double a_of(std::size_t i) const { return pick(a, i); }
  double lambda_of(std::size_t i) const { return pick(lambda, i); }
  double theta_of(int j, std::size_t i) const;
  double sigma2_of(std::size_t i) const { return pick(sigma2, i); }

  /// Shared-coefficient parameter set (every vector of length 1).
  static ParameterVector shared(double a, double lambda, double theta1, double theta2, double theta3, double theta4,
                                double sigma2);

 private:
  static double pick(const std::vector<double>& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }
};

/// Replicates shared values into per-country vectors wherever the variant
/// needs them; vectors already of length K are kept.
ParameterVector expand_to(const ParameterVector& params, const ModelVariant& variant);

/// Throws DimensionMismatch unless every vector has the length the variant requires.
void check_dimensions(const ParameterVector& params, const ModelVariant& variant);

/// mu = a e^{-lambda t} + theta1 y_{t-1} + theta2 y_{t-2} + theta3 dT + theta4 dT^2 for country i.
inline double mean_value(const ParameterVector& p, std::size_t i, double time_index, double lag1, double lag2,
                         double dt, double dt2) {
  return p.a_of(i) * std::exp(-p.lambda_of(i) * time_index) + p.theta_of(1, i) * lag1 + p.theta_of(2, i) * lag2 +
         p.theta_of(3, i) * dt + p.theta_of(4, i) * dt2;
}

double conditional_mean(const ParameterVector& params, const AlignedDataset& data, std::size_t i, std::size_t t);

/// Gaussian log-likelihood over every observed (country, year) cell.
double log_likelihood(const ParameterVector& params, const AlignedDataset& data, const ModelVariant& variant);

/// Full log prior including hyperprior layers; -inf outside the support.
double log_prior(const ParameterVector& params, const ModelVariant& variant);

ParameterVector sample_prior(const ModelVariant& variant, Rng& rng);

struct SimulationOptions {
  /// K x 2 matrix of the first two log-returns; drawn N(0, sigma_i^2) when absent.
  std::optional<Eigen::MatrixXd> initial;
  double base_level = 100.0;
};

/// Forward-simulates T usable years for K countries. `climate` must cover K
/// countries and at least T + 2 temperature differences; a zero variance
/// gives the noiseless recursion.
AlignedDataset simulate_dataset(const ParameterVector& params, const ModelVariant& variant, std::size_t countries,
                                std::size_t years, const ClimatePanel& climate, Rng& rng,
                                const SimulationOptions& options = {});

/// Description of one coordinate of the packed parameter vector.
struct ParameterSlot {
  enum class Support { Real, Positive, Interval };
  std::string name;
  Support support = Support::Real;
  double lo = 0.0;
  double hi = 0.0;
};

/// Maps ParameterVector to and from a flat coordinate vector. The working
/// space is unconstrained: positive quantities are log-transformed and
/// bounded ones logit-transformed, with the log-Jacobian reported so densities
/// can be carried across.
class ParameterLayout {
 public:
  explicit ParameterLayout(ModelVariant variant, std::vector<std::string> country_ids = {});

  const ModelVariant& variant() const { return variant_; }
  std::size_t dimension() const { return slots_.size(); }
  const std::vector<ParameterSlot>& slots() const { return slots_; }
  std::vector<std::string> names() const;

  std::vector<double> pack(const ParameterVector& params) const;
  ParameterVector unpack(std::span<const double> values) const;

  std::vector<double> to_working(std::span<const double> natural) const;
  /// Writes natural coordinates and returns log |d natural / d working|.
  double from_working(std::span<const double> working, std::span<double> natural) const;

 private:
  ModelVariant variant_;
  std::vector<ParameterSlot> slots_;
};

}  // namespace agrisk
