#pragma once

#include <span>
#include <vector>

namespace agrisk {

/// Which side of the distribution is adverse. Log-returns and levels are both
/// bad when low; UpperIsBad covers loss-style variables.
enum class Tail { LowerIsBad, UpperIsBad };

/// Left-continuous inverse of the weighted empirical CDF: the smallest value
/// whose cumulative normalized weight reaches p. Weights need not be
/// normalized; cumulative sums are compared with a 1e-12 slack so that
/// duplicated or split samples give identical answers.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double p);
std::vector<double> weighted_quantiles(std::span<const double> values, std::span<const double> weights,
                                       std::span<const double> ps);
double weighted_mean(std::span<const double> values, std::span<const double> weights);
/// Kish effective sample size (sum w)^2 / sum w^2.
double kish_ess(std::span<const double> weights);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Central interval from the quantiles (1 - level) / 2 and (1 + level) / 2.
Interval prediction_interval(std::span<const double> values, std::span<const double> weights, double level);

/// The alpha-quantile (inf-definition).
double value_at_risk(std::span<const double> values, std::span<const double> weights, double alpha);

/// Weighted mean over the tail at the alpha-quantile, the VaR sample
/// included: E[Y | Y <= VaR] for LowerIsBad, E[Y | Y >= VaR] for UpperIsBad.
double expected_shortfall(std::span<const double> values, std::span<const double> weights, double alpha, Tail tail);

struct RiskReport {
  double alpha = 0.0;
  double var_value = 0.0;
  double es_value = 0.0;
  Tail tail = Tail::LowerIsBad;
};

RiskReport risk_report(std::span<const double> values, std::span<const double> weights, double alpha, Tail tail);

/// Silverman's rule 0.9 min(sd, IQR / 1.34) n^(-1/5) on weighted samples with
/// n the Kish ESS. Falls back to the sd when the IQR vanishes and to
/// kMinBandwidth for a point mass.
inline constexpr double kMinBandwidth = 1e-8;
double silverman_bandwidth(std::span<const double> values, std::span<const double> weights);

inline constexpr double kDensityFloor = 1e-300;

struct KdeValue {
  double log_density = 0.0;
  bool floored = false;  // true when the density fell below kDensityFloor
};

/// Weighted Gaussian KDE log-density at x.
KdeValue kde_log_density(std::span<const double> values, std::span<const double> weights, double bandwidth, double x);

}  // namespace agrisk
