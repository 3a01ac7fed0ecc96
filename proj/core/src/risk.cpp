#include "agrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "agrisk/distributions.hpp"
#include "agrisk/error.hpp"

namespace agrisk {

namespace {

constexpr double kCumulativeSlack = 1e-12;

void check_sample(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "empty sample");
  if (values.size() != weights.size()) {
    throw Error(Errc::DimensionMismatch, fmt::format("{} values but {} weights", values.size(), weights.size()));
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Errc::UnnormalizedWeights, "weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw Error(Errc::AllWeightsZero, "sample weights sum to zero");
}

void check_level(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw Error(Errc::InvalidArgument, fmt::format("{} must lie in (0, 1), got {}", what, p));
}

std::vector<std::size_t> sorted_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

}  // namespace

std::vector<double> weighted_quantiles(std::span<const double> values, std::span<const double> weights,
                                       std::span<const double> ps) {
  check_sample(values, weights);
  for (double p : ps) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidArgument, fmt::format("quantile level {} outside [0, 1]", p));
  }
  const auto order = sorted_order(values);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> cumulative(order.size());
  double running = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    running += weights[order[k]] / total;
    cumulative[k] = running;
  }
  std::vector<double> out;
  out.reserve(ps.size());
  for (double p : ps) {
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), p - kCumulativeSlack);
    std::size_t k = it == cumulative.end() ? order.size() - 1 : static_cast<std::size_t>(it - cumulative.begin());
    // Skip zero-weight samples that share the cumulative value of a predecessor.
    while (k + 1 < order.size() && weights[order[k]] == 0.0) ++k;
    out.push_back(values[order[k]]);
  }
  return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double p) {
  const double ps[] = {p};
  return weighted_quantiles(values, weights, ps)[0];
}

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  check_sample(values, weights);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  return num / den;
}

double kish_ess(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

Interval prediction_interval(std::span<const double> values, std::span<const double> weights, double level) {
  check_level(level, "interval level");
  const double ps[] = {0.5 * (1.0 - level), 0.5 * (1.0 + level)};
  const auto q = weighted_quantiles(values, weights, ps);
  return {q[0], q[1]};
}

double value_at_risk(std::span<const double> values, std::span<const double> weights, double alpha) {
  check_level(alpha, "alpha");
  return weighted_quantile(values, weights, alpha);
}

double expected_shortfall(std::span<const double> values, std::span<const double> weights, double alpha, Tail tail) {
  const double var = value_at_risk(values, weights, alpha);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool in_tail = tail == Tail::LowerIsBad ? values[i] <= var : values[i] >= var;
    if (!in_tail) continue;
    num += weights[i] * values[i];
    den += weights[i];
  }
  // The VaR sample itself carries positive weight, so den > 0.
  return num / den;
}

RiskReport risk_report(std::span<const double> values, std::span<const double> weights, double alpha, Tail tail) {
  return {alpha, value_at_risk(values, weights, alpha), expected_shortfall(values, weights, alpha, tail), tail};
}

double silverman_bandwidth(std::span<const double> values, std::span<const double> weights) {
  check_sample(values, weights);
  const double m = weighted_mean(values, weights);
  double var = 0.0, total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    var += weights[i] * (values[i] - m) * (values[i] - m);
    total += weights[i];
  }
  const double sd = std::sqrt(var / total);
  const double ps[] = {0.25, 0.75};
  const auto q = weighted_quantiles(values, weights, ps);
  const double iqr_sd = (q[1] - q[0]) / 1.34;
  double spread = std::min(sd, iqr_sd);
  if (!(spread > 0.0)) spread = sd;
  const double n = std::max(1.0, kish_ess(weights));
  const double h = 0.9 * spread * std::pow(n, -0.2);
  return h > kMinBandwidth ? h : kMinBandwidth;
}

KdeValue kde_log_density(std::span<const double> values, std::span<const double> weights, double bandwidth, double x) {
  check_sample(values, weights);
  if (!(bandwidth > 0.0)) throw Error(Errc::InvalidArgument, "bandwidth must be positive");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> terms;
  terms.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double z = (x - values[i]) / bandwidth;
    terms.push_back(std::log(weights[i] / total) - 0.5 * z * z);
  }
  const double log_density =
      dist::log_sum_exp(terms.data(), terms.size()) - std::log(bandwidth) - dist::kLogSqrt2Pi;
  const double floor = std::log(kDensityFloor);
  if (!(log_density >= floor)) return {floor, true};
  return {log_density, false};
}

}  // namespace agrisk
