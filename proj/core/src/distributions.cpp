#include "agrisk/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/special_functions/erf.hpp>

namespace agrisk::dist {

double normal_log_pdf(double x, double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(x)) return kNegInf;
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

double uniform_log_pdf(double x, double lo, double hi) {
  if (!(x >= lo && x <= hi)) return kNegInf;
  return -std::log(hi - lo);
}

double gamma_log_pdf(double x, double shape, double rate) {
  if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double inv_gamma_log_pdf(double x, double shape, double scale) {
  if (!(x > 0.0) || !std::isfinite(x) || !(shape > 0.0) || !(scale > 0.0)) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

double truncated_normal_log_pdf(double x, double mean, double sd, double lo, double hi) {
  if (!(x >= lo && x <= hi) || !(sd > 0.0)) return kNegInf;
  const double mass = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
  if (!(mass > 0.0)) return kNegInf;
  return normal_log_pdf(x, mean, sd) - std::log(mass);
}

double sample_normal(Rng& rng, double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  return d(rng);
}

double sample_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

double sample_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> d(shape, 1.0 / rate);
  return d(rng);
}

double sample_inv_gamma(Rng& rng, double shape, double scale) {
  // 1/X with X ~ Gamma(shape, rate = scale).
  return 1.0 / sample_gamma(rng, shape, scale);
}

double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  const double p_lo = normal_cdf((lo - mean) / sd);
  const double p_hi = normal_cdf((hi - mean) / sd);
  if (p_hi - p_lo > 1e-12) {
    const double u = sample_uniform(rng, p_lo, p_hi);
    const double x = mean + sd * normal_quantile(std::clamp(u, 1e-300, 1.0 - 1e-16));
    return std::clamp(x, lo, hi);
  }
  // Interval carries no representable mass; only reachable far in a tail.
  return sample_uniform(rng, lo, hi);
}

double log_sum_exp(const double* values, std::size_t n) {
  double m = kNegInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, values[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(values[i] - m);
  return m + std::log(s);
}

}  // namespace agrisk::dist
