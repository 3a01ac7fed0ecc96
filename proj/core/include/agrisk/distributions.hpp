#pragma once

#include <limits>

#include "agrisk/rng.hpp"

// Log densities return -infinity outside the support instead of throwing so
// they compose directly into log-prior sums.
namespace agrisk::dist {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_log_pdf(double x, double mean, double sd);
double uniform_log_pdf(double x, double lo, double hi);
/// Gamma(shape, rate).
double gamma_log_pdf(double x, double shape, double rate);
/// Inverse-Gamma(shape, scale): density scale^shape / Gamma(shape) x^(-shape-1) exp(-scale/x).
double inv_gamma_log_pdf(double x, double shape, double scale);
/// Normal(mean, sd^2) truncated to [lo, hi].
double truncated_normal_log_pdf(double x, double mean, double sd, double lo, double hi);

double normal_cdf(double z);
double normal_quantile(double p);
double normal_pdf(double z);

double sample_normal(Rng& rng, double mean, double sd);
double sample_uniform(Rng& rng, double lo, double hi);
double sample_gamma(Rng& rng, double shape, double rate);
double sample_inv_gamma(Rng& rng, double shape, double scale);
double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

/// log(sum(exp(values))) over a contiguous range; -inf for an empty or all -inf range.
double log_sum_exp(const double* values, std::size_t n);

}  // namespace agrisk::dist
