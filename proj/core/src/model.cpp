#include "agrisk/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "agrisk/distributions.hpp"
#include "agrisk/error.hpp"

namespace agrisk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<double>& theta_vec(const ParameterVector& p, int j) {
  switch (j) {
    case 1: return p.theta1;
    case 2: return p.theta2;
    case 3: return p.theta3;
    default: return p.theta4;
  }
}

std::vector<double>& theta_vec(ParameterVector& p, int j) {
  return const_cast<std::vector<double>&>(theta_vec(std::as_const(p), j));
}

std::size_t width(bool per_country, std::size_t k) { return per_country ? k : 1; }

void expand(std::vector<double>& v, std::size_t n) {
  if (v.size() == n) return;
  if (v.size() != 1) throw Error(Errc::DimensionMismatch, fmt::format("cannot expand length {} to {}", v.size(), n));
  v.assign(n, v[0]);
}

}  // namespace

bool ModelVariant::per_country_intercept() const {
  return kind == VariantKind::HierIntercept || kind == VariantKind::HierInterceptVariance ||
         kind == VariantKind::IndependentIV || kind == VariantKind::FullHier;
}
bool ModelVariant::per_country_variance() const {
  return kind == VariantKind::HierVariance || kind == VariantKind::HierInterceptVariance ||
         kind == VariantKind::IndependentIV || kind == VariantKind::FullHier;
}
bool ModelVariant::per_country_slopes() const { return kind == VariantKind::FullHier; }
bool ModelVariant::intercept_hyper() const {
  return kind == VariantKind::HierIntercept || kind == VariantKind::HierInterceptVariance ||
         kind == VariantKind::FullHier;
}
bool ModelVariant::variance_hyper() const {
  return kind == VariantKind::HierVariance || kind == VariantKind::HierInterceptVariance ||
         kind == VariantKind::FullHier;
}
bool ModelVariant::slope_hyper() const { return kind == VariantKind::FullHier; }

std::string_view variant_name(VariantKind kind) {
  switch (kind) {
    case VariantKind::Pooled: return "pooled";
    case VariantKind::HierIntercept: return "hier-intercept";
    case VariantKind::HierVariance: return "hier-variance";
    case VariantKind::HierInterceptVariance: return "hier-iv";
    case VariantKind::IndependentIV: return "independent-iv";
    case VariantKind::FullHier: return "full-hier";
  }
  return "unknown";
}

VariantKind parse_variant(std::string_view name) {
  for (auto k : all_variants()) {
    if (variant_name(k) == name) return k;
  }
  throw Error(Errc::InvalidArgument, fmt::format("unknown model variant '{}'", name));
}

std::vector<VariantKind> all_variants() {
  return {VariantKind::Pooled,       VariantKind::HierIntercept, VariantKind::HierVariance,
          VariantKind::HierInterceptVariance, VariantKind::IndependentIV, VariantKind::FullHier};
}

std::size_t parameter_dimension(const ModelVariant& v) {
  const std::size_t k = v.countries;
  std::size_t d = 2 * width(v.per_country_intercept(), k) + 4 * width(v.per_country_slopes(), k) +
                  width(v.per_country_variance(), k);
  if (v.intercept_hyper()) d += 4;
  if (v.slope_hyper()) d += 8;
  if (v.variance_hyper()) d += 2;
  return d;
}

double ParameterVector::theta_of(int j, std::size_t i) const { return pick(theta_vec(*this, j), i); }

ParameterVector ParameterVector::shared(double a, double lambda, double theta1, double theta2, double theta3,
                                       double theta4, double sigma2) {
  ParameterVector p;
  p.a = {a};
  p.lambda = {lambda};
  p.theta1 = {theta1};
  p.theta2 = {theta2};
  p.theta3 = {theta3};
  p.theta4 = {theta4};
  p.sigma2 = {sigma2};
  return p;
}

ParameterVector expand_to(const ParameterVector& params, const ModelVariant& variant) {
  ParameterVector p = params;
  const std::size_t k = variant.countries;
  expand(p.a, width(variant.per_country_intercept(), k));
  expand(p.lambda, width(variant.per_country_intercept(), k));
  for (int j = 1; j <= 4; ++j) expand(theta_vec(p, j), width(variant.per_country_slopes(), k));
  expand(p.sigma2, width(variant.per_country_variance(), k));
  return p;
}

void check_dimensions(const ParameterVector& p, const ModelVariant& v) {
  const std::size_t k = v.countries;
  auto check = [](const std::vector<double>& vec, std::size_t n, const char* name) {
    if (vec.size() != n) {
      throw Error(Errc::DimensionMismatch, fmt::format("{} has length {}, expected {}", name, vec.size(), n));
    }
  };
  check(p.a, width(v.per_country_intercept(), k), "a");
  check(p.lambda, width(v.per_country_intercept(), k), "lambda");
  check(p.theta1, width(v.per_country_slopes(), k), "theta1");
  check(p.theta2, width(v.per_country_slopes(), k), "theta2");
  check(p.theta3, width(v.per_country_slopes(), k), "theta3");
  check(p.theta4, width(v.per_country_slopes(), k), "theta4");
  check(p.sigma2, width(v.per_country_variance(), k), "sigma2");
}

double conditional_mean(const ParameterVector& params, const AlignedDataset& data, std::size_t i, std::size_t t) {
  if (i >= data.country_count() || t >= data.year_count()) {
    throw Error(Errc::InvalidArgument, "conditional_mean index out of range");
  }
  const auto r = static_cast<Eigen::Index>(i);
  const auto c = static_cast<Eigen::Index>(t);
  const double l1 = data.y_lag1(r, c), l2 = data.y_lag2(r, c), dt = data.dt(r, c), dt2 = data.dt2(r, c);
  if (!std::isfinite(l1) || !std::isfinite(l2) || !std::isfinite(dt) || !std::isfinite(dt2)) {
    throw Error(Errc::MissingRegressor,
                fmt::format("country '{}' year {} lacks a regressor", data.countries[i], data.years[t]));
  }
  return mean_value(params, i, data.time_index[t], l1, l2, dt, dt2);
}

double log_likelihood(const ParameterVector& params, const AlignedDataset& data, const ModelVariant& variant) {
  if (variant.countries != data.country_count()) {
    throw Error(Errc::DimensionMismatch, fmt::format("variant has K = {}, dataset has {}", variant.countries,
                                                     data.country_count()));
  }
  check_dimensions(params, variant);
  double total = 0.0;
  for (std::size_t i = 0; i < data.country_count(); ++i) {
    const double s2 = params.sigma2_of(i);
    if (!(s2 >= prior::kMinVariance) || !std::isfinite(s2)) {
      throw Error(Errc::NonPositiveVariance, fmt::format("sigma2 for country {} is {}", i, s2));
    }
    double ssr = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < data.year_count(); ++t) {
      if (!data.observed(i, t)) continue;
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(t);
      const double mu = mean_value(params, i, data.time_index[t], data.y_lag1(r, c), data.y_lag2(r, c),
                                   data.dt(r, c), data.dt2(r, c));
      const double e = data.y(r, c) - mu;
      ssr += e * e;
      ++n;
    }
    if (n > 0) total += -static_cast<double>(n) * (dist::kLogSqrt2Pi + 0.5 * std::log(s2)) - 0.5 * ssr / s2;
  }
  return total;
}

double log_prior(const ParameterVector& p, const ModelVariant& v) {
  check_dimensions(p, v);
  double lp = 0.0;

  auto intercept_block = [&](const std::vector<double>& values, const Hyper& hyper, double upper) {
    if (v.intercept_hyper()) {
      lp += dist::uniform_log_pdf(hyper.mean, 0.0, upper);
      lp += dist::gamma_log_pdf(hyper.scale, prior::kHyperShape, prior::kHyperRate);
      if (!std::isfinite(lp)) return;
      for (double x : values) lp += dist::truncated_normal_log_pdf(x, hyper.mean, hyper.scale, 0.0, upper);
    } else {
      for (double x : values) lp += dist::uniform_log_pdf(x, 0.0, upper);
    }
  };
  intercept_block(p.a, p.a_hyper, prior::kAMax);
  intercept_block(p.lambda, p.lambda_hyper, prior::kLambdaMax);
  if (!std::isfinite(lp)) return dist::kNegInf;

  for (int j = 1; j <= 4; ++j) {
    const auto& values = theta_vec(p, j);
    const double sd = prior::kThetaSd[static_cast<std::size_t>(j - 1)];
    if (v.slope_hyper()) {
      const Hyper& h = p.theta_hyper[static_cast<std::size_t>(j - 1)];
      lp += dist::normal_log_pdf(h.mean, 0.0, prior::kSlopeMeanSd);
      lp += dist::gamma_log_pdf(h.scale, prior::kHyperShape, prior::kHyperRate);
      if (!std::isfinite(lp)) return dist::kNegInf;
      for (double x : values) lp += dist::normal_log_pdf(x, h.mean, h.scale);
    } else {
      for (double x : values) lp += dist::normal_log_pdf(x, 0.0, sd);
    }
  }
  if (!std::isfinite(lp)) return dist::kNegInf;

  if (v.variance_hyper()) {
    lp += dist::gamma_log_pdf(p.alpha_sigma, prior::kHyperShape, prior::kHyperRate);
    lp += dist::gamma_log_pdf(p.beta_sigma, prior::kHyperShape, prior::kHyperRate);
    if (!std::isfinite(lp)) return dist::kNegInf;
    for (double s2 : p.sigma2) lp += dist::inv_gamma_log_pdf(s2, p.alpha_sigma, p.beta_sigma);
  } else {
    for (double s2 : p.sigma2) lp += dist::inv_gamma_log_pdf(s2, prior::kSigma2Shape, prior::kSigma2Scale);
  }
  return std::isfinite(lp) ? lp : dist::kNegInf;
}

ParameterVector sample_prior(const ModelVariant& v, Rng& rng) {
  ParameterVector p;
  const std::size_t k = v.countries;

  auto intercept_block = [&](std::vector<double>& values, Hyper& hyper, double upper) {
    const std::size_t n = width(v.per_country_intercept(), k);
    values.resize(n);
    if (v.intercept_hyper()) {
      hyper.mean = dist::sample_uniform(rng, 0.0, upper);
      hyper.scale = dist::sample_gamma(rng, prior::kHyperShape, prior::kHyperRate);
      for (auto& x : values) x = dist::sample_truncated_normal(rng, hyper.mean, hyper.scale, 0.0, upper);
    } else {
      for (auto& x : values) x = dist::sample_uniform(rng, 0.0, upper);
    }
  };
  intercept_block(p.a, p.a_hyper, prior::kAMax);
  intercept_block(p.lambda, p.lambda_hyper, prior::kLambdaMax);

  for (int j = 1; j <= 4; ++j) {
    auto& values = theta_vec(p, j);
    values.resize(width(v.per_country_slopes(), k));
    if (v.slope_hyper()) {
      Hyper& h = p.theta_hyper[static_cast<std::size_t>(j - 1)];
      h.mean = dist::sample_normal(rng, 0.0, prior::kSlopeMeanSd);
      h.scale = dist::sample_gamma(rng, prior::kHyperShape, prior::kHyperRate);
      for (auto& x : values) x = dist::sample_normal(rng, h.mean, h.scale);
    } else {
      const double sd = prior::kThetaSd[static_cast<std::size_t>(j - 1)];
      for (auto& x : values) x = dist::sample_normal(rng, 0.0, sd);
    }
  }

  p.sigma2.resize(width(v.per_country_variance(), k));
  if (v.variance_hyper()) {
    p.alpha_sigma = dist::sample_gamma(rng, prior::kHyperShape, prior::kHyperRate);
    p.beta_sigma = dist::sample_gamma(rng, prior::kHyperShape, prior::kHyperRate);
    for (auto& s2 : p.sigma2) s2 = dist::sample_inv_gamma(rng, p.alpha_sigma, p.beta_sigma);
  } else {
    for (auto& s2 : p.sigma2) s2 = dist::sample_inv_gamma(rng, prior::kSigma2Shape, prior::kSigma2Scale);
  }
  return p;
}

AlignedDataset simulate_dataset(const ParameterVector& params, const ModelVariant& variant, std::size_t countries,
                                std::size_t years, const ClimatePanel& climate, Rng& rng,
                                const SimulationOptions& options) {
  if (variant.countries != countries) throw Error(Errc::DimensionMismatch, "variant K differs from requested K");
  check_dimensions(params, variant);
  if (climate.countries.size() < countries || static_cast<std::size_t>(climate.delta_t.cols()) < years + 2) {
    throw Error(Errc::DimensionMismatch,
                fmt::format("climate covers {} countries x {} differences, need {} x {}", climate.countries.size(),
                            climate.delta_t.cols(), countries, years + 2));
  }
  if (options.initial && (options.initial->rows() != static_cast<Eigen::Index>(countries) ||
                          options.initial->cols() != 2)) {
    throw Error(Errc::DimensionMismatch, "initial lags must be K x 2");
  }
  const auto k = static_cast<Eigen::Index>(countries);
  const auto t = static_cast<Eigen::Index>(years);
  const Eigen::Index n = t + 2;

  // Full log-return path, column s holds the return labelled time index s + 1.
  Eigen::MatrixXd path(k, n);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double sd = std::sqrt(std::max(0.0, params.sigma2_of(ii)));
    for (Eigen::Index s = 0; s < 2; ++s) {
      path(i, s) = options.initial ? (*options.initial)(i, s) : dist::sample_normal(rng, 0.0, 1.0) * sd;
    }
    for (Eigen::Index s = 2; s < n; ++s) {
      const double mu = mean_value(params, ii, static_cast<double>(s + 1), path(i, s - 1), path(i, s - 2),
                                   climate.delta_t(i, s), climate.delta_t_sq(i, s));
      path(i, s) = mu + sd * dist::sample_normal(rng, 0.0, 1.0);
    }
  }

  AlignedDataset out;
  out.countries.assign(climate.countries.begin(), climate.countries.begin() + k);
  for (Eigen::Index c = 0; c < t; ++c) {
    out.years.push_back(climate.years[static_cast<std::size_t>(c + 3)]);
    out.time_index.push_back(static_cast<int>(c + 3));
  }
  out.y = path.rightCols(t);
  out.y_lag1 = path.middleCols(1, t);
  out.y_lag2 = path.leftCols(t);
  out.dt = climate.delta_t.block(0, 2, k, t);
  out.dt2 = climate.delta_t_sq.block(0, 2, k, t);
  out.level.resize(k, t);
  out.level_prev.resize(k, t);
  for (Eigen::Index i = 0; i < k; ++i) {
    double lvl = options.base_level;
    for (Eigen::Index s = 0; s < n; ++s) {
      const double prev = lvl;
      lvl *= std::exp(path(i, s));
      if (s >= 2) {
        out.level(i, s - 2) = lvl;
        out.level_prev(i, s - 2) = prev;
      }
    }
  }
  return out;
}

ParameterLayout::ParameterLayout(ModelVariant variant, std::vector<std::string> country_ids) : variant_(variant) {
  using S = ParameterSlot::Support;
  const std::size_t k = variant.countries;
  if (country_ids.empty()) {
    for (std::size_t i = 0; i < k; ++i) country_ids.push_back(std::to_string(i + 1));
  }
  if (country_ids.size() != k) throw Error(Errc::DimensionMismatch, "country id count differs from K");

  auto add = [&](const std::string& base, bool per_country, S support, double lo, double hi) {
    if (per_country) {
      for (const auto& id : country_ids) slots_.push_back({fmt::format("{}[{}]", base, id), support, lo, hi});
    } else {
      slots_.push_back({base, support, lo, hi});
    }
  };
  add("a", variant.per_country_intercept(), S::Interval, 0.0, prior::kAMax);
  add("lambda", variant.per_country_intercept(), S::Interval, 0.0, prior::kLambdaMax);
  for (int j = 1; j <= 4; ++j) add(fmt::format("theta{}", j), variant.per_country_slopes(), S::Real, 0, 0);
  add("sigma2", variant.per_country_variance(), S::Positive, 0, 0);
  if (variant.intercept_hyper()) {
    slots_.push_back({"a_mean", S::Interval, 0.0, prior::kAMax});
    slots_.push_back({"a_scale", S::Positive, 0, 0});
    slots_.push_back({"lambda_mean", S::Interval, 0.0, prior::kLambdaMax});
    slots_.push_back({"lambda_scale", S::Positive, 0, 0});
  }
  if (variant.slope_hyper()) {
    for (int j = 1; j <= 4; ++j) {
      slots_.push_back({fmt::format("theta{}_mean", j), S::Real, 0, 0});
      slots_.push_back({fmt::format("theta{}_scale", j), S::Positive, 0, 0});
    }
  }
  if (variant.variance_hyper()) {
    slots_.push_back({"alpha_sigma", S::Positive, 0, 0});
    slots_.push_back({"beta_sigma", S::Positive, 0, 0});
  }
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& s : slots_) out.push_back(s.name);
  return out;
}

std::vector<double> ParameterLayout::pack(const ParameterVector& p) const {
  check_dimensions(p, variant_);
  std::vector<double> out;
  out.reserve(slots_.size());
  auto append = [&](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); };
  append(p.a);
  append(p.lambda);
  append(p.theta1);
  append(p.theta2);
  append(p.theta3);
  append(p.theta4);
  append(p.sigma2);
  if (variant_.intercept_hyper()) {
    out.insert(out.end(), {p.a_hyper.mean, p.a_hyper.scale, p.lambda_hyper.mean, p.lambda_hyper.scale});
  }
  if (variant_.slope_hyper()) {
    for (const auto& h : p.theta_hyper) out.insert(out.end(), {h.mean, h.scale});
  }
  if (variant_.variance_hyper()) out.insert(out.end(), {p.alpha_sigma, p.beta_sigma});
  return out;
}

ParameterVector ParameterLayout::unpack(std::span<const double> values) const {
  if (values.size() != slots_.size()) {
    throw Error(Errc::DimensionMismatch, fmt::format("expected {} coordinates, got {}", slots_.size(), values.size()));
  }
  const std::size_t k = variant_.countries;
  ParameterVector p;
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& v, std::size_t n) {
    v.assign(values.begin() + static_cast<std::ptrdiff_t>(pos), values.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  };
  take(p.a, width(variant_.per_country_intercept(), k));
  take(p.lambda, width(variant_.per_country_intercept(), k));
  for (int j = 1; j <= 4; ++j) take(theta_vec(p, j), width(variant_.per_country_slopes(), k));
  take(p.sigma2, width(variant_.per_country_variance(), k));
  if (variant_.intercept_hyper()) {
    p.a_hyper = {values[pos], values[pos + 1]};
    p.lambda_hyper = {values[pos + 2], values[pos + 3]};
    pos += 4;
  }
  if (variant_.slope_hyper()) {
    for (auto& h : p.theta_hyper) {
      h = {values[pos], values[pos + 1]};
      pos += 2;
    }
  }
  if (variant_.variance_hyper()) {
    p.alpha_sigma = values[pos];
    p.beta_sigma = values[pos + 1];
  }
  return p;
}

std::vector<double> ParameterLayout::to_working(std::span<const double> natural) const {
  if (natural.size() != slots_.size()) throw Error(Errc::DimensionMismatch, "to_working: wrong length");
  std::vector<double> w(natural.size());
  for (std::size_t j = 0; j < natural.size(); ++j) {
    const auto& s = slots_[j];
    const double x = natural[j];
    switch (s.support) {
      case ParameterSlot::Support::Real: w[j] = x; break;
      case ParameterSlot::Support::Positive: w[j] = std::log(x); break;
      case ParameterSlot::Support::Interval: {
        const double u = (x - s.lo) / (s.hi - s.lo);
        w[j] = std::log(u) - std::log1p(-u);
        break;
      }
    }
  }
  return w;
}

double ParameterLayout::from_working(std::span<const double> working, std::span<double> natural) const {
  double log_jac = 0.0;
  for (std::size_t j = 0; j < slots_.size(); ++j) {
    const auto& s = slots_[j];
    const double w = working[j];
    switch (s.support) {
      case ParameterSlot::Support::Real: natural[j] = w; break;
      case ParameterSlot::Support::Positive:
        natural[j] = std::exp(w);
        log_jac += w;
        break;
      case ParameterSlot::Support::Interval: {
        // log sigmoid(w) and log(1 - sigmoid(w)) without cancellation.
        const double log_u = -std::log1p(std::exp(-std::abs(w))) + std::min(w, 0.0);
        const double log_1mu = -std::log1p(std::exp(-std::abs(w))) + std::min(-w, 0.0);
        const double u = std::exp(log_u);
        natural[j] = s.lo + (s.hi - s.lo) * u;
        log_jac += std::log(s.hi - s.lo) + log_u + log_1mu;
        break;
      }
    }
  }
  return log_jac;
}

}  // namespace agrisk
