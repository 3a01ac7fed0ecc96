#include "agrisk/inference.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "agrisk/csv.hpp"
#include "agrisk/distributions.hpp"
#include "agrisk/error.hpp"
#include "agrisk/risk.hpp"

namespace agrisk {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

MarxTarget::MarxTarget(const AlignedDataset& data, VariantKind kind)
    : layout_(ModelVariant{kind, data.country_count()}, data.countries) {
  const ModelVariant& v = layout_.variant();
  const std::size_t k = v.countries;
  intercept_width_ = v.per_country_intercept() ? k : 1;
  slope_width_ = v.per_country_slopes() ? k : 1;
  variance_width_ = v.per_country_variance() ? k : 1;
  country_begin_.push_back(0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t t = 0; t < data.year_count(); ++t) {
      if (!data.observed(i, t)) continue;
      const auto c = static_cast<Eigen::Index>(t);
      cells_.push_back({static_cast<double>(data.time_index[t]), data.y(r, c), data.y_lag1(r, c), data.y_lag2(r, c),
                        data.dt(r, c), data.dt2(r, c)});
    }
    country_begin_.push_back(cells_.size());
  }
}

double MarxTarget::natural_log_likelihood(std::span<const double> x) const {
  const std::size_t wa = intercept_width_, ws = slope_width_, wv = variance_width_;
  const std::size_t k = country_begin_.size() - 1;
  const double* a = x.data();
  const double* lambda = a + wa;
  const double* th1 = lambda + wa;
  const double* th2 = th1 + ws;
  const double* th3 = th2 + ws;
  const double* th4 = th3 + ws;
  const double* s2 = th4 + ws;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t begin = country_begin_[i], end = country_begin_[i + 1];
    if (begin == end) continue;
    const std::size_t ia = wa == 1 ? 0 : i, is = ws == 1 ? 0 : i, iv = wv == 1 ? 0 : i;
    const double var = s2[iv];
    if (!(var >= prior::kMinVariance) || !std::isfinite(var)) return dist::kNegInf;
    double ssr = 0.0;
    for (std::size_t c = begin; c < end; ++c) {
      const Cell& cell = cells_[c];
      const double mu = a[ia] * std::exp(-lambda[ia] * cell.time_index) + th1[is] * cell.lag1 + th2[is] * cell.lag2 +
                        th3[is] * cell.dt + th4[is] * cell.dt2;
      const double e = cell.y - mu;
      ssr += e * e;
    }
    const auto n = static_cast<double>(end - begin);
    total += -n * (dist::kLogSqrt2Pi + 0.5 * std::log(var)) - 0.5 * ssr / var;
  }
  return std::isnan(total) ? dist::kNegInf : total;
}

double MarxTarget::log_likelihood(std::span<const double> w) const {
  if (cells_.empty()) return 0.0;
  thread_local std::vector<double> natural;
  natural.resize(w.size());
  layout_.from_working(w, natural);
  return natural_log_likelihood(natural);
}

double MarxTarget::log_prior(std::span<const double> w) const {
  std::vector<double> natural(w.size());
  const double log_jac = layout_.from_working(w, natural);
  const double lp = agrisk::log_prior(layout_.unpack(natural), layout_.variant());
  if (!std::isfinite(lp) || !std::isfinite(log_jac)) return dist::kNegInf;
  return lp + log_jac;
}

void MarxTarget::sample_prior(Rng& rng, std::span<double> x) const {
  while (true) {
    const auto natural = layout_.pack(agrisk::sample_prior(layout_.variant(), rng));
    const auto w = layout_.to_working(natural);
    bool finite = true;
    for (double v : w) finite = finite && std::isfinite(v);
    if (!finite) continue;  // a draw landed exactly on a support boundary
    std::copy(w.begin(), w.end(), x.begin());
    return;
  }
}

ParameterVector Posterior::draw(std::size_t i) const {
  const Eigen::VectorXd row = draws.row(static_cast<Eigen::Index>(i)).transpose();
  return layout.unpack(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
}

Eigen::VectorXd Posterior::mean() const {
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return draws.transpose() * w;
}

Eigen::VectorXd Posterior::sd() const {
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Eigen::VectorXd m = mean();
  const Eigen::MatrixXd centered = draws.rowwise() - m.transpose();
  return (centered.array().square().matrix().transpose() * w).cwiseSqrt();
}

Eigen::VectorXd Posterior::quantile(double p) const {
  Eigen::VectorXd out(draws.cols());
  std::vector<double> column(size());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    for (std::size_t i = 0; i < size(); ++i) column[i] = draws(static_cast<Eigen::Index>(i), j);
    out(j) = weighted_quantile(column, weights, p);
  }
  return out;
}

Posterior to_posterior(const ParameterLayout& layout, const smc::SmcResult& result) {
  const auto& s = result.system;
  Posterior post{layout, Eigen::MatrixXd(s.particles.rows(), s.particles.cols()), s.weights(), result.log_evidence,
                 result.trace};
  std::vector<double> working(s.dimension()), natural(s.dimension());
  for (Eigen::Index i = 0; i < s.particles.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.particles.cols(); ++j) working[static_cast<std::size_t>(j)] = s.particles(i, j);
    layout.from_working(working, natural);
    for (Eigen::Index j = 0; j < s.particles.cols(); ++j) post.draws(i, j) = natural[static_cast<std::size_t>(j)];
  }
  return post;
}

Posterior fit(const AlignedDataset& data, VariantKind kind, const smc::SmcConfig& config) {
  if (data.country_count() == 0) throw Error(Errc::InvalidArgument, "dataset has no countries");
  const MarxTarget target(data, kind);
  return to_posterior(target.layout(), smc::run_smc(target, config));
}

Posterior point_posterior(const ParameterVector& params, const ModelVariant& variant, std::size_t copies) {
  if (copies < 1) throw Error(Errc::InvalidArgument, "point posterior needs at least one copy");
  ParameterLayout layout(variant);
  const auto packed = layout.pack(expand_to(params, variant));
  Posterior post{layout, Eigen::MatrixXd(static_cast<Eigen::Index>(copies), static_cast<Eigen::Index>(packed.size())),
                 std::vector<double>(copies, 1.0 / static_cast<double>(copies)), 0.0, {}};
  for (std::size_t i = 0; i < copies; ++i) {
    for (std::size_t j = 0; j < packed.size(); ++j) {
      post.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = packed[j];
    }
  }
  return post;
}

void write_posterior_csv(const std::filesystem::path& path, const Posterior& posterior) {
  auto out = open_output(path);
  csv::Writer w(out);
  for (const auto& name : posterior.layout.names()) w.field(name);
  w.field("weight");
  w.end_row();
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    for (Eigen::Index j = 0; j < posterior.draws.cols(); ++j) w.field(posterior.draws(static_cast<Eigen::Index>(i), j));
    w.field(posterior.weights[i]);
    w.end_row();
  }
}

Posterior read_posterior_csv(const std::filesystem::path& path, const ParameterLayout& layout) {
  const csv::Table table = csv::read(path);
  auto expected = layout.names();
  expected.push_back("weight");
  if (table.header != expected) {
    throw Error(Errc::MalformedFile, fmt::format("{}: header does not match the {} parameters of variant {}",
                                                 path.string(), layout.dimension(),
                                                 variant_name(layout.variant().kind)));
  }
  if (table.rows.empty()) throw Error(Errc::MalformedFile, fmt::format("{}: no draws", path.string()));
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(layout.dimension());
  Posterior post{layout, Eigen::MatrixXd(n, d), std::vector<double>(table.rows.size()), 0.0, {}};
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const std::string where = fmt::format("{}:{}", path.string(), table.line_numbers[r]);
    if (table.rows[r].size() != expected.size()) throw Error(Errc::MalformedFile, where + ": wrong field count");
    for (Eigen::Index j = 0; j < d; ++j) {
      post.draws(i, j) = csv::parse_double(table.rows[r][static_cast<std::size_t>(j)], where);
    }
    const double w = csv::parse_double(table.rows[r].back(), where);
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Errc::MalformedFile, where + ": invalid weight");
    post.weights[r] = w;
    total += w;
  }
  if (!(total > 0.0)) throw Error(Errc::MalformedFile, fmt::format("{}: weights sum to zero", path.string()));
  for (auto& w : post.weights) w /= total;
  return post;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<smc::StageRecord>& trace) {
  auto out = open_output(path);
  csv::Writer w(out);
  w.row({"stage", "gamma", "ess", "scale", "r_t", "acc_rate", "log_evidence_increment"});
  for (const auto& r : trace) {
    w.field(r.stage).field(r.gamma).field(r.ess).field(r.scale).field(r.moves).field(r.acceptance_rate);
    w.field(r.log_evidence_increment);
    w.end_row();
  }
}

}  // namespace agrisk
