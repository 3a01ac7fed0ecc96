#include "agrisk/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "agrisk/distributions.hpp"
#include "agrisk/error.hpp"
#include "agrisk/parallel.hpp"

namespace agrisk::smc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTemperatureTol = 1e-6;

double sanitize(double log_value) { return std::isnan(log_value) ? kNegInf : log_value; }

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

struct Proposal {
  double esjd = 0.0;
  double acceptance = 0.0;
  bool accepted = false;
};

// One random-walk proposal for particle i; moves the particle when `apply` is
// set and the proposal is accepted.
Proposal propose(ParticleSystem& s, std::size_t i, const Target& target, const ProposalCovariance& cov, double h,
                 bool apply) {
  const auto d = static_cast<Eigen::Index>(s.dimension());
  Rng& rng = s.streams[i];
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
  const Eigen::VectorXd current = s.particles.row(static_cast<Eigen::Index>(i)).transpose();
  const Eigen::VectorXd candidate = current + h * (cov.cholesky * z);

  const std::span<const double> cand(candidate.data(), static_cast<std::size_t>(d));
  const double lp = sanitize(target.log_prior(cand));
  const double ll = std::isfinite(lp) ? sanitize(target.log_likelihood(cand)) : kNegInf;
  const double log_ratio = tempered(s.gamma, ll, lp) - tempered(s.gamma, s.log_likelihoods[i], s.log_priors[i]);
  double acceptance = 0.0;
  if (std::isfinite(lp) && !std::isnan(log_ratio)) acceptance = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);

  Proposal out;
  out.acceptance = acceptance;
  out.esjd = esjd(acceptance, h * h * z.squaredNorm());
  if (apply) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < acceptance) {
      s.particles.row(static_cast<Eigen::Index>(i)) = candidate.transpose();
      s.log_priors[i] = lp;
      s.log_likelihoods[i] = ll;
      out.accepted = true;
    }
  }
  return out;
}

}  // namespace

void SmcConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(Errc::InvalidArgument, fmt::format("smc.{}: {}", field, why));
  };
  if (n_particles < 2) fail("particles", "need at least 2 particles");
  if (!(ess_threshold > 0.0 && ess_threshold <= 1.0)) fail("ess_threshold", "must lie in (0, 1]");
  if (!(ess_target > 0.0 && ess_target < 1.0)) fail("ess_target", "must lie in (0, 1)");
  if (scale_candidates.empty()) fail("scale_candidates", "must not be empty");
  for (double c : scale_candidates) {
    if (!(c > 0.0) || !std::isfinite(c)) fail("scale_candidates", "entries must be positive");
  }
  if (!(esjd_target_fraction > 0.0 && esjd_target_fraction <= 1.0)) fail("esjd_target", "must lie in (0, 1]");
  if (max_move_iters < 1) fail("max_move_iters", "must be at least 1");
}

std::string SmcConfig::canonical() const {
  std::string out = fmt::format("particles={};ess_threshold={:.17g};ess_target={:.17g};esjd_target={:.17g};"
                                "max_move_iters={};scales=",
                                n_particles, ess_threshold, ess_target, esjd_target_fraction, max_move_iters);
  for (double c : scale_candidates) out += fmt::format("{:.17g},", c);
  return out;
}

std::vector<double> ParticleSystem::weights() const {
  std::vector<double> w(log_weights.size());
  std::transform(log_weights.begin(), log_weights.end(), w.begin(), [](double lw) { return std::exp(lw); });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

double ess(std::span<const double> weights) {
  double sum = 0.0, sum_sq = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw Error(Errc::UnnormalizedWeights, "weights must be finite and >= 0");
    sum += w;
    sum_sq += w * w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(Errc::UnnormalizedWeights, fmt::format("weights sum to {:.17g}", sum));
  }
  return 1.0 / sum_sq;
}

double ess_from_log_weights(std::span<const double> log_weights) {
  std::vector<double> doubled(log_weights.size());
  std::transform(log_weights.begin(), log_weights.end(), doubled.begin(), [](double lw) { return 2.0 * lw; });
  const double lse = dist::log_sum_exp(log_weights.data(), log_weights.size());
  const double lse2 = dist::log_sum_exp(doubled.data(), doubled.size());
  if (!std::isfinite(lse)) return 0.0;
  return std::exp(2.0 * lse - lse2);
}

ParticleSystem initialize(const Target& target, const SmcConfig& config) {
  config.validate();
  const std::size_t n = config.n_particles;
  const std::size_t d = target.dimension();
  ParticleSystem s;
  s.particles.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  s.log_weights.assign(n, -std::log(static_cast<double>(n)));
  s.log_likelihoods.assign(n, 0.0);
  s.log_priors.assign(n, 0.0);
  s.master = make_rng(config.seed, "smc-master");
  s.streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.streams.push_back(make_rng(config.seed, "smc-particle", i));

  parallel_for(n, config.threads, [&](std::size_t i) {
    std::vector<double> x(d);
    target.sample_prior(s.streams[i], x);
    for (std::size_t j = 0; j < d; ++j) s.particles(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[j];
    s.log_priors[i] = sanitize(target.log_prior(x));
    s.log_likelihoods[i] = sanitize(target.log_likelihood(x));
  });
  return s;
}

double next_temperature(const ParticleSystem& s, const SmcConfig& config) {
  if (1.0 - s.gamma <= kTemperatureTol) return 1.0;
  const double goal = config.ess_target * static_cast<double>(s.size());
  std::vector<double> lw(s.size());
  auto ess_at = [&](double g) {
    const double delta = g - s.gamma;
    for (std::size_t i = 0; i < s.size(); ++i) {
      lw[i] = s.log_likelihoods[i] == kNegInf ? kNegInf : s.log_weights[i] + delta * s.log_likelihoods[i];
    }
    return ess_from_log_weights(lw);
  };
  if (ess_at(1.0) >= goal) return 1.0;
  double lo = s.gamma, hi = 1.0;
  while (hi - lo > kTemperatureTol) {
    const double mid = 0.5 * (lo + hi);
    if (ess_at(mid) >= goal) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // The current population may already sit below the goal; always advance.
  return lo > s.gamma ? lo : hi;
}

double reweight(ParticleSystem& s, double gamma_next) {
  if (gamma_next < s.gamma) throw Error(Errc::InvalidArgument, "temperature must not decrease");
  const double delta = gamma_next - s.gamma;
  if (delta == 0.0) return 0.0;
  std::vector<double> lw(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    lw[i] = s.log_likelihoods[i] == kNegInf ? kNegInf : s.log_weights[i] + delta * s.log_likelihoods[i];
  }
  const double increment = dist::log_sum_exp(lw.data(), lw.size());
  if (!std::isfinite(increment)) {
    throw Error(Errc::AllWeightsZero, fmt::format("every particle has zero weight at gamma = {}", gamma_next));
  }
  for (std::size_t i = 0; i < s.size(); ++i) s.log_weights[i] = lw[i] - increment;
  s.gamma = gamma_next;
  s.log_evidence += increment;
  return increment;
}

std::vector<std::size_t> systematic_indices(std::span<const double> weights, double u) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out(n);
  double cumulative = weights.empty() ? 0.0 : weights[0];
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double position = (u + static_cast<double>(j)) / static_cast<double>(n);
    while (position >= cumulative && i + 1 < n) cumulative += weights[++i];
    out[j] = i;
  }
  return out;
}

void resample_systematic(ParticleSystem& s, Rng& rng) {
  const std::size_t n = s.size();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto idx = systematic_indices(s.weights(), unif(rng));
  Eigen::MatrixXd particles(s.particles.rows(), s.particles.cols());
  std::vector<double> ll(n), lp(n);
  for (std::size_t j = 0; j < n; ++j) {
    particles.row(static_cast<Eigen::Index>(j)) = s.particles.row(static_cast<Eigen::Index>(idx[j]));
    ll[j] = s.log_likelihoods[idx[j]];
    lp[j] = s.log_priors[idx[j]];
  }
  s.particles = std::move(particles);
  s.log_likelihoods = std::move(ll);
  s.log_priors = std::move(lp);
  s.log_weights.assign(n, -std::log(static_cast<double>(n)));
}

ProposalCovariance estimate_covariance(const ParticleSystem& s) {
  const auto w = s.weights();
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  ProposalCovariance out;
  out.mean = s.particles.transpose() * wv;
  const Eigen::MatrixXd centered = s.particles.rowwise() - out.mean.transpose();
  out.covariance = centered.transpose() * wv.asDiagonal() * centered;
  Eigen::LLT<Eigen::MatrixXd> llt(out.covariance);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::MatrixXd l = llt.matrixL();
    ok = (l.diagonal().array() > 0.0).all() && l.allFinite();
    if (ok) out.cholesky = l;
  }
  if (!ok) {
    out.diagonal_fallback = true;
    const Eigen::VectorXd diag = out.covariance.diagonal().array().max(0.0) + 1e-10;
    out.cholesky = diag.cwiseSqrt().asDiagonal();
  }
  return out;
}

double mahalanobis_sq(const ProposalCovariance& cov, const Eigen::VectorXd& x) {
  const Eigen::VectorXd diff = x - cov.mean;
  return cov.cholesky.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
}

ScaleTuning tune_scale(ParticleSystem& s, const Target& target, const SmcConfig& config,
                       const ProposalCovariance& cov) {
  const double h_ref = 2.38 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, s.dimension())));
  ScaleTuning out;
  double best = -1.0;
  std::vector<double> esjds(s.size());
  for (double c : config.scale_candidates) {
    const double h = c * h_ref;
    parallel_for(s.size(), config.threads, [&](std::size_t i) { esjds[i] = propose(s, i, target, cov, h, false).esjd; });
    const double m = median_of(esjds);
    out.median_esjd_by_candidate.emplace_back(h, m);
    if (m > best) {
      best = m;
      out.scale = h;
    }
  }
  return out;
}

MoveResult move_particles(ParticleSystem& s, const Target& target, const SmcConfig& config, double scale,
                          const ProposalCovariance& cov) {
  if (!(scale > 0.0)) throw Error(Errc::InvalidArgument, "move scale must be positive");
  const std::size_t n = s.size();
  std::vector<double> distances(n);
  for (std::size_t i = 0; i < n; ++i) {
    distances[i] = mahalanobis_sq(cov, s.particles.row(static_cast<Eigen::Index>(i)).transpose());
  }
  MoveResult out;
  out.d_desired = median_of(distances);

  std::vector<double> cumulative(n, 0.0);
  std::vector<char> accepted(n, 0);
  std::size_t total_accepted = 0;
  const auto needed = static_cast<std::size_t>(std::ceil(config.esjd_target_fraction * static_cast<double>(n)));
  while (true) {
    parallel_for(n, config.threads, [&](std::size_t i) {
      const Proposal p = propose(s, i, target, cov, scale, true);
      cumulative[i] += p.esjd;
      accepted[i] = p.accepted ? 1 : 0;
    });
    ++out.sweeps;
    total_accepted += static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), 1));
    const auto passing = static_cast<std::size_t>(
        std::count_if(cumulative.begin(), cumulative.end(), [&](double e) { return e > out.d_desired; }));
    if (passing >= needed || out.sweeps >= config.max_move_iters) break;
  }
  out.acceptance_rate = static_cast<double>(total_accepted) / static_cast<double>(n * static_cast<std::size_t>(out.sweeps));
  return out;
}

SmcResult run_smc(const Target& target, const SmcConfig& config) {
  SmcResult result;
  result.system = initialize(target, config);
  ParticleSystem& s = result.system;
  const double n = static_cast<double>(s.size());
  while (s.gamma < 1.0) {
    StageRecord rec;
    const double g = next_temperature(s, config);
    rec.log_evidence_increment = reweight(s, g);
    rec.gamma = s.gamma;
    rec.ess = ess_from_log_weights(s.log_weights);
    ++s.stage;
    rec.stage = s.stage;
    if (rec.ess < config.ess_threshold * n) {
      resample_systematic(s, s.master);
      rec.resampled = true;
      const ProposalCovariance cov = estimate_covariance(s);
      const ScaleTuning tuning = tune_scale(s, target, config, cov);
      rec.scale = tuning.scale;
      const MoveResult moved = move_particles(s, target, config, tuning.scale, cov);
      rec.moves = moved.sweeps;
      rec.acceptance_rate = moved.acceptance_rate;
    }
    result.trace.push_back(rec);
  }
  result.log_evidence = 0.0;
  for (const auto& r : result.trace) result.log_evidence += r.log_evidence_increment;
  s.log_evidence = result.log_evidence;
  return result;
}

}  // namespace agrisk::smc
