#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "agrisk/model.hpp"
#include "agrisk/panel.hpp"
#include "agrisk/smc.hpp"

namespace agrisk {

/// The model posterior as an SMC target over the unconstrained working
/// coordinates of a ParameterLayout. The log prior carries the log-Jacobian
/// of the working-to-natural map, so the evidence equals that of the natural
/// parameterization.
class MarxTarget final : public smc::Target {
 public:
  MarxTarget(const AlignedDataset& data, VariantKind kind);

  std::size_t dimension() const override { return layout_.dimension(); }
  double log_prior(std::span<const double> x) const override;
  double log_likelihood(std::span<const double> x) const override;
  void sample_prior(Rng& rng, std::span<double> x) const override;

  const ParameterLayout& layout() const { return layout_; }
  std::size_t observation_count() const { return cells_.size(); }

  /// Likelihood on natural coordinates, straight from the packed layout.
  double natural_log_likelihood(std::span<const double> natural) const;

 private:
  struct Cell {
    double time_index, y, lag1, lag2, dt, dt2;
  };
  ParameterLayout layout_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> country_begin_;  // cells_ of country i lie in [begin[i], begin[i+1])
  std::size_t intercept_width_, slope_width_, variance_width_;
};

/// Weighted posterior draws in natural units.
struct Posterior {
  ParameterLayout layout;
  Eigen::MatrixXd draws;  // N x d
  std::vector<double> weights;
  double log_evidence = 0.0;
  std::vector<smc::StageRecord> trace;

  std::size_t size() const { return weights.size(); }
  ParameterVector draw(std::size_t i) const;
  Eigen::VectorXd mean() const;
  Eigen::VectorXd sd() const;
  /// Weighted quantile of every coordinate.
  Eigen::VectorXd quantile(double p) const;
};

Posterior to_posterior(const ParameterLayout& layout, const smc::SmcResult& result);

/// Runs the SMC sampler for one variant on the full dataset.
Posterior fit(const AlignedDataset& data, VariantKind kind, const smc::SmcConfig& config);

/// A posterior concentrated on a single parameter value, e.g. the truth in
/// simulation studies.
Posterior point_posterior(const ParameterVector& params, const ModelVariant& variant, std::size_t copies = 2);

/// Header: every parameter name, then `weight`.
void write_posterior_csv(const std::filesystem::path& path, const Posterior& posterior);
/// Reads a file written by write_posterior_csv; the header must match the
/// layout's parameter names. Weights are renormalized.
Posterior read_posterior_csv(const std::filesystem::path& path, const ParameterLayout& layout);
/// Header: `stage,gamma,ess,scale,r_t,acc_rate,log_evidence_increment`.
void write_trace_csv(const std::filesystem::path& path, const std::vector<smc::StageRecord>& trace);

}  // namespace agrisk
