#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "agrisk/model.hpp"
#include "agrisk/panel.hpp"
#include "agrisk/smc.hpp"

namespace agrisk {

struct EvidenceRecord {
  VariantKind variant = VariantKind::Pooled;
  std::vector<std::string> country_set;
  double log_evidence = 0.0;  // mean over replicates
  double se_estimate = 0.0;   // sample sd over replicates; 0 for a single run
  std::vector<double> replicates;
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> seed_set;
  std::uint64_t data_fingerprint = 0;
};

/// Seed of replicate r under a parent seed; shared by every evidence
/// computation so that comparisons reuse the same streams.
std::uint64_t replicate_seed(std::uint64_t parent, std::size_t r);

/// Runs `replicates` independent SMC fits on `data` (all of its countries).
EvidenceRecord estimate_evidence(const AlignedDataset& data, VariantKind kind, const smc::SmcConfig& config,
                                 std::size_t replicates);

/// m1.log_evidence - m2.log_evidence; throws MismatchedData unless both were
/// computed on the same countries and data.
double log_bayes_factor(const EvidenceRecord& m1, const EvidenceRecord& m2);

inline constexpr double kDefaultTieMargin = 0.5;

struct SelectionStep {
  std::size_t step = 0;
  std::string candidate;
  bool accepted = false;
  EvidenceRecord base;
  EvidenceRecord with;
  double delta = 0.0;
};

struct SelectionResult {
  std::vector<std::string> selected;
  std::vector<SelectionStep> audit;
};

/// Greedy forward selection: each candidate, in order, is kept iff the mean
/// log-evidence of base + candidate exceeds that of the current base by more
/// than tie_margin nats.
SelectionResult forward_select(const AlignedDataset& data, const std::vector<std::string>& base,
                               const std::vector<std::string>& candidates, VariantKind kind,
                               const smc::SmcConfig& config, std::size_t replicates,
                               double tie_margin = kDefaultTieMargin);

/// Candidates sorted by descending total level over the sample (missing
/// levels count as zero); ties keep the input order.
std::vector<std::string> order_by_production(const AlignedDataset& data, const std::vector<std::string>& candidates);

}  // namespace agrisk
