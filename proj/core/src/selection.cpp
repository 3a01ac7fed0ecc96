#include "agrisk/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "agrisk/error.hpp"
#include "agrisk/inference.hpp"
#include "agrisk/rng.hpp"

namespace agrisk {

std::uint64_t replicate_seed(std::uint64_t parent, std::size_t r) { return derive_seed(parent, "evidence-replicate", r); }

EvidenceRecord estimate_evidence(const AlignedDataset& data, VariantKind kind, const smc::SmcConfig& config,
                                 std::size_t replicates) {
  if (replicates < 1) throw Error(Errc::InvalidArgument, "need at least one replicate");
  if (data.country_count() == 0) throw Error(Errc::InvalidArgument, "country set is empty");
  EvidenceRecord rec;
  rec.variant = kind;
  rec.country_set = data.countries;
  rec.config_hash = fnv1a(config.canonical());
  rec.data_fingerprint = data.fingerprint();
  const MarxTarget target(data, kind);
  for (std::size_t r = 0; r < replicates; ++r) {
    smc::SmcConfig c = config;
    c.seed = replicate_seed(config.seed, r);
    rec.seed_set.push_back(c.seed);
    rec.replicates.push_back(smc::run_smc(target, c).log_evidence);
  }
  double sum = 0.0;
  for (double v : rec.replicates) sum += v;
  rec.log_evidence = sum / static_cast<double>(replicates);
  if (replicates > 1) {
    double ss = 0.0;
    for (double v : rec.replicates) ss += (v - rec.log_evidence) * (v - rec.log_evidence);
    rec.se_estimate = std::sqrt(ss / static_cast<double>(replicates - 1));
  }
  return rec;
}

double log_bayes_factor(const EvidenceRecord& m1, const EvidenceRecord& m2) {
  if (m1.country_set != m2.country_set || m1.data_fingerprint != m2.data_fingerprint) {
    throw Error(Errc::MismatchedData, "evidence records were computed on different data");
  }
  return m1.log_evidence - m2.log_evidence;
}

SelectionResult forward_select(const AlignedDataset& data, const std::vector<std::string>& base,
                               const std::vector<std::string>& candidates, VariantKind kind,
                               const smc::SmcConfig& config, std::size_t replicates, double tie_margin) {
  if (base.empty()) throw Error(Errc::InvalidArgument, "base country set is empty");
  std::set<std::string> seen;
  for (const auto& id : base) {
    if (data.country_index(id) < 0) throw Error(Errc::InvalidArgument, fmt::format("base country '{}' not in data", id));
    if (!seen.insert(id).second) throw Error(Errc::InvalidArgument, fmt::format("base country '{}' repeated", id));
  }
  for (const auto& id : candidates) {
    if (data.country_index(id) < 0) {
      throw Error(Errc::InvalidArgument, fmt::format("candidate '{}' not in data", id));
    }
    if (!seen.insert(id).second) {
      throw Error(Errc::InvalidArgument, fmt::format("candidate '{}' repeats a base or candidate country", id));
    }
  }

  SelectionResult out;
  out.selected = base;
  EvidenceRecord current = estimate_evidence(data.subset_countries(out.selected), kind, config, replicates);
  for (std::size_t step = 0; step < candidates.size(); ++step) {
    std::vector<std::string> trial = out.selected;
    trial.push_back(candidates[step]);
    EvidenceRecord with = estimate_evidence(data.subset_countries(trial), kind, config, replicates);
    SelectionStep rec;
    rec.step = step + 1;
    rec.candidate = candidates[step];
    rec.delta = with.log_evidence - current.log_evidence;
    rec.accepted = rec.delta > tie_margin;
    rec.base = current;
    rec.with = with;
    if (rec.accepted) {
      out.selected = std::move(trial);
      current = std::move(with);
    }
    out.audit.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> order_by_production(const AlignedDataset& data, const std::vector<std::string>& candidates) {
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& id : candidates) {
    const std::ptrdiff_t i = data.country_index(id);
    if (i < 0) throw Error(Errc::InvalidArgument, fmt::format("candidate '{}' not in data", id));
    double total = 0.0;
    for (Eigen::Index t = 0; t < data.level.cols(); ++t) {
      const double v = data.level(i, t);
      if (std::isfinite(v)) total += v;
    }
    keyed.emplace_back(total, id);
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (auto& [_, id] : keyed) out.push_back(std::move(id));
  return out;
}

}  // namespace agrisk
