#include "varlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "varlab/error.hpp"
#include "varlab/stats.hpp"

namespace varlab {

namespace {

constexpr double kSlack = 1e-12;

int nearest_rank_int(std::vector<int> sorted, double p) {
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

}  // namespace

ChoiceDistribution choice_distribution(const std::string& stimulus_id, const ChoiceCounts& counts) {
  ChoiceDistribution d;
  d.stimulus_id = stimulus_id;
  d.counts = counts;
  for (int c : counts) {
    require(c >= 0, ErrorCode::kValidation, "negative choice count");
    d.n += c;
  }
  require(d.n > 0, ErrorCode::kEmptyInput, "no responses for stimulus " + stimulus_id);
  for (int e = 0; e < kNumEmotions; ++e) d.probs[e] = static_cast<double>(counts[e]) / d.n;
  return d;
}

ChoiceDistribution choice_distribution(std::span<const TrialRecord> trials) {
  ChoiceCounts counts{};
  std::string id;
  for (const auto& t : trials) {
    if (t.is_sentinel) continue;
    if (id.empty()) id = t.stimulus_id;
    require(t.stimulus_id == id, ErrorCode::kInputShape, "trials span several stimuli");
    require(t.choice >= 0 && t.choice < kNumEmotions, ErrorCode::kValidation, "choice out of range");
    ++counts[t.choice];
  }
  require(!id.empty(), ErrorCode::kEmptyInput, "no non-sentinel trials");
  return choice_distribution(id, counts);
}

double entropy_bits(const ChoiceDistribution& dist) {
  require(dist.n > 0, ErrorCode::kEmptyInput, "entropy of an empty distribution");
  return stats::entropy_bits(dist.probs);
}

std::map<std::string, ChoiceDistribution> distributions_by_stimulus(
    std::span<const TrialRecord> trials, bool include_sentinels) {
  std::map<std::string, ChoiceCounts> counts;
  for (const auto& t : trials) {
    if (t.is_sentinel && !include_sentinels) continue;
    ++counts[t.stimulus_id][t.choice];
  }
  std::map<std::string, ChoiceDistribution> out;
  for (const auto& [id, c] : counts) out.emplace(id, choice_distribution(id, c));
  return out;
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::kSuccess: return "success";
    case Outcome::kBias: return "bias";
    case Outcome::kFailure: return "failure";
  }
  return "failure";
}

Outcome classify_outcome(double p1, double p2) {
  if (p1 + p2 <= kFailureSumThreshold + kSlack) return Outcome::kFailure;
  if (std::min(p1, p2) <= kBiasMinThreshold + kSlack) return Outcome::kBias;
  return Outcome::kSuccess;
}

GuidanceOutcome classify_outcome(const ChoiceDistribution& dist, const TargetPair& pair) {
  require(dist.n > 0, ErrorCode::kEmptyInput, "outcome of an empty distribution");
  GuidanceOutcome g;
  g.p1 = dist.probs[pair.e1];
  g.p2 = dist.probs[pair.e2];
  g.outcome = classify_outcome(g.p1, g.p2);
  return g;
}

OutcomeRates outcome_rates(const VarEmotionDataset& dataset, const Catalog& catalog,
                           int min_responses) {
  OutcomeRates r;
  int success = 0, bias = 0, failure = 0;
  for (const auto& [id, counts] : dataset.stimuli) {
    const auto dist = choice_distribution(id, counts);
    if (dist.n < min_responses) continue;
    const CatalogEntry* entry = catalog.find(id);
    require(entry && entry->pair, ErrorCode::kValidation, "no target pair recorded for stimulus " + id);
    switch (classify_outcome(dist, *entry->pair).outcome) {
      case Outcome::kSuccess: ++success; break;
      case Outcome::kBias: ++bias; break;
      case Outcome::kFailure: ++failure; break;
    }
  }
  r.stimuli = success + bias + failure;
  if (r.stimuli > 0) {
    r.success = static_cast<double>(success) / r.stimuli;
    r.bias = static_cast<double>(bias) / r.stimuli;
    r.failure = 1.0 - r.success - r.bias;
  }
  return r;
}

RtSummary rt_summary(std::span<const TrialRecord> trials) {
  require(!trials.empty(), ErrorCode::kEmptyInput, "rt summary of no trials");
  std::vector<int> rts;
  rts.reserve(trials.size());
  double total = 0.0;
  for (const auto& t : trials) {
    rts.push_back(t.rt_ms);
    total += t.rt_ms;
  }
  std::sort(rts.begin(), rts.end());
  RtSummary s;
  s.n = static_cast<int>(rts.size());
  s.mean = total / s.n;
  s.median = nearest_rank_int(rts, 50);
  s.p05 = nearest_rank_int(rts, 5);
  s.p95 = nearest_rank_int(rts, 95);
  return s;
}

double entropy_rt_correlation(const VarEmotionDataset& dataset) {
  std::map<std::string, std::vector<int>> rts;
  for (const auto& t : dataset.trials)
    if (!t.is_sentinel) rts[t.stimulus_id].push_back(t.rt_ms);
  std::vector<double> entropy, median_rt;
  for (auto& [id, v] : rts) {
    const auto it = dataset.stimuli.find(id);
    require(it != dataset.stimuli.end(), ErrorCode::kValidation, "trial for unknown stimulus " + id);
    std::sort(v.begin(), v.end());
    entropy.push_back(entropy_bits(choice_distribution(id, it->second)));
    median_rt.push_back(nearest_rank_int(v, 50));
  }
  require(entropy.size() >= 3, ErrorCode::kInsufficientData,
          "entropy-RT correlation needs at least 3 stimuli with responses");
  return stats::spearman(entropy, median_rt);
}

AnalysisReport analyze(const VarEmotionDataset& dataset, const Catalog& catalog) {
  AnalysisReport rep;
  if (dataset.trials.empty()) {
    rep.warnings.push_back("empty dataset: no trials to analyze");
    return rep;
  }
  std::vector<double> boundary_h, sentinel_h;
  for (const auto& [id, dist] : distributions_by_stimulus(dataset.trials, true)) {
    StimulusRow row;
    row.stimulus_id = id;
    row.dist = dist;
    row.entropy = entropy_bits(dist);
    const CatalogEntry* entry = catalog.find(id);
    if (entry && entry->is_sentinel) {
      sentinel_h.push_back(row.entropy);
    } else {
      boundary_h.push_back(row.entropy);
      if (entry && entry->pair) {
        row.pair = entry->pair->label();
        if (dist.n >= kMinResponsesForOutcome)
          row.outcome = to_string(classify_outcome(dist, *entry->pair).outcome);
      }
    }
    rep.rows.push_back(std::move(row));
  }
  if (!boundary_h.empty()) rep.mean_boundary_entropy = stats::mean(boundary_h);
  if (!sentinel_h.empty()) rep.mean_sentinel_entropy = stats::mean(sentinel_h);
  rep.rates = outcome_rates(dataset, catalog);
  rep.rt = rt_summary(dataset.trials);
  try {
    rep.entropy_rt_rho = entropy_rt_correlation(dataset);
  } catch (const Error& e) {
    rep.warnings.push_back(std::string("entropy-RT correlation unavailable: ") + e.what());
  }
  return rep;
}

std::string stimuli_csv(const AnalysisReport& report) {
  std::ostringstream out;
  out << "stimulus_id,pair,n";
  for (std::string_view name : kEmotionNames) out << ",p_" << name;
  out << ",entropy_bits,outcome\n";
  for (const auto& r : report.rows) {
    out << r.stimulus_id << ',' << r.pair << ',' << r.dist.n;
    for (double p : r.dist.probs) out << ',' << format_double(p);
    out << ',' << format_double(r.entropy) << ',' << r.outcome << '\n';
  }
  return out.str();
}

Json summary_json(const AnalysisReport& report) {
  Json j;
  j["stimuli"] = report.rows.size();
  j["outcome_rates"] = {{"success", report.rates.success},
                        {"bias", report.rates.bias},
                        {"failure", report.rates.failure},
                        {"stimuli", report.rates.stimuli},
                        {"min_responses", kMinResponsesForOutcome}};
  j["entropy_rt_spearman"] = report.entropy_rt_rho ? Json(*report.entropy_rt_rho) : Json(nullptr);
  if (report.rt) {
    j["rt_ms"] = {{"median", report.rt->median}, {"mean", report.rt->mean},
                  {"p05", report.rt->p05},       {"p95", report.rt->p95},
                  {"n", report.rt->n}};
  } else {
    j["rt_ms"] = nullptr;
  }
  j["mean_entropy_bits"] = {
      {"boundary", report.mean_boundary_entropy},
      {"sentinel", report.mean_sentinel_entropy ? Json(*report.mean_sentinel_entropy) : Json(nullptr)}};
  j["warnings"] = report.warnings;
  return j;
}

}  // namespace varlab
