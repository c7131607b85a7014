#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "varlab/experiment.hpp"

namespace varlab {

struct ChoiceDistribution {
  std::string stimulus_id;
  ChoiceCounts counts{};
  EmotionProbs probs{};
  int n = 0;
};

// Tally of non-sentinel trials. All trials must share one stimulus id.
// Throws kEmptyInput when there are none.
ChoiceDistribution choice_distribution(std::span<const TrialRecord> trials);
ChoiceDistribution choice_distribution(const std::string& stimulus_id, const ChoiceCounts& counts);

// Throws kEmptyInput for n = 0.
double entropy_bits(const ChoiceDistribution& dist);

// Per-stimulus tallies straight from trials. Sentinel trials are counted only
// when include_sentinels is set.
std::map<std::string, ChoiceDistribution> distributions_by_stimulus(
    std::span<const TrialRecord> trials, bool include_sentinels);

enum class Outcome { kSuccess, kBias, kFailure };

const char* to_string(Outcome o);

struct GuidanceOutcome {
  Outcome outcome = Outcome::kFailure;
  double p1 = 0.0;
  double p2 = 0.0;
};

inline constexpr double kBiasMinThreshold = 0.25;
inline constexpr double kFailureSumThreshold = 0.6;
inline constexpr int kMinResponsesForOutcome = 5;

// Total version of the strict rule: sum <= 0.6 is failure, otherwise
// min <= 0.25 is bias, otherwise success. Comparisons allow 1e-12 slack so
// that 0.35 + 0.25 lands on the boundary.
Outcome classify_outcome(double p1, double p2);
GuidanceOutcome classify_outcome(const ChoiceDistribution& dist, const TargetPair& pair);

struct OutcomeRates {
  double success = 0.0;
  double bias = 0.0;
  double failure = 0.0;
  int stimuli = 0;
};

// Over stimuli with at least min_responses responses. Throws kValidation when
// a counted stimulus has no pair in the catalog.
OutcomeRates outcome_rates(const VarEmotionDataset& dataset, const Catalog& catalog,
                           int min_responses = kMinResponsesForOutcome);

struct RtSummary {
  int median = 0;
  double mean = 0.0;
  int p05 = 0;
  int p95 = 0;
  int n = 0;
};

RtSummary rt_summary(std::span<const TrialRecord> trials);

// Spearman over (choice entropy, median RT) of the non-sentinel stimuli.
double entropy_rt_correlation(const VarEmotionDataset& dataset);

struct StimulusRow {
  std::string stimulus_id;
  std::string pair;  // empty for sentinels or unknown stimuli
  ChoiceDistribution dist;
  double entropy = 0.0;
  std::string outcome;  // empty when not classified
};

struct AnalysisReport {
  std::vector<StimulusRow> rows;
  OutcomeRates rates;
  std::optional<double> entropy_rt_rho;
  std::optional<RtSummary> rt;
  double mean_boundary_entropy = 0.0;
  std::optional<double> mean_sentinel_entropy;
  std::vector<std::string> warnings;
};

AnalysisReport analyze(const VarEmotionDataset& dataset, const Catalog& catalog);
std::string stimuli_csv(const AnalysisReport& report);
Json summary_json(const AnalysisReport& report);

}  // namespace varlab
