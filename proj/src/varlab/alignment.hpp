#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "varlab/analysis.hpp"
#include "varlab/classifier.hpp"

namespace varlab {

// One supervised example. Behavioral items carry their trial key; base items
// have empty ids and trial_index -1.
struct BehavioralItem {
  Embedding embedding;
  int label = 0;
  double weight = 1.0;
  std::string stimulus_id;
  std::string participant_id;
  int trial_index = -1;

  std::string key() const;
};

struct BehavioralTrainingSet {
  std::vector<BehavioralItem> items;
  std::string provenance;
  std::string split = "train";

  Eigen::MatrixXd embedding_matrix() const;
  std::vector<int> labels() const;
  std::vector<double> weights() const;
};

struct MixRatio {
  int primary_parts = 2;
  int secondary_parts = 1;

  void validate() const;
  std::string label() const;  // "2:1"
};

// Non-sentinel trials as (stimulus embedding, chosen emotion).
std::vector<BehavioralItem> behavioral_items(std::span<const TrialRecord> trials,
                                             const Catalog& catalog);
std::vector<BehavioralItem> base_items(const LabeledDataset& data);

// Seeded shuffle then an 80/20 cut. Throws kInsufficientData below 5 items.
std::pair<std::vector<BehavioralItem>, std::vector<BehavioralItem>> split_train_val(
    std::vector<BehavioralItem> items, std::uint64_t seed);

// Each participant is split 80/20 first; the group pool is the union of the
// individual train parts, split 80/20 again. Individual val items therefore
// never reach group training or group validation.
struct BehavioralSplits {
  std::vector<BehavioralItem> group_train;
  std::vector<BehavioralItem> group_val;
  std::map<std::string, std::vector<BehavioralItem>> individual_train;
  std::map<std::string, std::vector<BehavioralItem>> individual_val;
};

BehavioralSplits make_behavioral_splits(const std::vector<BehavioralItem>& items,
                                        std::uint64_t seed);

Json splits_to_json(const BehavioralSplits& s);

// ceil(epoch_size * p / (p + s)) primary items plus the rest from secondary.
// A component is drawn without replacement when it covers its quota and with
// replacement otherwise.
BehavioralTrainingSet mix_datasets(const std::vector<BehavioralItem>& primary,
                                   const std::vector<BehavioralItem>& secondary, MixRatio ratio,
                                   std::size_t epoch_size, std::uint64_t seed);

struct FinetuneConfig {
  double lr = 1e-4;
  int epochs = 15;
  int batch_size = 128;
  MixRatio ratio;
  // 0 means one pass over the primary set per epoch, i.e.
  // ceil(|primary| * (p + s) / p).
  std::size_t epoch_size = 0;
  std::uint64_t seed = 0;
};

Json to_json(const FinetuneConfig& c);
FinetuneConfig finetune_config_from_json(const Json& j);

inline constexpr int kMinIndividualTrials = 50;

// All parameters, cross-entropy on a fresh mixture every epoch, fresh Adam.
ClassifierBundle finetune_group(const ClassifierBundle& base,
                                const std::vector<BehavioralItem>& varemotion_group,
                                const std::vector<BehavioralItem>& base_analog,
                                const FinetuneConfig& cfg);

// Starts from the group model. Throws kInsufficientData when the participant
// has fewer than 50 trials in varemotion_i.
ClassifierBundle finetune_individual(const ClassifierBundle& group, const std::string& participant,
                                     const std::vector<BehavioralItem>& varemotion_i,
                                     const std::vector<BehavioralItem>& varemotion_group,
                                     const FinetuneConfig& cfg);

// Per-trial agreement of the argmax with the recorded label.
double accuracy(const ClassifierBundle& bundle, const std::vector<BehavioralItem>& items);

std::vector<double> model_entropy(const ClassifierBundle& bundle,
                                  const std::vector<Embedding>& stimuli);

// Spearman between model entropy and the empirical choice entropy over
// non-sentinel stimuli with at least min_responses responses. Throws
// kInsufficientData with fewer than 3 such stimuli.
double entropy_alignment(const ClassifierBundle& bundle, const VarEmotionDataset& human,
                         const Catalog& catalog, int min_responses = 2);

struct AccuracyRow {
  std::string model;
  std::string dataset;
  double accuracy = 0.0;
  std::size_t n = 0;
};

struct ParticipantDelta {
  std::string participant_id;
  double group_accuracy = 0.0;
  double individual_accuracy = 0.0;
  std::size_t n = 0;

  double delta() const { return individual_accuracy - group_accuracy; }
};

struct AlignmentReport {
  std::vector<AccuracyRow> accuracy;
  std::map<std::string, double> entropy_rho;  // model -> rho
  std::vector<ParticipantDelta> participants;

  std::optional<double> mean_individual_gain() const;
  void validate() const;
};

Json to_json(const AlignmentReport& r);
std::string accuracy_csv(const AlignmentReport& r);
std::string participants_csv(const AlignmentReport& r);

}  // namespace varlab
