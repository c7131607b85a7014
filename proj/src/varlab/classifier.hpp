#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "varlab/domain.hpp"
#include "varlab/neural.hpp"

namespace varlab {

// One wide hidden layer trained to large weights, so that observers built by
// adding N(0, 0.4^2) noise to every parameter still recognize sentinels.
struct TrainingConfig {
  double lr = 1e-2;
  int epochs = 60;
  int batch_size = 128;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {64};
};

Json to_json(const TrainingConfig& cfg);
TrainingConfig training_config_from_json(const Json& j);

enum class Provenance { kBase, kGroup, kIndividual };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct ClassifierBundle {
  nn::MlpModel model;
  TrainingConfig training_config;
  Provenance provenance = Provenance::kBase;
  std::optional<std::string> participant;

  void validate() const;  // output dimension must be 6
};

Json to_json(const ClassifierBundle& b);
ClassifierBundle classifier_from_json(const Json& j);

// One pass over the columns of `inputs` in the given order, in mini-batches.
// Returns the mean batch loss.
double train_in_order(nn::MlpModel& model, nn::AdamState& adam, const Eigen::MatrixXd& inputs,
                      std::span<const int> labels, std::span<const double> weights,
                      int batch_size);

// Mini-batch cross-entropy with Adam, reshuffled every epoch. Throws
// kEmptyInput on empty data and kInsufficientCoverage when a class is
// missing.
ClassifierBundle train_classifier(const LabeledDataset& data, const TrainingConfig& cfg);

EmotionProbs predict_probs(const ClassifierBundle& bundle, const Embedding& x);
// Column-per-input batch variant; returns 6 x n.
Eigen::MatrixXd predict_probs_batch(const ClassifierBundle& bundle, const Eigen::MatrixXd& inputs);

// Lowest index wins ties.
int argmax(const EmotionProbs& p);

struct ActivationThresholds {
  std::array<double, kNumEmotions> k{};
  double percentile = 75.0;
  std::string dataset_id;
};

Json to_json(const ActivationThresholds& t);
ActivationThresholds thresholds_from_json(const Json& j);

// k[e] = nearest-rank percentile of predicted p[e] over every item in data.
ActivationThresholds activation_thresholds(const ClassifierBundle& bundle,
                                           const LabeledDataset& data, double percentile,
                                           std::string dataset_id = "");

double accuracy(const ClassifierBundle& bundle, const LabeledDataset& data);
double accuracy(const ClassifierBundle& bundle, const Eigen::MatrixXd& inputs,
                std::span<const int> labels);

}  // namespace varlab
