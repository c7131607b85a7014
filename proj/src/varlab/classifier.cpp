#include "varlab/classifier.hpp"

#include <algorithm>
#include <numeric>

#include "varlab/error.hpp"
#include "varlab/stats.hpp"

namespace varlab {

Json to_json(const TrainingConfig& cfg) {
  return Json{{"lr", cfg.lr},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed},
              {"hidden", cfg.hidden}};
}

TrainingConfig training_config_from_json(const Json& j) {
  TrainingConfig cfg;
  cfg.lr = j.value("lr", cfg.lr);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.hidden = j.value("hidden", cfg.hidden);
  return cfg;
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kBase: return "base";
    case Provenance::kGroup: return "group";
    case Provenance::kIndividual: return "individual";
  }
  return "base";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "base") return Provenance::kBase;
  if (s == "group") return Provenance::kGroup;
  if (s == "individual") return Provenance::kIndividual;
  fail(ErrorCode::kValidation, "unknown provenance '" + s + "'");
}

void ClassifierBundle::validate() const {
  model.validate();
  require(model.output_dim() == kNumEmotions, ErrorCode::kInputShape,
          "classifier output dimension must be 6");
}

Json to_json(const ClassifierBundle& b) {
  Json j{{"kind", "classifier"},
         {"provenance", to_string(b.provenance)},
         {"participant", b.participant ? Json(*b.participant) : Json(nullptr)},
         {"training_config", to_json(b.training_config)},
         {"model", nn::model_to_json(b.model)}};
  return j;
}

ClassifierBundle classifier_from_json(const Json& j) {
  ClassifierBundle b;
  try {
    b.model = nn::model_from_json(j.at("model"));
    b.training_config = training_config_from_json(j.value("training_config", Json::object()));
    b.provenance = provenance_from_string(j.value("provenance", std::string("base")));
    if (j.contains("participant") && !j["participant"].is_null())
      b.participant = j["participant"].get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed classifier checkpoint: ") + e.what());
  }
  b.validate();
  return b;
}

double train_in_order(nn::MlpModel& model, nn::AdamState& adam, const Eigen::MatrixXd& inputs,
                      std::span<const int> labels, std::span<const double> weights,
                      int batch_size) {
  require(batch_size > 0, ErrorCode::kConfig, "batch size must be positive");
  const auto n = static_cast<Eigen::Index>(labels.size());
  double loss_sum = 0.0;
  int batches = 0;
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
    const auto first = static_cast<std::size_t>(start);
    const auto count = static_cast<std::size_t>(len);
    const auto grads = nn::loss_and_param_grads(
        model, inputs.middleCols(start, len), labels.subspan(first, count),
        weights.empty() ? weights : weights.subspan(first, count));
    nn::adam_step(adam, model, grads);
    loss_sum += grads.loss_value;
    ++batches;
  }
  return batches ? loss_sum / batches : 0.0;
}

ClassifierBundle train_classifier(const LabeledDataset& data, const TrainingConfig& cfg) {
  require(!data.empty(), ErrorCode::kEmptyInput, "cannot train a classifier on an empty dataset");
  std::array<int, kNumEmotions> counts{};
  for (const auto& it : data.items) {
    require(it.label >= 0 && it.label < kNumEmotions, ErrorCode::kValidation, "label out of range");
    ++counts[it.label];
  }
  for (int k = 0; k < kNumEmotions; ++k) {
    require(counts[k] > 0, ErrorCode::kInsufficientCoverage,
            std::string("no training items for class '") + std::string(kEmotionNames[k]) + "'");
  }
  require(cfg.epochs >= 0, ErrorCode::kConfig, "epochs must be nonnegative");

  const Eigen::MatrixXd all_inputs = data.embedding_matrix();
  const std::vector<int> all_labels = data.labels();

  std::vector<int> dims;
  dims.push_back(static_cast<int>(all_inputs.rows()));
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(kNumEmotions);

  ClassifierBundle bundle;
  bundle.model = nn::MlpModel::glorot(dims, mix_seed(cfg.seed, 0));
  bundle.training_config = cfg;
  bundle.provenance = Provenance::kBase;

  nn::AdamState adam = nn::AdamState::for_model(bundle.model, cfg.lr);
  Rng rng(mix_seed(cfg.seed, 1));
  std::vector<Eigen::Index> order(all_labels.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd inputs(all_inputs.rows(), all_inputs.cols());
  std::vector<int> labels(all_labels.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      inputs.col(static_cast<Eigen::Index>(i)) = all_inputs.col(order[i]);
      labels[i] = all_labels[static_cast<std::size_t>(order[i])];
    }
    train_in_order(bundle.model, adam, inputs, labels, {}, cfg.batch_size);
  }
  return bundle;
}

EmotionProbs predict_probs(const ClassifierBundle& bundle, const Embedding& x) {
  const Eigen::VectorXd p = nn::softmax(nn::forward(bundle.model, x));
  EmotionProbs out{};
  for (int k = 0; k < kNumEmotions; ++k) out[k] = p[k];
  return out;
}

Eigen::MatrixXd predict_probs_batch(const ClassifierBundle& bundle, const Eigen::MatrixXd& inputs) {
  return nn::softmax_columns(nn::forward_batch(bundle.model, inputs));
}

int argmax(const EmotionProbs& p) {
  int best = 0;
  for (int k = 1; k < kNumEmotions; ++k) {
    if (p[k] > p[best]) best = k;
  }
  return best;
}

Json to_json(const ActivationThresholds& t) {
  return Json{{"percentile", t.percentile}, {"k", t.k}, {"dataset_id", t.dataset_id}};
}

ActivationThresholds thresholds_from_json(const Json& j) {
  ActivationThresholds t;
  try {
    t.percentile = j.at("percentile").get<double>();
    t.k = j.at("k").get<std::array<double, kNumEmotions>>();
    t.dataset_id = j.value("dataset_id", std::string());
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed thresholds: ") + e.what());
  }
  for (double k : t.k) require(k >= 0.0 && k <= 1.0, ErrorCode::kValidation, "threshold outside [0, 1]");
  return t;
}

ActivationThresholds activation_thresholds(const ClassifierBundle& bundle,
                                           const LabeledDataset& data, double percentile,
                                           std::string dataset_id) {
  require(!data.empty(), ErrorCode::kEmptyInput, "thresholds need a nonempty dataset");
  require(percentile >= 0.0 && percentile <= 100.0, ErrorCode::kValidation,
          "percentile must lie in [0, 100]");
  const Eigen::MatrixXd probs = predict_probs_batch(bundle, data.embedding_matrix());
  ActivationThresholds t;
  t.percentile = percentile;
  t.dataset_id = std::move(dataset_id);
  std::vector<double> column(static_cast<std::size_t>(probs.cols()));
  for (int e = 0; e < kNumEmotions; ++e) {
    for (Eigen::Index i = 0; i < probs.cols(); ++i) column[static_cast<std::size_t>(i)] = probs(e, i);
    t.k[e] = stats::nearest_rank(column, percentile);
  }
  return t;
}

double accuracy(const ClassifierBundle& bundle, const Eigen::MatrixXd& inputs,
                std::span<const int> labels) {
  require(!labels.empty(), ErrorCode::kEmptyInput, "accuracy of an empty dataset");
  require(static_cast<std::size_t>(inputs.cols()) == labels.size(), ErrorCode::kInputShape,
          "inputs and labels differ in length");
  const Eigen::MatrixXd probs = predict_probs_batch(bundle, inputs);
  std::size_t correct = 0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < probs.rows(); ++k) {
      if (probs(k, c) > probs(best, c)) best = k;
    }
    if (best == labels[static_cast<std::size_t>(c)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double accuracy(const ClassifierBundle& bundle, const LabeledDataset& data) {
  require(!data.empty(), ErrorCode::kEmptyInput, "accuracy of an empty dataset");
  const auto labels = data.labels();
  return accuracy(bundle, data.embedding_matrix(), labels);
}

}  // namespace varlab
