#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "varlab/json_io.hpp"
#include "varlab/types.hpp"

namespace varlab {

// Six-class isotropic Gaussian mixture standing in for an image-embedding
// distribution. Class k has mean class_means[k] and covariance
// class_cov_scale[k] * I.
struct DomainSpec {
  int dim = 8;
  std::array<Eigen::VectorXd, kNumEmotions> class_means;
  std::array<double, kNumEmotions> class_cov_scale{};
  std::array<double, kNumEmotions> class_priors{};
  std::uint64_t seed = 0;

  // d = 8, unit covariance, mean k at mean_distance * e_k, uniform priors.
  static DomainSpec default_spec(std::uint64_t seed = 0, int dim = 8, double mean_distance = 4.0);

  void validate() const;
};

Json to_json(const DomainSpec& spec);
DomainSpec domain_from_json(const Json& j);

enum class DatasetSource { kBase, kVarEmotion, kVarEmotionIndividual };

const char* to_string(DatasetSource s);
DatasetSource dataset_source_from_string(const std::string& s);

struct LabeledItem {
  Embedding embedding;
  int label = 0;
};

struct LabeledDataset {
  std::vector<LabeledItem> items;
  DatasetSource source = DatasetSource::kBase;
  std::optional<std::string> participant;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  // Column-per-item matrix and the matching label vector.
  Eigen::MatrixXd embedding_matrix() const;
  std::vector<int> labels() const;
};

// Draws the class from the prior, then the embedding from that class's
// Gaussian. Deterministic in (spec, n, seed).
LabeledDataset sample_labeled(const DomainSpec& spec, std::size_t n, std::uint64_t seed);

// Exact Bayes posterior p(class | x) under the mixture.
EmotionProbs true_posterior(const DomainSpec& spec, const Embedding& x);

// Unambiguous catch-trial embeddings: for each class, the class mean followed
// by jittered copies whose true posterior for that class stays above 0.99.
struct SentinelStimulus {
  Embedding embedding;
  int truth = 0;
};
std::vector<SentinelStimulus> sentinel_pool(const DomainSpec& spec, int per_class,
                                            std::uint64_t seed, double jitter = 0.25);

// JSONL rows: {"embedding":[...],"label":k,"source":"...","participant":null|id}
void write_dataset_jsonl(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset read_dataset_jsonl(const std::filesystem::path& path);

}  // namespace varlab
