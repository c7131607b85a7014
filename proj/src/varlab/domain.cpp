#include "varlab/domain.hpp"

#include <cmath>
#include <numbers>

#include "varlab/error.hpp"

namespace varlab {

DomainSpec DomainSpec::default_spec(std::uint64_t seed, int dim, double mean_distance) {
  require(dim >= kNumEmotions, ErrorCode::kConfig,
          "the default domain places each class mean on its own axis; dim must be >= 6");
  DomainSpec s;
  s.dim = dim;
  s.seed = seed;
  for (int k = 0; k < kNumEmotions; ++k) {
    s.class_means[k] = Eigen::VectorXd::Zero(dim);
    s.class_means[k][k] = mean_distance;
    s.class_cov_scale[k] = 1.0;
    s.class_priors[k] = 1.0 / kNumEmotions;
  }
  return s;
}

void DomainSpec::validate() const {
  require(dim > 0, ErrorCode::kConfig, "domain dimension must be positive");
  double total = 0.0;
  for (int k = 0; k < kNumEmotions; ++k) {
    require(class_means[k].size() == dim, ErrorCode::kConfig,
            "class mean " + std::to_string(k) + " has wrong dimension");
    require(class_cov_scale[k] > 0.0, ErrorCode::kConfig, "covariance scales must be positive");
    require(class_priors[k] >= 0.0, ErrorCode::kConfig, "priors must be nonnegative");
    total += class_priors[k];
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::kConfig, "priors must sum to 1");
}

Json to_json(const DomainSpec& spec) {
  Json means = Json::array();
  for (const auto& m : spec.class_means) means.push_back(to_json(m));
  return Json{{"d", spec.dim},
              {"class_means", std::move(means)},
              {"class_cov_scale", spec.class_cov_scale},
              {"class_priors", spec.class_priors},
              {"seed", spec.seed}};
}

DomainSpec domain_from_json(const Json& j) {
  DomainSpec s;
  try {
    s.dim = j.at("d").get<int>();
    const Json& means = j.at("class_means");
    require(means.size() == kNumEmotions, ErrorCode::kValidation, "expected 6 class means");
    for (int k = 0; k < kNumEmotions; ++k) s.class_means[k] = vector_from_json(means[k]);
    s.class_cov_scale = j.at("class_cov_scale").get<std::array<double, kNumEmotions>>();
    s.class_priors = j.at("class_priors").get<std::array<double, kNumEmotions>>();
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed domain spec: ") + e.what());
  }
  s.validate();
  return s;
}

const char* to_string(DatasetSource s) {
  switch (s) {
    case DatasetSource::kBase: return "base";
    case DatasetSource::kVarEmotion: return "varEmotion";
    case DatasetSource::kVarEmotionIndividual: return "varEmotion-i";
  }
  return "base";
}

DatasetSource dataset_source_from_string(const std::string& s) {
  if (s == "base") return DatasetSource::kBase;
  if (s == "varEmotion") return DatasetSource::kVarEmotion;
  if (s == "varEmotion-i") return DatasetSource::kVarEmotionIndividual;
  fail(ErrorCode::kValidation, "unknown dataset source '" + s + "'");
}

Eigen::MatrixXd LabeledDataset::embedding_matrix() const {
  require(!items.empty(), ErrorCode::kEmptyInput, "dataset is empty");
  Eigen::MatrixXd m(items.front().embedding.size(), static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = items[i].embedding;
  return m;
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.label);
  return out;
}

LabeledDataset sample_labeled(const DomainSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::discrete_distribution<int> pick(spec.class_priors.begin(), spec.class_priors.end());
  LabeledDataset data;
  data.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = pick(rng);
    Embedding x = spec.class_means[k] + std::sqrt(spec.class_cov_scale[k]) * standard_normal(rng, spec.dim);
    data.items.push_back({std::move(x), k});
  }
  return data;
}

EmotionProbs true_posterior(const DomainSpec& spec, const Embedding& x) {
  require(x.size() == spec.dim, ErrorCode::kInputShape, "embedding dimension does not match domain");
  std::array<double, kNumEmotions> log_joint{};
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kNumEmotions; ++k) {
    if (spec.class_priors[k] <= 0.0) {
      log_joint[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double s2 = spec.class_cov_scale[k];
    log_joint[k] = std::log(spec.class_priors[k]) -
                   0.5 * spec.dim * std::log(2.0 * std::numbers::pi * s2) -
                   0.5 * (x - spec.class_means[k]).squaredNorm() / s2;
    best = std::max(best, log_joint[k]);
  }
  EmotionProbs p{};
  double z = 0.0;
  for (int k = 0; k < kNumEmotions; ++k) {
    p[k] = std::exp(log_joint[k] - best);
    z += p[k];
  }
  for (auto& v : p) v /= z;
  return p;
}

std::vector<SentinelStimulus> sentinel_pool(const DomainSpec& spec, int per_class,
                                            std::uint64_t seed, double jitter) {
  spec.validate();
  require(per_class >= 1, ErrorCode::kConfig, "need at least one sentinel per class");
  Rng rng(seed);
  std::vector<SentinelStimulus> pool;
  for (int k = 0; k < kNumEmotions; ++k) {
    pool.push_back({spec.class_means[k], k});
    int made = 1;
    int attempts = 0;
    while (made < per_class) {
      require(++attempts < 10000, ErrorCode::kConfig,
              "cannot place unambiguous sentinels; classes overlap too much");
      Embedding x = spec.class_means[k] + jitter * standard_normal(rng, spec.dim);
      if (true_posterior(spec, x)[k] > 0.99) {
        pool.push_back({std::move(x), k});
        ++made;
      }
    }
  }
  return pool;
}

void write_dataset_jsonl(const std::filesystem::path& path, const LabeledDataset& data) {
  std::vector<Json> rows;
  rows.reserve(data.items.size());
  const Json participant = data.participant ? Json(*data.participant) : Json(nullptr);
  for (const auto& it : data.items) {
    rows.push_back(Json{{"embedding", to_json(it.embedding)},
                        {"label", it.label},
                        {"source", to_string(data.source)},
                        {"participant", participant}});
  }
  write_jsonl(path, rows);
}

LabeledDataset read_dataset_jsonl(const std::filesystem::path& path) {
  LabeledDataset data;
  bool first = true;
  for (const Json& row : read_jsonl(path)) {
    LabeledItem it;
    it.embedding = vector_from_json(row.at("embedding"));
    it.label = row.at("label").get<int>();
    require(it.label >= 0 && it.label < kNumEmotions, ErrorCode::kValidation,
            path.string() + ": label out of range");
    if (first) {
      data.source = dataset_source_from_string(row.value("source", std::string("base")));
      if (row.contains("participant") && !row["participant"].is_null())
        data.participant = row["participant"].get<std::string>();
      first = false;
    } else {
      require(it.embedding.size() == data.items.front().embedding.size(), ErrorCode::kValidation,
              path.string() + ": embeddings differ in dimension");
    }
    data.items.push_back(std::move(it));
  }
  return data;
}

}  // namespace varlab
