#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "varlab/classifier.hpp"

namespace varlab {

class ExperimentClient;
struct Catalog;

// A simulated participant: the base classifier with Gaussian noise on every
// parameter, a softmax temperature and a lapse rate, plus an affine
// entropy-to-reaction-time model.
struct ObserverSpec {
  std::string observer_id;
  std::string base_classifier = "classifier.json";
  double perturb_scale = 0.4;
  double temperature = 1.5;
  double lapse = 0.05;
  double rt_base_ms = 600.0;
  double rt_entropy_gain_ms = 250.0;
  double rt_noise_ms = 120.0;
  std::uint64_t seed = 0;

  void validate() const;
};

Json to_json(const ObserverSpec& s);
ObserverSpec observer_spec_from_json(const Json& j);
std::vector<ObserverSpec> read_cohort_file(const std::filesystem::path& path);
void write_cohort_file(const std::filesystem::path& path, const std::vector<ObserverSpec>& specs);

// `count` observers with ids "obs-01".. and seeds derived from `seed`.
std::vector<ObserverSpec> default_cohort(int count, std::uint64_t seed,
                                         double perturb_scale = 0.4);

struct Observation {
  int choice = 0;
  int rt_ms = 1;
};

class Observer {
 public:
  Observer(ObserverSpec spec, nn::MlpModel model);

  const ObserverSpec& spec() const { return spec_; }
  const nn::MlpModel& model() const { return model_; }

  // (1 - lapse) * softmax(logits / temperature) + lapse / 6
  EmotionProbs choice_distribution(const Embedding& x) const;
  // Expected reaction time before noise and rounding.
  double mean_rt_ms(const EmotionProbs& dist) const;

  // Draws from this observer's private generator.
  Observation observe(const Embedding& x);
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  ObserverSpec spec_;
  nn::MlpModel model_;
  Rng rng_;
};

// Parameters = base + perturb_scale * N(0, 1), seeded by spec.seed.
Observer make_observer(const ObserverSpec& spec, const ClassifierBundle& base);

struct CohortRun {
  std::vector<std::string> session_ids;
  std::size_t trials_submitted = 0;
};

// Drives one full session per observer through the experiment API, looking
// up each presented stimulus in the catalog.
CohortRun run_cohort(const std::vector<ObserverSpec>& specs, const ClassifierBundle& base,
                     const Catalog& catalog, ExperimentClient& client, std::uint64_t seed);

}  // namespace varlab
