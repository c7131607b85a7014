#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varlab/classifier.hpp"
#include "varlab/domain.hpp"
#include "varlab/neural.hpp"

namespace varlab {

// Linear-beta DDPM schedule. Timesteps are 1-based: step t uses betas[t-1].
struct NoiseSchedule {
  int steps = 0;
  double beta_min = 0.0;
  double beta_max = 0.0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  static NoiseSchedule make(int steps, double beta_min, double beta_max);

  double beta(int t) const { return betas[static_cast<std::size_t>(t - 1)]; }
  double alpha(int t) const { return alphas[static_cast<std::size_t>(t - 1)]; }
  // alpha_bar(0) == 1 by convention.
  double alpha_bar(int t) const {
    return t == 0 ? 1.0 : alpha_bars[static_cast<std::size_t>(t - 1)];
  }
  // Standard deviation of the ancestral sampling noise; zero at t = 1.
  double posterior_sigma(int t) const;

  void check_step(int t) const;
};

inline constexpr int kDefaultSteps = 100;
inline constexpr double kDefaultBetaMin = 1e-4;
inline constexpr double kDefaultBetaMax = 0.05;

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
Embedding forward_noise(const Embedding& x0, int t, const Embedding& eps,
                        const NoiseSchedule& schedule);

struct DenoiserConfig {
  std::vector<int> hidden = {128, 128};
  int time_features = 16;
  double lr = 1e-3;
  int steps = 8000;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

Json to_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_config_from_json(const Json& j);

// Noise-prediction network: (x_t ++ time features) -> eps estimate.
struct DenoiserBundle {
  nn::MlpModel model;
  NoiseSchedule schedule;
  DenoiserConfig config;

  int dim() const { return model.output_dim(); }
  Embedding predict_noise(const Embedding& x_t, int t) const;
};

Json to_json(const DenoiserBundle& b);
DenoiserBundle denoiser_from_json(const Json& j);

Eigen::VectorXd time_encoding(int t, int steps, int features);

// Epsilon-prediction MSE training over uniformly drawn (item, t, eps).
// When loss_curve is non-null it receives the per-step batch loss.
DenoiserBundle train_denoiser(const LabeledDataset& data, const NoiseSchedule& schedule,
                              const DenoiserConfig& cfg, std::vector<double>* loss_curve = nullptr);

// Any epsilon predictor, e.g. an analytic oracle in tests.
using NoisePredictor = std::function<Embedding(const Embedding& x_t, int t)>;

NoisePredictor as_predictor(const DenoiserBundle& denoiser);

// Ancestral DDPM step: posterior mean from the predicted noise plus
// posterior_sigma(t) * noise_draw.
Embedding reverse_step(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                       const Embedding& x_t, int t, const Embedding& noise_draw);
Embedding reverse_step(const DenoiserBundle& denoiser, const Embedding& x_t, int t,
                       const Embedding& noise_draw);

// Two distinct target emotions, guided toward jointly with weight 1/2 each.
struct TargetPair {
  int e1 = 0;
  int e2 = 1;

  TargetPair() = default;
  TargetPair(int a, int b);

  EmotionProbs q() const;
  std::string label() const;  // "fear+surprise" style
  bool operator==(const TargetPair&) const = default;
};

// All 15 unordered pairs in lexicographic index order.
std::vector<TargetPair> all_pairs();

// -sum_y probs[y] q[y]
double uncertainty_loss(const EmotionProbs& probs, const EmotionProbs& q);
nn::ProbabilityLoss uncertainty_loss_fn(const EmotionProbs& q);

// reverse_step(...) - gamma * grad_x uncertainty_loss(classifier(x_t), q)
Embedding guided_reverse_step(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                              const ClassifierBundle& classifier, const Embedding& x_t, int t,
                              const EmotionProbs& q, double gamma, const Embedding& noise_draw);

enum class GenerationMode { kScratch, kEdit };

const char* to_string(GenerationMode m);
GenerationMode generation_mode_from_string(const std::string& s);

struct GenerationConfig {
  double gamma = 0.5;
  GenerationMode mode = GenerationMode::kEdit;
  // Edit mode only; negative means steps / 2.
  int t_start = -1;
  std::uint64_t seed = 0;
  // Edit mode seeds: items labelled e1 or e2, alternating.
  const LabeledDataset* seed_data = nullptr;
  std::string id_prefix = "cand";
};

struct StimulusRecord {
  std::string stimulus_id;
  Embedding embedding;
  TargetPair pair;
  EmotionProbs model_probs{};
  std::optional<bool> accepted;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  int t_start = 0;
  GenerationMode mode = GenerationMode::kEdit;
};

Json to_json(const StimulusRecord& r);
StimulusRecord stimulus_from_json(const Json& j);

// Runs one reverse chain from x_start at step t_start down to 0. Noise draws
// come from rng in a fixed order independent of gamma, so a guided and an
// unguided chain seeded alike share every draw.
Embedding run_chain(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                    const ClassifierBundle* classifier, const EmotionProbs& q, double gamma,
                    Embedding x_start, int t_start, Rng& rng);

std::vector<StimulusRecord> generate_candidates(const DenoiserBundle& denoiser,
                                                const ClassifierBundle& classifier,
                                                const TargetPair& pair, int n,
                                                const GenerationConfig& cfg);

bool passes_filter(const EmotionProbs& probs, const ActivationThresholds& thresholds,
                   const TargetPair& pair);

// Sets `accepted` on every candidate using the given pair and returns copies
// of the accepted ones.
std::vector<StimulusRecord> filter_candidates(std::vector<StimulusRecord>& candidates,
                                              const ActivationThresholds& thresholds,
                                              const TargetPair& pair);
// Same, with each candidate judged against its own target pair.
std::vector<StimulusRecord> filter_candidates(std::vector<StimulusRecord>& candidates,
                                              const ActivationThresholds& thresholds);

}  // namespace varlab
