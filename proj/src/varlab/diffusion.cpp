#include "varlab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "varlab/error.hpp"

namespace varlab {

NoiseSchedule NoiseSchedule::make(int steps, double beta_min, double beta_max) {
  require(steps >= 1, ErrorCode::kConfig, "schedule needs at least one step");
  require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0, ErrorCode::kConfig,
          "schedule betas must satisfy 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  double running = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    const double beta = beta_min + (beta_max - beta_min) * frac;
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    running *= 1.0 - beta;
    s.alpha_bars.push_back(running);
  }
  return s;
}

double NoiseSchedule::posterior_sigma(int t) const {
  check_step(t);
  const double var = beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
  return std::sqrt(var);
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps) {
    fail(ErrorCode::kValidation,
         "timestep " + std::to_string(t) + " outside 1.." + std::to_string(steps));
  }
}

Embedding forward_noise(const Embedding& x0, int t, const Embedding& eps,
                        const NoiseSchedule& schedule) {
  schedule.check_step(t);
  require(x0.size() == eps.size(), ErrorCode::kInputShape, "noise and embedding differ in length");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Json to_json(const DenoiserConfig& cfg) {
  return Json{{"hidden", cfg.hidden},
              {"time_features", cfg.time_features},
              {"lr", cfg.lr},
              {"steps", cfg.steps},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed}};
}

DenoiserConfig denoiser_config_from_json(const Json& j) {
  DenoiserConfig cfg;
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.time_features = j.value("time_features", cfg.time_features);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

Eigen::VectorXd time_encoding(int t, int steps, int features) {
  Eigen::VectorXd enc(features);
  const double u = static_cast<double>(t) / steps;
  for (int i = 0; i < features / 2; ++i) {
    const double w = std::numbers::pi * std::ldexp(1.0, i);
    enc[2 * i] = std::sin(w * u);
    enc[2 * i + 1] = std::cos(w * u);
  }
  if (features % 2) enc[features - 1] = u;
  return enc;
}

Embedding DenoiserBundle::predict_noise(const Embedding& x_t, int t) const {
  schedule.check_step(t);
  require(x_t.size() == dim(), ErrorCode::kInputShape, "embedding dimension does not match denoiser");
  Eigen::VectorXd input(x_t.size() + config.time_features);
  input << x_t, time_encoding(t, schedule.steps, config.time_features);
  return nn::forward(model, input);
}

Json to_json(const DenoiserBundle& b) {
  return Json{{"kind", "denoiser"},
              {"schedule",
               Json{{"steps", b.schedule.steps},
                    {"beta_min", b.schedule.beta_min},
                    {"beta_max", b.schedule.beta_max}}},
              {"config", to_json(b.config)},
              {"model", nn::model_to_json(b.model)}};
}

DenoiserBundle denoiser_from_json(const Json& j) {
  DenoiserBundle b;
  try {
    const Json& s = j.at("schedule");
    b.schedule = NoiseSchedule::make(s.at("steps").get<int>(), s.at("beta_min").get<double>(),
                                     s.at("beta_max").get<double>());
    b.config = denoiser_config_from_json(j.at("config"));
    b.model = nn::model_from_json(j.at("model"));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed denoiser checkpoint: ") + e.what());
  }
  require(b.model.input_dim() == b.model.output_dim() + b.config.time_features,
          ErrorCode::kInputShape, "denoiser input must be embedding plus time features");
  return b;
}

DenoiserBundle train_denoiser(const LabeledDataset& data, const NoiseSchedule& schedule,
                              const DenoiserConfig& cfg, std::vector<double>* loss_curve) {
  require(!data.empty(), ErrorCode::kEmptyInput, "cannot train a denoiser on an empty dataset");
  require(cfg.steps >= 0 && cfg.batch_size > 0 && cfg.time_features > 0, ErrorCode::kConfig,
          "invalid denoiser training configuration");
  const Eigen::MatrixXd x0_all = data.embedding_matrix();
  const auto d = static_cast<int>(x0_all.rows());
  const int f = cfg.time_features;

  std::vector<int> dims{d + f};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(d);

  DenoiserBundle bundle;
  bundle.schedule = schedule;
  bundle.config = cfg;
  bundle.model = nn::MlpModel::glorot(dims, mix_seed(cfg.seed, 0));

  // Precomputed time features, one column per t in 1..T.
  Eigen::MatrixXd time_table(f, schedule.steps);
  for (int t = 1; t <= schedule.steps; ++t) time_table.col(t - 1) = time_encoding(t, schedule.steps, f);

  nn::AdamState adam = nn::AdamState::for_model(bundle.model, cfg.lr);
  Rng rng(mix_seed(cfg.seed, 1));
  std::uniform_int_distribution<Eigen::Index> pick_item(0, x0_all.cols() - 1);
  std::uniform_int_distribution<int> pick_t(1, schedule.steps);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int b = cfg.batch_size;
  Eigen::MatrixXd inputs(d + f, b);
  Eigen::MatrixXd target(d, b);
  nn::ForwardCache cache;
  nn::GradBundle grads = nn::GradBundle::zeros_like(bundle.model);
  for (int step = 0; step < cfg.steps; ++step) {
    for (int c = 0; c < b; ++c) {
      const Eigen::Index item = pick_item(rng);
      const int t = pick_t(rng);
      const double ab = schedule.alpha_bar(t);
      for (int r = 0; r < d; ++r) target(r, c) = normal(rng);
      inputs.col(c).head(d) = std::sqrt(ab) * x0_all.col(item) + std::sqrt(1.0 - ab) * target.col(c);
      inputs.col(c).tail(f) = time_table.col(t - 1);
    }
    const Eigen::MatrixXd pred = nn::forward_batch(bundle.model, inputs, &cache);
    const Eigen::MatrixXd diff = pred - target;
    const double scale = 1.0 / static_cast<double>(d * b);
    const double loss = diff.squaredNorm() * scale;
    nn::backward(bundle.model, cache, 2.0 * scale * diff, &grads, nullptr);
    // Linear decay to a tenth of the base rate over the run.
    adam.lr = cfg.lr * (1.0 - 0.9 * static_cast<double>(step) / std::max(1, cfg.steps));
    nn::adam_step(adam, bundle.model, grads);
    if (loss_curve) loss_curve->push_back(loss);
  }
  return bundle;
}

NoisePredictor as_predictor(const DenoiserBundle& denoiser) {
  return [&denoiser](const Embedding& x_t, int t) { return denoiser.predict_noise(x_t, t); };
}

Embedding reverse_step(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                       const Embedding& x_t, int t, const Embedding& noise_draw) {
  schedule.check_step(t);
  require(noise_draw.size() == x_t.size(), ErrorCode::kInputShape,
          "noise draw and embedding differ in length");
  const Embedding eps = predictor(x_t, t);
  require(eps.size() == x_t.size(), ErrorCode::kInputShape, "predicted noise has wrong length");
  const double beta = schedule.beta(t);
  const double mean_scale = 1.0 / std::sqrt(schedule.alpha(t));
  const double eps_scale = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
  Embedding mean = mean_scale * (x_t - eps_scale * eps);
  if (t == 1) return mean;
  return mean + schedule.posterior_sigma(t) * noise_draw;
}

Embedding reverse_step(const DenoiserBundle& denoiser, const Embedding& x_t, int t,
                       const Embedding& noise_draw) {
  return reverse_step(denoiser.schedule, as_predictor(denoiser), x_t, t, noise_draw);
}

TargetPair::TargetPair(int a, int b) : e1(a), e2(b) {
  require(a >= 0 && a < kNumEmotions && b >= 0 && b < kNumEmotions, ErrorCode::kValidation,
          "target emotions must lie in 0..5");
  require(a != b, ErrorCode::kValidation, "target emotions must differ");
}

EmotionProbs TargetPair::q() const {
  EmotionProbs q{};
  q[e1] = 0.5;
  q[e2] = 0.5;
  return q;
}

std::string TargetPair::label() const {
  return std::string(kEmotionNames[e1]) + "+" + std::string(kEmotionNames[e2]);
}

std::vector<TargetPair> all_pairs() {
  std::vector<TargetPair> pairs;
  for (int a = 0; a < kNumEmotions; ++a)
    for (int b = a + 1; b < kNumEmotions; ++b) pairs.emplace_back(a, b);
  return pairs;
}

double uncertainty_loss(const EmotionProbs& probs, const EmotionProbs& q) {
  double s = 0.0;
  for (int k = 0; k < kNumEmotions; ++k) s += probs[k] * q[k];
  return -s;
}

nn::ProbabilityLoss uncertainty_loss_fn(const EmotionProbs& q) {
  Eigen::VectorXd qv(kNumEmotions);
  for (int k = 0; k < kNumEmotions; ++k) qv[k] = q[k];
  return {[qv](const Eigen::VectorXd& p) { return -p.dot(qv); },
          [qv](const Eigen::VectorXd&) -> Eigen::VectorXd { return -qv; }};
}

Embedding guided_reverse_step(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                              const ClassifierBundle& classifier, const Embedding& x_t, int t,
                              const EmotionProbs& q, double gamma, const Embedding& noise_draw) {
  require(gamma >= 0.0, ErrorCode::kValidation, "guidance strength must be nonnegative");
  Embedding next = reverse_step(schedule, predictor, x_t, t, noise_draw);
  if (gamma == 0.0) return next;
  next -= gamma * nn::input_gradient(classifier.model, x_t, uncertainty_loss_fn(q));
  return next;
}

const char* to_string(GenerationMode m) { return m == GenerationMode::kScratch ? "scratch" : "edit"; }

GenerationMode generation_mode_from_string(const std::string& s) {
  if (s == "scratch") return GenerationMode::kScratch;
  if (s == "edit") return GenerationMode::kEdit;
  fail(ErrorCode::kUsage, "unknown generation mode '" + s + "' (expected scratch or edit)");
}

Json to_json(const StimulusRecord& r) {
  return Json{{"stimulus_id", r.stimulus_id},
              {"embedding", to_json(r.embedding)},
              {"pair", {r.pair.e1, r.pair.e2}},
              {"model_probs", to_json(r.model_probs)},
              {"accepted", r.accepted ? Json(*r.accepted) : Json(nullptr)},
              {"seed", r.seed},
              {"gamma", r.gamma},
              {"t_start", r.t_start},
              {"mode", to_string(r.mode)}};
}

StimulusRecord stimulus_from_json(const Json& j) {
  StimulusRecord r;
  try {
    r.stimulus_id = j.at("stimulus_id").get<std::string>();
    r.embedding = vector_from_json(j.at("embedding"));
    const auto pair = j.at("pair").get<std::array<int, 2>>();
    r.pair = TargetPair(pair[0], pair[1]);
    r.model_probs = probs_from_json(j.at("model_probs"));
    if (j.contains("accepted") && !j["accepted"].is_null()) r.accepted = j["accepted"].get<bool>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.gamma = j.value("gamma", 0.0);
    r.t_start = j.value("t_start", 0);
    r.mode = generation_mode_from_string(j.value("mode", std::string("edit")));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed stimulus record: ") + e.what());
  }
  return r;
}

Embedding run_chain(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                    const ClassifierBundle* classifier, const EmotionProbs& q, double gamma,
                    Embedding x, int t_start, Rng& rng) {
  const auto d = static_cast<int>(x.size());
  for (int t = t_start; t >= 1; --t) {
    const Embedding noise = standard_normal(rng, d);
    if (classifier && gamma > 0.0) {
      x = guided_reverse_step(schedule, predictor, *classifier, x, t, q, gamma, noise);
    } else {
      x = reverse_step(schedule, predictor, x, t, noise);
    }
  }
  return x;
}

std::vector<StimulusRecord> generate_candidates(const DenoiserBundle& denoiser,
                                                const ClassifierBundle& classifier,
                                                const TargetPair& pair, int n,
                                                const GenerationConfig& cfg) {
  require(n >= 0, ErrorCode::kValidation, "candidate count must be nonnegative");
  require(cfg.gamma >= 0.0, ErrorCode::kValidation, "guidance strength must be nonnegative");
  const NoiseSchedule& schedule = denoiser.schedule;
  const int d = denoiser.dim();
  require(classifier.model.input_dim() == d, ErrorCode::kInputShape,
          "classifier and denoiser disagree on embedding dimension");

  int t_start = schedule.steps;
  std::vector<const LabeledItem*> seeds_e1;
  std::vector<const LabeledItem*> seeds_e2;
  if (cfg.mode == GenerationMode::kEdit) {
    t_start = cfg.t_start < 0 ? schedule.steps / 2 : cfg.t_start;
    require(t_start <= schedule.steps, ErrorCode::kValidation,
            "t_start " + std::to_string(t_start) + " exceeds schedule length " +
                std::to_string(schedule.steps));
    if (n > 0) {
      require(cfg.seed_data != nullptr, ErrorCode::kDependency, "edit mode needs seed embeddings");
      for (const auto& it : cfg.seed_data->items) {
        if (it.label == pair.e1) seeds_e1.push_back(&it);
        if (it.label == pair.e2) seeds_e2.push_back(&it);
      }
      require(!seeds_e1.empty() && !seeds_e2.empty(), ErrorCode::kInsufficientData,
              "seed data lacks items for " + pair.label());
    }
  }

  const auto predictor = as_predictor(denoiser);
  const EmotionProbs q = pair.q();
  std::vector<StimulusRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t chain_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
    Rng rng(chain_seed);
    Embedding x;
    if (cfg.mode == GenerationMode::kScratch) {
      x = standard_normal(rng, d);
    } else {
      const auto& pool = (i % 2 == 0) ? seeds_e1 : seeds_e2;
      const Embedding& seed_x = pool[static_cast<std::size_t>(i / 2) % pool.size()]->embedding;
      x = t_start == 0 ? seed_x : forward_noise(seed_x, t_start, standard_normal(rng, d), schedule);
    }
    x = run_chain(schedule, predictor, &classifier, q, cfg.gamma, std::move(x), t_start, rng);

    StimulusRecord r;
    r.stimulus_id = cfg.id_prefix + "-" + std::to_string(pair.e1) + std::to_string(pair.e2) + "-" +
                    std::to_string(i);
    r.model_probs = predict_probs(classifier, x);
    r.embedding = std::move(x);
    r.pair = pair;
    r.seed = chain_seed;
    r.gamma = cfg.gamma;
    r.t_start = t_start;
    r.mode = cfg.mode;
    out.push_back(std::move(r));
  }
  return out;
}

bool passes_filter(const EmotionProbs& probs, const ActivationThresholds& thresholds,
                   const TargetPair& pair) {
  return probs[pair.e1] > thresholds.k[pair.e1] && probs[pair.e2] > thresholds.k[pair.e2];
}

std::vector<StimulusRecord> filter_candidates(std::vector<StimulusRecord>& candidates,
                                              const ActivationThresholds& thresholds,
                                              const TargetPair& pair) {
  std::vector<StimulusRecord> accepted;
  for (auto& c : candidates) {
    c.accepted = passes_filter(c.model_probs, thresholds, pair);
    if (*c.accepted) accepted.push_back(c);
  }
  return accepted;
}

std::vector<StimulusRecord> filter_candidates(std::vector<StimulusRecord>& candidates,
                                              const ActivationThresholds& thresholds) {
  std::vector<StimulusRecord> accepted;
  for (auto& c : candidates) {
    c.accepted = passes_filter(c.model_probs, thresholds, c.pair);
    if (*c.accepted) accepted.push_back(c);
  }
  return accepted;
}

}  // namespace varlab
