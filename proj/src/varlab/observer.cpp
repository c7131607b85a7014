#include "varlab/observer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "varlab/catalog.hpp"
#include "varlab/error.hpp"
#include "varlab/experiment_client.hpp"
#include "varlab/stats.hpp"

namespace varlab {

void ObserverSpec::validate() const {
  require(!observer_id.empty(), ErrorCode::kValidation, "observer id must be nonempty");
  require(perturb_scale >= 0.0, ErrorCode::kValidation, "perturb_scale must be >= 0");
  require(temperature > 0.0, ErrorCode::kValidation, "temperature must be > 0");
  require(lapse >= 0.0 && lapse <= 1.0, ErrorCode::kValidation, "lapse must lie in [0, 1]");
}

Json to_json(const ObserverSpec& s) {
  return Json{{"observer_id", s.observer_id},
              {"base_classifier", s.base_classifier},
              {"perturb_scale", s.perturb_scale},
              {"temperature", s.temperature},
              {"lapse", s.lapse},
              {"rt_base_ms", s.rt_base_ms},
              {"rt_entropy_gain_ms", s.rt_entropy_gain_ms},
              {"rt_noise_ms", s.rt_noise_ms},
              {"seed", s.seed}};
}

ObserverSpec observer_spec_from_json(const Json& j) {
  ObserverSpec s;
  try {
    s.observer_id = j.at("observer_id").get<std::string>();
    s.base_classifier = j.value("base_classifier", s.base_classifier);
    s.perturb_scale = j.value("perturb_scale", s.perturb_scale);
    s.temperature = j.value("temperature", s.temperature);
    s.lapse = j.value("lapse", s.lapse);
    s.rt_base_ms = j.value("rt_base_ms", s.rt_base_ms);
    s.rt_entropy_gain_ms = j.value("rt_entropy_gain_ms", s.rt_entropy_gain_ms);
    s.rt_noise_ms = j.value("rt_noise_ms", s.rt_noise_ms);
    s.seed = j.value("seed", s.seed);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed observer spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<ObserverSpec> read_cohort_file(const std::filesystem::path& path) {
  const Json j = read_json(path);
  require(j.is_array(), ErrorCode::kValidation, path.string() + ": expected a JSON list");
  std::vector<ObserverSpec> specs;
  for (const auto& item : j) specs.push_back(observer_spec_from_json(item));
  return specs;
}

void write_cohort_file(const std::filesystem::path& path, const std::vector<ObserverSpec>& specs) {
  Json j = Json::array();
  for (const auto& s : specs) j.push_back(to_json(s));
  write_json(path, j);
}

std::vector<ObserverSpec> default_cohort(int count, std::uint64_t seed, double perturb_scale) {
  std::vector<ObserverSpec> specs;
  for (int i = 0; i < count; ++i) {
    ObserverSpec s;
    char id[32];
    std::snprintf(id, sizeof id, "obs-%02d", i + 1);
    s.observer_id = id;
    s.perturb_scale = perturb_scale;
    s.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    specs.push_back(std::move(s));
  }
  return specs;
}

Observer::Observer(ObserverSpec spec, nn::MlpModel model)
    : spec_(std::move(spec)), model_(std::move(model)), rng_(mix_seed(spec_.seed, 1)) {}

EmotionProbs Observer::choice_distribution(const Embedding& x) const {
  const Eigen::VectorXd logits = nn::forward(model_, x);
  const Eigen::VectorXd p = nn::softmax(logits / spec_.temperature);
  EmotionProbs out{};
  for (int k = 0; k < kNumEmotions; ++k) {
    out[k] = (1.0 - spec_.lapse) * p[k] + spec_.lapse / kNumEmotions;
  }
  return out;
}

double Observer::mean_rt_ms(const EmotionProbs& dist) const {
  return spec_.rt_base_ms + spec_.rt_entropy_gain_ms * stats::entropy_bits(dist);
}

Observation Observer::observe(const Embedding& x) {
  const EmotionProbs dist = choice_distribution(x);
  std::discrete_distribution<int> pick(dist.begin(), dist.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  Observation o;
  o.choice = pick(rng_);
  const double rt = mean_rt_ms(dist) + spec_.rt_noise_ms * normal(rng_);
  o.rt_ms = static_cast<int>(std::max(1.0, std::round(rt)));
  return o;
}

Observer make_observer(const ObserverSpec& spec, const ClassifierBundle& base) {
  spec.validate();
  base.validate();
  nn::MlpModel model = base.model;
  if (spec.perturb_scale > 0.0) {
    Rng rng(mix_seed(spec.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < model.parameter_count(); ++i) {
      model.set_parameter(i, model.parameter(i) + spec.perturb_scale * normal(rng));
    }
  }
  return Observer(spec, std::move(model));
}

CohortRun run_cohort(const std::vector<ObserverSpec>& specs, const ClassifierBundle& base,
                     const Catalog& catalog, ExperimentClient& client, std::uint64_t seed) {
  CohortRun run;
  for (const auto& spec : specs) {
    Observer observer = make_observer(spec, base);
    observer.reseed(mix_seed(seed, spec.seed));
    const SessionInfo session = client.create_session(spec.observer_id);
    run.session_ids.push_back(session.session_id);
    while (true) {
      const auto trial = client.next_trial(session.session_id);
      if (!trial) break;
      const CatalogEntry& entry = catalog.at(trial->stimulus_id);
      const Observation o = observer.observe(entry.embedding);
      client.submit_response(session.session_id, trial->trial_index, o.choice, o.rt_ms);
      ++run.trials_submitted;
    }
  }
  return run;
}

}  // namespace varlab
