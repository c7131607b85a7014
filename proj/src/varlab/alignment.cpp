#include "varlab/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "varlab/error.hpp"
#include "varlab/stats.hpp"

namespace varlab {

std::string BehavioralItem::key() const {
  return stimulus_id + "|" + participant_id + "|" + std::to_string(trial_index);
}

Eigen::MatrixXd BehavioralTrainingSet::embedding_matrix() const {
  if (items.empty()) return {};
  Eigen::MatrixXd m(items.front().embedding.size(), static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = items[i].embedding;
  return m;
}

std::vector<int> BehavioralTrainingSet::labels() const {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.label);
  return out;
}

std::vector<double> BehavioralTrainingSet::weights() const {
  std::vector<double> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.weight);
  return out;
}

void MixRatio::validate() const {
  require(primary_parts >= 1 && secondary_parts >= 1, ErrorCode::kConfig,
          "mix ratio parts must both be at least 1");
}

std::string MixRatio::label() const {
  return std::to_string(primary_parts) + ":" + std::to_string(secondary_parts);
}

std::vector<BehavioralItem> behavioral_items(std::span<const TrialRecord> trials,
                                             const Catalog& catalog) {
  std::vector<BehavioralItem> out;
  for (const auto& t : trials) {
    if (t.is_sentinel) continue;
    BehavioralItem it;
    it.embedding = catalog.at(t.stimulus_id).embedding;
    it.label = t.choice;
    it.stimulus_id = t.stimulus_id;
    it.participant_id = t.participant_id;
    it.trial_index = t.trial_index;
    out.push_back(std::move(it));
  }
  return out;
}

std::vector<BehavioralItem> base_items(const LabeledDataset& data) {
  std::vector<BehavioralItem> out;
  out.reserve(data.items.size());
  for (const auto& li : data.items) {
    BehavioralItem it;
    it.embedding = li.embedding;
    it.label = li.label;
    out.push_back(std::move(it));
  }
  return out;
}

std::pair<std::vector<BehavioralItem>, std::vector<BehavioralItem>> split_train_val(
    std::vector<BehavioralItem> items, std::uint64_t seed) {
  require(items.size() >= 5, ErrorCode::kInsufficientData,
          "a train/val split needs at least 5 items, got " + std::to_string(items.size()));
  Rng rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
  const std::size_t n_train = items.size() * 4 / 5;
  std::vector<BehavioralItem> val(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(n_train)),
                                  std::make_move_iterator(items.end()));
  items.resize(n_train);
  return {std::move(items), std::move(val)};
}

BehavioralSplits make_behavioral_splits(const std::vector<BehavioralItem>& items,
                                        std::uint64_t seed) {
  std::map<std::string, std::vector<BehavioralItem>> by_participant;
  for (const auto& it : items) by_participant[it.participant_id].push_back(it);
  BehavioralSplits s;
  std::vector<BehavioralItem> pool;
  std::uint64_t ordinal = 0;
  for (auto& [pid, list] : by_participant) {
    auto [train, val] = split_train_val(std::move(list), mix_seed(seed, ++ordinal));
    pool.insert(pool.end(), train.begin(), train.end());
    s.individual_train[pid] = std::move(train);
    s.individual_val[pid] = std::move(val);
  }
  auto [gtrain, gval] = split_train_val(std::move(pool), mix_seed(seed, 0));
  s.group_train = std::move(gtrain);
  s.group_val = std::move(gval);
  return s;
}

Json splits_to_json(const BehavioralSplits& s) {
  auto keys = [](const std::vector<BehavioralItem>& v) {
    Json arr = Json::array();
    for (const auto& it : v) arr.push_back(it.key());
    return arr;
  };
  Json indiv = Json::object();
  for (const auto& [pid, train] : s.individual_train) {
    indiv[pid] = {{"train", keys(train)}, {"val", keys(s.individual_val.at(pid))}};
  }
  return {{"group", {{"train", keys(s.group_train)}, {"val", keys(s.group_val)}}},
          {"individual", indiv}};
}

namespace {

void draw(const std::vector<BehavioralItem>& from, std::size_t quota, Rng& rng,
          std::vector<BehavioralItem>& into) {
  if (quota <= from.size()) {
    std::vector<std::size_t> idx(from.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `quota` slots become a uniform sample.
    for (std::size_t i = 0; i < quota; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      into.push_back(from[idx[i]]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, from.size() - 1);
    for (std::size_t i = 0; i < quota; ++i) into.push_back(from[pick(rng)]);
  }
}

std::size_t primary_quota(std::size_t epoch_size, MixRatio r) {
  const std::size_t total = static_cast<std::size_t>(r.primary_parts + r.secondary_parts);
  return (epoch_size * static_cast<std::size_t>(r.primary_parts) + total - 1) / total;
}

}  // namespace

BehavioralTrainingSet mix_datasets(const std::vector<BehavioralItem>& primary,
                                   const std::vector<BehavioralItem>& secondary, MixRatio ratio,
                                   std::size_t epoch_size, std::uint64_t seed) {
  ratio.validate();
  require(!primary.empty() && !secondary.empty(), ErrorCode::kEmptyInput,
          "both mixture components must be nonempty");
  const std::size_t n_primary = std::min(primary_quota(epoch_size, ratio), epoch_size);
  Rng rng(seed);
  BehavioralTrainingSet out;
  out.items.reserve(epoch_size);
  draw(primary, n_primary, rng, out.items);
  draw(secondary, epoch_size - n_primary, rng, out.items);
  std::shuffle(out.items.begin(), out.items.end(), rng);
  out.provenance = "mix " + ratio.label() + " primary=" + std::to_string(n_primary) +
                   " secondary=" + std::to_string(epoch_size - n_primary);
  return out;
}

Json to_json(const FinetuneConfig& c) {
  return {{"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"ratio", {c.ratio.primary_parts, c.ratio.secondary_parts}},
          {"epoch_size", c.epoch_size},
          {"seed", c.seed}};
}

FinetuneConfig finetune_config_from_json(const Json& j) {
  FinetuneConfig c;
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("ratio")) {
    c.ratio.primary_parts = j["ratio"].at(0).get<int>();
    c.ratio.secondary_parts = j["ratio"].at(1).get<int>();
  }
  c.epoch_size = j.value("epoch_size", c.epoch_size);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

void finetune_in_place(ClassifierBundle& bundle, const std::vector<BehavioralItem>& primary,
                       const std::vector<BehavioralItem>& secondary, const FinetuneConfig& cfg) {
  require(cfg.epochs >= 0 && cfg.batch_size > 0 && cfg.lr > 0, ErrorCode::kConfig,
          "invalid fine-tune configuration");
  cfg.ratio.validate();
  require(!primary.empty() && !secondary.empty(), ErrorCode::kEmptyInput,
          "fine-tuning needs nonempty behavioral and secondary data");
  const std::size_t parts = static_cast<std::size_t>(cfg.ratio.primary_parts + cfg.ratio.secondary_parts);
  const std::size_t epoch_size =
      cfg.epoch_size > 0 ? cfg.epoch_size
                         : (primary.size() * parts + static_cast<std::size_t>(cfg.ratio.primary_parts) - 1) /
                               static_cast<std::size_t>(cfg.ratio.primary_parts);
  auto adam = nn::AdamState::for_model(bundle.model, cfg.lr);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto mix = mix_datasets(primary, secondary, cfg.ratio, epoch_size,
                                  mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    const auto labels = mix.labels();
    const auto weights = mix.weights();
    train_in_order(bundle.model, adam, mix.embedding_matrix(), labels, weights, cfg.batch_size);
  }
}

}  // namespace

ClassifierBundle finetune_group(const ClassifierBundle& base,
                                const std::vector<BehavioralItem>& varemotion_group,
                                const std::vector<BehavioralItem>& base_analog,
                                const FinetuneConfig& cfg) {
  ClassifierBundle out = base;
  finetune_in_place(out, varemotion_group, base_analog, cfg);
  out.provenance = Provenance::kGroup;
  out.participant.reset();
  out.training_config.lr = cfg.lr;
  out.training_config.epochs = cfg.epochs;
  out.training_config.batch_size = cfg.batch_size;
  out.training_config.seed = cfg.seed;
  return out;
}

ClassifierBundle finetune_individual(const ClassifierBundle& group, const std::string& participant,
                                     const std::vector<BehavioralItem>& varemotion_i,
                                     const std::vector<BehavioralItem>& varemotion_group,
                                     const FinetuneConfig& cfg) {
  require(static_cast<int>(varemotion_i.size()) >= kMinIndividualTrials, ErrorCode::kInsufficientData,
          "participant " + participant + " has " + std::to_string(varemotion_i.size()) +
              " trials, at least " + std::to_string(kMinIndividualTrials) + " are needed");
  ClassifierBundle out = group;
  finetune_in_place(out, varemotion_i, varemotion_group, cfg);
  out.provenance = Provenance::kIndividual;
  out.participant = participant;
  out.training_config.lr = cfg.lr;
  out.training_config.epochs = cfg.epochs;
  out.training_config.batch_size = cfg.batch_size;
  out.training_config.seed = cfg.seed;
  return out;
}

double accuracy(const ClassifierBundle& bundle, const std::vector<BehavioralItem>& items) {
  require(!items.empty(), ErrorCode::kEmptyInput, "accuracy over no items");
  BehavioralTrainingSet set;
  set.items = items;
  const auto labels = set.labels();
  return accuracy(bundle, set.embedding_matrix(), labels);
}

std::vector<double> model_entropy(const ClassifierBundle& bundle,
                                  const std::vector<Embedding>& stimuli) {
  require(!stimuli.empty(), ErrorCode::kEmptyInput, "model entropy over no stimuli");
  std::vector<double> out;
  out.reserve(stimuli.size());
  for (const auto& x : stimuli) out.push_back(stats::entropy_bits(predict_probs(bundle, x)));
  return out;
}

double entropy_alignment(const ClassifierBundle& bundle, const VarEmotionDataset& human,
                         const Catalog& catalog, int min_responses) {
  std::vector<Embedding> xs;
  std::vector<double> human_h;
  for (const auto& [id, counts] : human.stimuli) {
    int n = 0;
    for (int c : counts) n += c;
    if (n < min_responses) continue;
    xs.push_back(catalog.at(id).embedding);
    human_h.push_back(entropy_bits(choice_distribution(id, counts)));
  }
  require(xs.size() >= 3, ErrorCode::kInsufficientData,
          "entropy alignment needs at least 3 stimuli with " + std::to_string(min_responses) +
              "+ responses");
  return stats::spearman(model_entropy(bundle, xs), human_h);
}

std::optional<double> AlignmentReport::mean_individual_gain() const {
  if (participants.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& p : participants) s += p.delta();
  return s / static_cast<double>(participants.size());
}

void AlignmentReport::validate() const {
  for (const auto& r : accuracy)
    require(r.accuracy >= 0.0 && r.accuracy <= 1.0, ErrorCode::kValidation, "accuracy outside [0, 1]");
  for (const auto& [m, rho] : entropy_rho)
    require(rho >= -1.0 - 1e-12 && rho <= 1.0 + 1e-12, ErrorCode::kValidation, "rho outside [-1, 1]");
}

Json to_json(const AlignmentReport& r) {
  Json acc = Json::array();
  for (const auto& a : r.accuracy)
    acc.push_back({{"model", a.model}, {"dataset", a.dataset}, {"accuracy", a.accuracy}, {"n", a.n}});
  Json parts = Json::array();
  for (const auto& p : r.participants) {
    parts.push_back({{"participant_id", p.participant_id},
                     {"group_accuracy", p.group_accuracy},
                     {"individual_accuracy", p.individual_accuracy},
                     {"delta", p.delta()},
                     {"n", p.n}});
  }
  const auto gain = r.mean_individual_gain();
  return {{"accuracy", acc},
          {"entropy_spearman", r.entropy_rho},
          {"participants", parts},
          {"mean_individual_gain", gain ? Json(*gain) : Json(nullptr)}};
}

std::string accuracy_csv(const AlignmentReport& r) {
  std::ostringstream out;
  out << "model,dataset,accuracy,n\n";
  for (const auto& a : r.accuracy)
    out << a.model << ',' << a.dataset << ',' << format_double(a.accuracy) << ',' << a.n << '\n';
  return out.str();
}

std::string participants_csv(const AlignmentReport& r) {
  std::ostringstream out;
  out << "participant_id,group_accuracy,individual_accuracy,delta,n\n";
  for (const auto& p : r.participants) {
    out << p.participant_id << ',' << format_double(p.group_accuracy) << ','
        << format_double(p.individual_accuracy) << ',' << format_double(p.delta()) << ',' << p.n << '\n';
  }
  return out.str();
}

}  // namespace varlab
