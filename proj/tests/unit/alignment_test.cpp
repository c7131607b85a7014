#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "varlab/alignment.hpp"
#include "varlab/error.hpp"

using namespace varlab;
namespace vt = varlab::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

std::vector<BehavioralItem> items(int n, const std::string& tag, int participants = 1) {
  std::vector<BehavioralItem> out;
  for (int i = 0; i < n; ++i) {
    BehavioralItem it;
    it.embedding = Embedding::Constant(8, i);
    it.label = i % 6;
    it.stimulus_id = tag + std::to_string(i % 37);
    it.participant_id = "p" + std::to_string(i % participants);
    it.trial_index = i;
    out.push_back(it);
  }
  return out;
}

std::set<std::string> keys(const std::vector<BehavioralItem>& v) {
  std::set<std::string> s;
  for (const auto& it : v) s.insert(it.key());
  return s;
}

// Linear classifier whose output on the one-hot embedding e_i is exactly
// probs[i].
ClassifierBundle lookup_model(const std::vector<EmotionProbs>& probs) {
  ClassifierBundle b;
  b.model = nn::MlpModel::zeros({static_cast<int>(probs.size()), 6});
  for (std::size_t i = 0; i < probs.size(); ++i)
    for (int k = 0; k < 6; ++k) b.model.weights[0](k, static_cast<Eigen::Index>(i)) = std::log(probs[i][k]);
  return b;
}

}  // namespace

TEST(Split, EightyTwentyPartition) {
  const auto all = items(100, "s");
  const auto [train, val] = split_train_val(all, 3);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(val.size(), 20u);
  const auto kt = keys(train), kv = keys(val);
  for (const auto& k : kv) EXPECT_FALSE(kt.count(k));
  EXPECT_EQ(kt.size() + kv.size(), 100u);
  EXPECT_EQ(split_train_val(all, 3).second.front().key(), val.front().key());
  EXPECT_EQ(code_of([] { split_train_val(items(4, "s"), 1); }), ErrorCode::kInsufficientData);
}

TEST(Split, IndividualValNeverReachesGroupSets) {
  const auto all = items(600, "s", 6);
  const BehavioralSplits s = make_behavioral_splits(all, 9);
  const auto gv = keys(s.group_val), gt = keys(s.group_train);
  std::size_t total_val = 0;
  for (const auto& [pid, val] : s.individual_val) {
    total_val += val.size();
    for (const auto& k : keys(val)) {
      EXPECT_FALSE(gv.count(k)) << k;
      EXPECT_FALSE(gt.count(k)) << k;
    }
    for (const auto& k : keys(s.individual_train.at(pid))) EXPECT_FALSE(keys(val).count(k));
  }
  EXPECT_EQ(s.individual_val.size(), 6u);
  EXPECT_EQ(total_val + gv.size() + gt.size(), 600u);
}

TEST(Mix, QuotasFollowRatio) {
  const auto p = items(500, "P"), s = items(500, "S");
  auto count_primary = [](const BehavioralTrainingSet& set) {
    int n = 0;
    for (const auto& it : set.items) n += it.stimulus_id[0] == 'P';
    return n;
  };
  const auto a = mix_datasets(p, s, MixRatio{}, 300, 1);
  EXPECT_EQ(a.items.size(), 300u);
  EXPECT_EQ(count_primary(a), 200);
  const auto b = mix_datasets(p, s, MixRatio{1, 1}, 2, 1);
  EXPECT_EQ(b.items.size(), 2u);
  EXPECT_EQ(count_primary(b), 1);
  EXPECT_EQ(MixRatio{}.label(), "2:1");
}

TEST(Mix, SmallComponentIsDrawnWithReplacement) {
  const auto p = items(10, "P"), s = items(500, "S");
  const auto set = mix_datasets(p, s, MixRatio{}, 300, 4);
  int primary = 0;
  for (const auto& it : set.items) primary += it.stimulus_id[0] == 'P';
  EXPECT_EQ(primary, 200);
}

TEST(Mix, FractionsOverFiftyEpochs) {
  const auto p = items(1000, "P"), s = items(1000, "S");
  long primary = 0, total = 0;
  for (int epoch = 0; epoch < 50; ++epoch) {
    const auto set = mix_datasets(p, s, MixRatio{}, 257, mix_seed(5, static_cast<std::uint64_t>(epoch)));
    for (const auto& it : set.items) primary += it.stimulus_id[0] == 'P';
    total += static_cast<long>(set.items.size());
  }
  const double frac = static_cast<double>(primary) / static_cast<double>(total);
  EXPECT_NEAR(frac, 2.0 / 3.0, 0.01);
  EXPECT_NEAR(1.0 - frac, 1.0 / 3.0, 0.01);
}

TEST(Mix, EmptyComponentIsError) {
  EXPECT_THROW(mix_datasets({}, items(5, "S"), MixRatio{}, 30, 1), Error);
  EXPECT_THROW(mix_datasets(items(5, "P"), {}, MixRatio{}, 30, 1), Error);
  EXPECT_THROW(MixRatio({0, 1}).validate(), Error);
}

namespace {

class Finetune : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    spec_ = new DomainSpec(DomainSpec::default_spec());
    TrainingConfig cfg;
    cfg.epochs = 10;
    base_data_ = new LabeledDataset(sample_labeled(*spec_, 2000, 1));
    base_ = new ClassifierBundle(train_classifier(*base_data_, cfg));
    // "Behavioral" labels from a shifted rule: fear is always answered as
    // surprise.
    behavior_ = new std::vector<BehavioralItem>();
    const auto draws = sample_labeled(*spec_, 1200, 3);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      BehavioralItem it;
      it.embedding = draws.items[i].embedding;
      it.label = draws.items[i].label == 1 ? 0 : draws.items[i].label;
      it.stimulus_id = "st" + std::to_string(i);
      it.participant_id = "p" + std::to_string(i % 4);
      it.trial_index = static_cast<int>(i);
      behavior_->push_back(it);
    }
  }
  static void TearDownTestSuite() {
    delete behavior_;
    delete base_;
    delete base_data_;
    delete spec_;
  }
  static DomainSpec* spec_;
  static LabeledDataset* base_data_;
  static ClassifierBundle* base_;
  static std::vector<BehavioralItem>* behavior_;
};

DomainSpec* Finetune::spec_ = nullptr;
LabeledDataset* Finetune::base_data_ = nullptr;
ClassifierBundle* Finetune::base_ = nullptr;
std::vector<BehavioralItem>* Finetune::behavior_ = nullptr;

}  // namespace

TEST_F(Finetune, GroupIsSeededAndKeepsShape) {
  FinetuneConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 8;
  const auto a = finetune_group(*base_, *behavior_, base_items(*base_data_), cfg);
  const auto b = finetune_group(*base_, *behavior_, base_items(*base_data_), cfg);
  EXPECT_TRUE(a.model == b.model);
  EXPECT_FALSE(a.model == base_->model);
  EXPECT_EQ(a.model.layer_dims, base_->model.layer_dims);
  EXPECT_EQ(a.provenance, Provenance::kGroup);
  EXPECT_THROW(finetune_group(*base_, {}, base_items(*base_data_), cfg), Error);
}

TEST_F(Finetune, GroupFitsBehaviourBetter) {
  const auto [train, val] = split_train_val(*behavior_, 1);
  FinetuneConfig cfg;
  cfg.lr = 1e-3;
  const auto group = finetune_group(*base_, train, base_items(*base_data_), cfg);
  EXPECT_GT(accuracy(group, val), accuracy(*base_, val) + 0.05);
}

TEST_F(Finetune, IndividualZeroEpochsIsGroup) {
  FinetuneConfig cfg;
  cfg.epochs = 0;
  std::vector<BehavioralItem> mine;
  for (const auto& it : *behavior_)
    if (it.participant_id == "p1") mine.push_back(it);
  const auto indiv = finetune_individual(*base_, "p1", mine, *behavior_, cfg);
  EXPECT_TRUE(indiv.model == base_->model);
  EXPECT_EQ(indiv.provenance, Provenance::kIndividual);
  EXPECT_EQ(indiv.participant, "p1");
  cfg.epochs = 2;
  EXPECT_TRUE(finetune_individual(*base_, "p1", mine, *behavior_, cfg).model ==
              finetune_individual(*base_, "p1", mine, *behavior_, cfg).model);
  mine.resize(49);
  EXPECT_EQ(code_of([&] { finetune_individual(*base_, "p1", mine, *behavior_, cfg); }),
            ErrorCode::kInsufficientData);
}

TEST(ModelEntropy, KnownValues) {
  ClassifierBundle zero;
  zero.model = nn::MlpModel::zeros({3, 6});
  EXPECT_NEAR(model_entropy(zero, {Embedding::Ones(3)})[0], std::log2(6.0), 1e-12);
  ClassifierBundle sharp = zero;
  sharp.model.biases[0][4] = 60.0;
  EXPECT_LT(model_entropy(sharp, {Embedding::Ones(3)})[0], 1e-20);
}

TEST(ModelEntropy, HandComputedFixture) {
  const std::vector<EmotionProbs> probs{{0.5, 0.5, 1e-300, 1e-300, 1e-300, 1e-300},
                                        {0.25, 0.25, 0.25, 0.25, 1e-300, 1e-300},
                                        {0.7, 0.1, 0.1, 0.05, 0.03, 0.02},
                                        {0.9, 0.02, 0.02, 0.02, 0.02, 0.02},
                                        {0.2, 0.2, 0.2, 0.2, 0.1, 0.1}};
  const ClassifierBundle b = lookup_model(probs);
  std::vector<Embedding> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(Embedding::Unit(5, i));
  const auto h = model_entropy(b, xs);
  EXPECT_NEAR(h[0], 1.0, 1e-9);
  EXPECT_NEAR(h[1], 2.0, 1e-9);
  for (int i = 2; i < 5; ++i) {
    double expect = 0;
    for (double p : probs[i]) expect -= p * std::log2(p);
    EXPECT_NEAR(h[i], expect, 1e-12);
  }
}

namespace {

// Five stimuli at the one-hot embeddings e_0..e_4 with the given response
// counts.
std::pair<VarEmotionDataset, Catalog> alignment_fixture(const std::vector<ChoiceCounts>& counts) {
  VarEmotionDataset d;
  Catalog c;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    CatalogEntry e;
    e.stimulus_id = "x" + std::to_string(i);
    e.embedding = Embedding::Unit(static_cast<Eigen::Index>(counts.size()), static_cast<Eigen::Index>(i));
    e.pair = TargetPair(0, 1);
    c.add(e);
    d.stimuli[e.stimulus_id] = counts[i];
  }
  return {d, c};
}

}  // namespace

TEST(EntropyAlignment, PerfectAndReversed) {
  const std::vector<ChoiceCounts> counts{{5, 1, 1, 1, 1, 1}, {3, 3, 1, 1, 1, 1}, {2, 2, 2, 2, 1, 1},
                                         {9, 1, 1, 1, 1, 1}, {2, 2, 2, 2, 2, 2}};
  const auto [data, cat] = alignment_fixture(counts);
  std::vector<EmotionProbs> same, reversed;
  for (const auto& c : counts) {
    EmotionProbs p{};
    const double n = std::accumulate(c.begin(), c.end(), 0.0);
    for (int k = 0; k < 6; ++k) p[k] = c[k] / n;
    same.push_back(p);
  }
  // Entropy order of the empirical rows is 3 < 0 < 1 < 2 < 4; give the
  // model the opposite order.
  const std::vector<double> sharpness{0.30, 0.75, 1.0, 0.0, 1.5};
  for (double s : sharpness) {
    EmotionProbs p{};
    double z = 0;
    for (int k = 0; k < 6; ++k) z += (p[k] = std::exp(s * k));
    for (double& v : p) v /= z;
    reversed.push_back(p);
  }
  EXPECT_NEAR(entropy_alignment(lookup_model(same), data, cat), 1.0, 1e-12);
  EXPECT_NEAR(entropy_alignment(lookup_model(reversed), data, cat), -1.0, 1e-12);
}

TEST(EntropyAlignment, TooFewStimuli) {
  const auto [data, cat] = alignment_fixture({{1, 1, 0, 0, 0, 0}, {2, 0, 0, 0, 0, 0}});
  EXPECT_EQ(code_of([&] { entropy_alignment(lookup_model({{0.5, 0.1, 0.1, 0.1, 0.1, 0.1},
                                                          {0.5, 0.1, 0.1, 0.1, 0.1, 0.1}}),
                                             data, cat); }),
            ErrorCode::kInsufficientData);
}

TEST(Report, ValidatesRanges) {
  AlignmentReport r;
  r.accuracy.push_back({"BaseNet", "varEmotion", 0.5, 10});
  r.entropy_rho["BaseNet"] = 0.3;
  r.participants.push_back({"p", 0.4, 0.5, 20});
  r.participants.push_back({"q", 0.6, 0.55, 20});
  EXPECT_NO_THROW(r.validate());
  EXPECT_NEAR(*r.mean_individual_gain(), 0.025, 1e-12);
  r.accuracy[0].accuracy = 1.2;
  EXPECT_THROW(r.validate(), Error);
  EXPECT_FALSE(AlignmentReport{}.mean_individual_gain().has_value());
}
