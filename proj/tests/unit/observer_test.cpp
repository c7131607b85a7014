#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "support.hpp"
#include "varlab/analysis.hpp"
#include "varlab/error.hpp"
#include "varlab/experiment_client.hpp"
#include "varlab/observer.hpp"
#include "varlab/stats.hpp"

using namespace varlab;
namespace vt = varlab::testing;

namespace {

class Observers : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    spec_ = new DomainSpec(DomainSpec::default_spec());
    TrainingConfig cfg;
    cfg.epochs = 20;
    base_ = new ClassifierBundle(train_classifier(sample_labeled(*spec_, 4000, 1), cfg));

    // Boundary stimuli sit halfway between two class means; sentinels at
    // the means themselves.
    catalog_ = new Catalog();
    Rng rng(2);
    const auto pairs = all_pairs();
    for (int i = 0; i < 420; ++i) {
      const TargetPair p = pairs[static_cast<std::size_t>(i) % 15];
      CatalogEntry e;
      e.stimulus_id = "b" + std::to_string(i);
      e.embedding = 0.5 * (spec_->class_means[p.e1] + spec_->class_means[p.e2]) + 0.3 * standard_normal(rng, 8);
      e.pair = p;
      catalog_->add(std::move(e));
    }
    for (const auto& s : sentinel_pool(*spec_, 2, 3)) {
      CatalogEntry e;
      e.stimulus_id = "s" + std::to_string(catalog_->entries.size());
      e.embedding = s.embedding;
      e.is_sentinel = true;
      e.sentinel_truth = s.truth;
      catalog_->add(std::move(e));
    }
  }
  static void TearDownTestSuite() {
    delete catalog_;
    delete base_;
    delete spec_;
  }

  static std::vector<TrialRecord> run(const std::vector<ObserverSpec>& specs, std::uint64_t seed) {
    vt::TempDir dir;
    ServiceOptions o;
    o.seed = seed;
    o.sync_writes = false;
    o.clock = [] { return std::int64_t{0}; };
    ExperimentService svc(*catalog_, dir.path(), o);
    DirectClient client(svc);
    run_cohort(specs, *base_, *catalog_, client, seed);
    return svc.records();
  }

  static std::pair<double, double> mean_entropies(const std::vector<TrialRecord>& recs) {
    double b = 0, s = 0;
    int nb = 0, ns = 0;
    for (const auto& [id, dist] : distributions_by_stimulus(recs, true)) {
      if (catalog_->at(id).is_sentinel) {
        s += entropy_bits(dist), ++ns;
      } else {
        b += entropy_bits(dist), ++nb;
      }
    }
    return {b / nb, s / ns};
  }

  static DomainSpec* spec_;
  static ClassifierBundle* base_;
  static Catalog* catalog_;
};

DomainSpec* Observers::spec_ = nullptr;
ClassifierBundle* Observers::base_ = nullptr;
Catalog* Observers::catalog_ = nullptr;

ObserverSpec spec_with(double sigma, double tau, double lapse, std::uint64_t seed) {
  ObserverSpec s;
  s.observer_id = "o" + std::to_string(seed);
  s.perturb_scale = sigma;
  s.temperature = tau;
  s.lapse = lapse;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_F(Observers, ZeroSigmaIsTheBase) {
  EXPECT_TRUE(make_observer(spec_with(0.0, 1.0, 0.0, 4), *base_).model() == base_->model);
}

TEST_F(Observers, SameSpecSameObserver) {
  const auto s = spec_with(0.4, 1.5, 0.05, 9);
  EXPECT_TRUE(make_observer(s, *base_).model() == make_observer(s, *base_).model());
  EXPECT_FALSE(make_observer(spec_with(0.4, 1.5, 0.05, 10), *base_).model() == make_observer(s, *base_).model());
}

TEST_F(Observers, PerturbedObserversDisagreeOnBoundary) {
  const Observer a = make_observer(spec_with(0.5, 1.0, 0.0, 1), *base_);
  const Observer b = make_observer(spec_with(0.5, 1.0, 0.0, 2), *base_);
  int disagree = 0;
  for (int i = 0; i < 200; ++i) {
    const auto& x = catalog_->at("b" + std::to_string(i)).embedding;
    disagree += argmax(a.choice_distribution(x)) != argmax(b.choice_distribution(x));
  }
  EXPECT_GE(disagree, 1);
}

TEST_F(Observers, FullLapseIsUniform) {
  Observer o = make_observer(spec_with(0.4, 1.5, 1.0, 3), *base_);
  std::array<int, 6> counts{};
  const Embedding x = spec_->class_means[2];
  for (int i = 0; i < 6000; ++i) ++counts[static_cast<std::size_t>(o.observe(x).choice)];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  // 5 degrees of freedom, upper 1% point 15.086.
  EXPECT_LT(chi2, 15.086);
}

TEST_F(Observers, ColdObserverIsArgmax) {
  Observer o = make_observer(spec_with(0.0, 1e-6, 0.0, 5), *base_);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const Embedding x = 3.0 * standard_normal(rng, 8);
    const int expected = argmax(predict_probs(*base_, x));
    for (int r = 0; r < 3; ++r) EXPECT_EQ(o.observe(x).choice, expected);
  }
}

TEST_F(Observers, RtGrowsWithEntropyWithoutNoise) {
  ObserverSpec s = spec_with(0.3, 1.5, 0.05, 7);
  s.rt_noise_ms = 0.0;
  Observer o = make_observer(s, *base_);
  std::vector<std::pair<double, int>> pts;
  for (int i = 0; i < 200; ++i) {
    const auto& x = catalog_->entries[static_cast<std::size_t>(i * 2)].embedding;
    const EmotionProbs d = o.choice_distribution(x);
    const double h = stats::entropy_bits(d);
    const Observation obs = o.observe(x);
    EXPECT_EQ(obs.rt_ms, static_cast<int>(std::lround(s.rt_base_ms + s.rt_entropy_gain_ms * h)));
    pts.push_back({h, obs.rt_ms});
  }
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LE(pts[i - 1].second, pts[i].second);
  EXPECT_LT(o.mean_rt_ms({1, 0, 0, 0, 0, 0}), o.mean_rt_ms({0.5, 0.5, 0, 0, 0, 0}));
  EXPECT_LT(o.mean_rt_ms({0.5, 0.5, 0, 0, 0, 0}), o.mean_rt_ms({0.2, 0.2, 0.2, 0.2, 0.1, 0.1}));
}

TEST_F(Observers, SpecValidation) {
  EXPECT_THROW(spec_with(-0.1, 1, 0, 1).validate(), Error);
  EXPECT_THROW(spec_with(0.1, 0, 0, 1).validate(), Error);
  EXPECT_THROW(spec_with(0.1, 1, 1.5, 1).validate(), Error);
  const auto s = spec_with(0.2, 0.7, 0.1, 99);
  const auto back = observer_spec_from_json(Json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(back), to_json(s));
}

TEST_F(Observers, CohortProducesFullSessions) {
  const auto recs = run(default_cohort(10, 4), 11);
  EXPECT_EQ(recs.size(), 4000u);
  std::map<std::string, int> per_participant, sentinels;
  for (const auto& r : recs) {
    per_participant[r.participant_id]++;
    sentinels[r.participant_id] += r.is_sentinel;
  }
  EXPECT_EQ(per_participant.size(), 10u);
  for (const auto& [p, n] : per_participant) {
    EXPECT_EQ(n, 400);
    EXPECT_EQ(sentinels[p], 10);
  }
}

TEST_F(Observers, CohortIsReproducible) {
  const auto a = run(default_cohort(3, 4), 12);
  const auto b = run(default_cohort(3, 4), 12);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_json(a[i]), to_json(b[i]));
}

TEST_F(Observers, NoiselessCohortPassesQc) {
  std::vector<ObserverSpec> specs;
  for (int i = 0; i < 5; ++i) specs.push_back(spec_with(0.0, 1e-6, 0.0, static_cast<std::uint64_t>(i)));
  const auto recs = run(specs, 13);
  const auto res = export_dataset(recs, Granularity::kGroup);
  for (const auto& p : res.all_participants) {
    EXPECT_TRUE(p.qc.retain);
    EXPECT_EQ(p.qc.sentinel_accuracy, 1.0);
  }
}

TEST_F(Observers, BoundaryEntropyExceedsSentinelEntropy) {
  std::vector<ObserverSpec> specs;
  for (int i = 0; i < 10; ++i) specs.push_back(spec_with(0.5, 1.5, 0.05, 100 + static_cast<std::uint64_t>(i)));
  const auto [boundary, sentinel] = mean_entropies(run(specs, 14));
  EXPECT_GE(boundary - sentinel, 0.3);
}

TEST_F(Observers, EntropyWeaklyIncreasesWithSigma) {
  // Entropy of the cohort's pooled expected choice distribution per stimulus.
  auto mean_entropy = [&](double sigma) {
    std::vector<Observer> cohort;
    for (int o = 0; o < 10; ++o)
      cohort.push_back(make_observer(spec_with(sigma, 1.5, 0.05, 500 + static_cast<std::uint64_t>(o)), *base_));
    double total = 0;
    int n = 0;
    for (int i = 0; i < 420; i += 3) {
      std::array<double, 6> pooled{};
      for (const auto& obs : cohort) {
        const EmotionProbs d = obs.choice_distribution(catalog_->at("b" + std::to_string(i)).embedding);
        for (int k = 0; k < 6; ++k) pooled[k] += d[k] / 10.0;
      }
      total += stats::entropy_bits(pooled);
      ++n;
    }
    return total / n;
  };
  const double h0 = mean_entropy(0.0), h1 = mean_entropy(0.25), h2 = mean_entropy(0.5);
  EXPECT_LE(h0, h1);
  EXPECT_LE(h1, h2);
}
