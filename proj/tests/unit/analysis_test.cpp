#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "support.hpp"
#include "varlab/analysis.hpp"
#include "varlab/error.hpp"
#include "varlab/stats.hpp"

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

std::vector<TrialRecord> trials_for(const std::string& sid, const std::vector<int>& choices, int rt = 700) {
  std::vector<TrialRecord> out;
  for (std::size_t i = 0; i < choices.size(); ++i)
    out.push_back(vt::make_trial("p" + std::to_string(i), 0, sid, choices[i], rt));
  return out;
}

VarEmotionDataset dataset_from(const std::vector<TrialRecord>& trials) {
  VarEmotionDataset d;
  d.trials = trials;
  for (const auto& t : trials)
    if (!t.is_sentinel) d.stimuli[t.stimulus_id][static_cast<std::size_t>(t.choice)] += 1;
  return d;
}

}  // namespace

TEST(Choice, OneHotAndHalves) {
  const auto anger = choice_distribution(trials_for("x", {5, 5, 5, 5}));
  EXPECT_EQ(anger.n, 4);
  EXPECT_EQ(anger.probs, (EmotionProbs{0, 0, 0, 0, 0, 1}));
  const auto fs = choice_distribution(trials_for("y", {1, 1, 1, 0, 0, 0}));
  EXPECT_EQ(fs.probs[0], 0.5);
  EXPECT_EQ(fs.probs[1], 0.5);
}

TEST(Choice, HandTallyOnTwelveTrials) {
  const std::vector<int> choices{0, 3, 3, 1, 5, 3, 2, 0, 3, 4, 1, 3};
  // surprise 2, fear 2, disgust 1, happiness 5, sadness 1, anger 1
  const auto d = choice_distribution(trials_for("z", choices));
  EXPECT_EQ(d.counts, (ChoiceCounts{2, 2, 1, 5, 1, 1}));
  EXPECT_EQ(d.n, 12);
  EXPECT_DOUBLE_EQ(d.probs[3], 5.0 / 12.0);
  EXPECT_NEAR(std::accumulate(d.probs.begin(), d.probs.end(), 0.0), 1.0, 1e-15);
}

TEST(Choice, SentinelsSkippedAndEmptyRejected) {
  auto t = trials_for("z", {1, 2});
  t.push_back(vt::make_trial("q", 3, "z", 4, 500, true, 4));
  EXPECT_EQ(choice_distribution(t).n, 2);
  EXPECT_EQ(code_of([] { choice_distribution(std::vector<TrialRecord>{}); }), ErrorCode::kEmptyInput);
  EXPECT_EQ(code_of([] { entropy_bits(choice_distribution("a", ChoiceCounts{})); }), ErrorCode::kEmptyInput);
}

TEST(Entropy, KnownValues) {
  EXPECT_EQ(entropy_bits(choice_distribution("a", {0, 0, 7, 0, 0, 0})), 0.0);
  EXPECT_NEAR(entropy_bits(choice_distribution("a", {3, 3, 3, 3, 3, 3})), std::log2(6.0), 1e-12);
  EXPECT_NEAR(entropy_bits(choice_distribution("a", {4, 4, 0, 0, 0, 0})), 1.0, 1e-15);
}

TEST(Entropy, PermutedCountsTieExactly) {
  // Stimuli whose counts are permutations of each other must tie exactly, or
  // Spearman breaks the tie by rounding noise.
  ChoiceCounts c{7, 3, 1, 0, 5, 2};
  const double h = entropy_bits(choice_distribution("a", c));
  std::sort(c.begin(), c.end());
  do {
    EXPECT_EQ(entropy_bits(choice_distribution("a", c)), h);
  } while (std::next_permutation(c.begin(), c.end()));
}

TEST(Entropy, UniformIsTheUniqueGridMaximum) {
  // Every point of the 6-simplex on a 0.05 lattice (counts out of 20).
  const double top = std::log2(6.0);
  double best_other = 0.0;
  int a[6];
  for (a[0] = 0; a[0] <= 20; ++a[0])
    for (a[1] = 0; a[0] + a[1] <= 20; ++a[1])
      for (a[2] = 0; a[0] + a[1] + a[2] <= 20; ++a[2])
        for (a[3] = 0; a[0] + a[1] + a[2] + a[3] <= 20; ++a[3])
          for (a[4] = 0; a[0] + a[1] + a[2] + a[3] + a[4] <= 20; ++a[4]) {
            a[5] = 20 - a[0] - a[1] - a[2] - a[3] - a[4];
            std::vector<double> p(a, a + 6);
            for (double& v : p) v /= 20.0;
            const double h = stats::entropy_bits(p);
            EXPECT_NEAR(h, vt::oracle::entropy_bits(p), 1e-12);
            best_other = std::max(best_other, h);
          }
  // 20 is not divisible by 6, so the lattice never hits uniform exactly.
  EXPECT_LT(best_other, top);
  const std::vector<double> uniform(6, 1.0 / 6.0);
  EXPECT_NEAR(stats::entropy_bits(uniform), top, 1e-12);
  // Perturbing uniform in any direction along the simplex lowers entropy.
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      std::vector<double> p = uniform;
      p[i] += 0.01;
      p[j] -= 0.01;
      EXPECT_LT(stats::entropy_bits(p), top);
    }
}

TEST(Outcome, NineCases) {
  EXPECT_EQ(classify_outcome(0.35, 0.35), Outcome::kSuccess);
  EXPECT_EQ(classify_outcome(0.55, 0.10), Outcome::kBias);
  EXPECT_EQ(classify_outcome(0.30, 0.25), Outcome::kFailure);
  // Exactly on the sum boundary: failure.
  EXPECT_EQ(classify_outcome(0.35, 0.25), Outcome::kFailure);
  EXPECT_EQ(classify_outcome(0.30, 0.30), Outcome::kFailure);
  // Exactly on the min boundary with the sum above 0.6: bias, either order.
  EXPECT_EQ(classify_outcome(0.50, 0.25), Outcome::kBias);
  EXPECT_EQ(classify_outcome(0.25, 0.45), Outcome::kBias);
  EXPECT_EQ(classify_outcome(0.26, 0.35), Outcome::kSuccess);
  EXPECT_EQ(classify_outcome(0.0, 0.0), Outcome::kFailure);
}

TEST(Outcome, ExhaustiveOverGrid) {
  int counts[3] = {0, 0, 0};
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; i + j <= 100; ++j) {
      const double p1 = i / 100.0, p2 = j / 100.0;
      const Outcome o = classify_outcome(p1, p2);
      ++counts[static_cast<int>(o)];
      // Independent restatement of the documented total rule.
      const double sum = p1 + p2, mn = std::min(p1, p2);
      const Outcome expected = sum <= 0.6 + 1e-12   ? Outcome::kFailure
                               : mn <= 0.25 + 1e-12 ? Outcome::kBias
                                                    : Outcome::kSuccess;
      EXPECT_EQ(o, expected) << p1 << " " << p2;
      EXPECT_EQ(classify_outcome(p2, p1), o);
    }
  EXPECT_GT(counts[0], 0);
  EXPECT_GT(counts[1], 0);
  EXPECT_GT(counts[2], 0);
}

TEST(Outcome, FromDistribution) {
  const auto d = choice_distribution("s", {4, 4, 1, 1, 0, 0});
  const GuidanceOutcome g = classify_outcome(d, TargetPair(1, 0));
  EXPECT_EQ(g.outcome, Outcome::kSuccess);
  EXPECT_DOUBLE_EQ(g.p1, 0.4);
  EXPECT_DOUBLE_EQ(g.p2, 0.4);
}

TEST(Rates, AllOneHotIsBias) {
  const Catalog c = vt::make_catalog(30, 0);
  std::vector<TrialRecord> t;
  for (const auto& e : c.entries)
    for (int r = 0; r < 6; ++r) t.push_back(vt::make_trial("p", r, e.stimulus_id, e.pair->e1));
  const OutcomeRates rates = outcome_rates(dataset_from(t), c);
  EXPECT_EQ(rates.stimuli, 30);
  EXPECT_EQ(rates.bias, 1.0);
  EXPECT_EQ(rates.success + rates.failure, 0.0);
}

TEST(Rates, MatchBruteForceRecount) {
  const Catalog c = vt::make_catalog(30, 4);
  Rng rng(17);
  std::vector<TrialRecord> t;
  for (const auto& e : c.entries) {
    const int n = 3 + static_cast<int>(rng() % 10);  // some stimuli fall below 5 responses
    for (int r = 0; r < n; ++r) {
      int choice = static_cast<int>(rng() % 6);
      if (!e.is_sentinel && rng() % 3 != 0) choice = rng() % 2 ? e.pair->e1 : e.pair->e2;
      t.push_back(vt::make_trial("p" + std::to_string(r), r, e.stimulus_id, choice, 600, e.is_sentinel,
                                 e.sentinel_truth.value_or(0)));
    }
  }
  const auto d = dataset_from(t);
  int s = 0, b = 0, f = 0;
  for (const auto& [sid, counts] : d.stimuli) {
    const int n = std::accumulate(counts.begin(), counts.end(), 0);
    if (n < 5) continue;
    const auto& pair = *c.at(sid).pair;
    const double p1 = static_cast<double>(counts[pair.e1]) / n, p2 = static_cast<double>(counts[pair.e2]) / n;
    switch (classify_outcome(p1, p2)) {
      case Outcome::kSuccess: ++s; break;
      case Outcome::kBias: ++b; break;
      case Outcome::kFailure: ++f; break;
    }
  }
  const OutcomeRates r = outcome_rates(d, c);
  const double total = s + b + f;
  EXPECT_EQ(r.stimuli, s + b + f);
  EXPECT_NEAR(r.success, s / total, 1e-12);
  EXPECT_NEAR(r.bias, b / total, 1e-12);
  EXPECT_NEAR(r.success + r.bias + r.failure, 1.0, 1e-12);

  // Permuting the trial order changes nothing.
  std::reverse(t.begin(), t.end());
  const OutcomeRates again = outcome_rates(dataset_from(t), c);
  EXPECT_EQ(again.success, r.success);
  EXPECT_EQ(again.bias, r.bias);
}

TEST(Rates, MissingPairIsError) {
  const Catalog c = vt::make_catalog(3, 0);
  const auto d = dataset_from(trials_for("unknown", {1, 1, 1, 1, 1}));
  EXPECT_EQ(code_of([&] { outcome_rates(d, c); }), ErrorCode::kValidation);
}

TEST(Spearman, IdentityAndReverse) {
  const std::vector<double> x{3, 1, 4, 1.5, 9, 2.6};
  std::vector<double> rev;
  for (double v : x) rev.push_back(-v);
  EXPECT_NEAR(stats::spearman(x, x), 1.0, 1e-15);
  EXPECT_NEAR(stats::spearman(x, rev), -1.0, 1e-15);
}

TEST(Spearman, TiesMatchExplicitSortOracle) {
  const std::vector<double> x{17, 86, 60, 77, 47, 3, 70, 47, 88, 92, 47, 3};
  const std::vector<double> y{70, 29, 85, 61, 80, 34, 60, 31, 73, 66, 31, 70};
  EXPECT_EQ(stats::mid_ranks(x), vt::oracle::mid_ranks(x));
  EXPECT_NEAR(stats::spearman(x, y), vt::oracle::spearman(x, y), 1e-14);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a, b;
    for (int i = 0; i < 40; ++i) a.push_back(static_cast<double>(rng() % 7)), b.push_back(static_cast<double>(rng() % 5));
    EXPECT_NEAR(stats::spearman(a, b), vt::oracle::spearman(a, b), 1e-12);
  }
}

TEST(Spearman, InvariantUnderMonotoneMaps) {
  Rng rng(5);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> x, y, fx, gy;
  for (int i = 0; i < 60; ++i) {
    x.push_back(n(rng));
    y.push_back(x.back() + n(rng));
    fx.push_back(std::exp(x.back()));
    gy.push_back(std::pow(y.back(), 3) + 2);
  }
  EXPECT_NEAR(stats::spearman(x, y), stats::spearman(fx, gy), 1e-12);
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, c{5, 5, 5};
  EXPECT_EQ(code_of([&] { stats::spearman(a, b); }), ErrorCode::kInputShape);
  EXPECT_EQ(code_of([&] { stats::spearman(b, b); }), ErrorCode::kInputShape);
  EXPECT_EQ(code_of([&] { stats::spearman(a, c); }), ErrorCode::kUndefinedCorrelation);
}

TEST(Rt, SummaryCases) {
  const auto one = rt_summary(trials_for("a", {1}, 700));
  EXPECT_EQ(one.median, 700);
  EXPECT_EQ(one.p05, 700);
  EXPECT_EQ(one.p95, 700);
  EXPECT_EQ(one.mean, 700.0);
  std::vector<TrialRecord> three;
  for (int rt : {900, 500, 700}) three.push_back(vt::make_trial("p", 0, "s", 1, rt));
  EXPECT_EQ(rt_summary(three).median, 700);
  EXPECT_EQ(code_of([] { rt_summary(std::vector<TrialRecord>{}); }), ErrorCode::kEmptyInput);
}

TEST(Rt, MatchesSortOracle) {
  Rng rng(8);
  std::vector<TrialRecord> t;
  std::vector<double> rts;
  for (int i = 0; i < 1000; ++i) {
    const int rt = 300 + static_cast<int>(rng() % 1500);
    t.push_back(vt::make_trial("p", i, "s", 0, rt));
    rts.push_back(rt);
  }
  const RtSummary s = rt_summary(t);
  EXPECT_EQ(s.median, vt::oracle::nearest_rank(rts, 50));
  EXPECT_EQ(s.p05, vt::oracle::nearest_rank(rts, 5));
  EXPECT_EQ(s.p95, vt::oracle::nearest_rank(rts, 95));
  EXPECT_NEAR(s.mean, std::accumulate(rts.begin(), rts.end(), 0.0) / 1000.0, 1e-9);
  EXPECT_EQ(s.n, 1000);
}

TEST(EntropyRt, MonotoneFixtureGivesOne) {
  std::vector<TrialRecord> t;
  const std::vector<std::vector<int>> choices{{0, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 1}, {0, 1, 2, 3}};
  for (int s = 0; s < 4; ++s)
    for (int c : choices[s]) t.push_back(vt::make_trial("p", 0, "st" + std::to_string(s), c, 500 + 100 * s));
  EXPECT_NEAR(entropy_rt_correlation(dataset_from(t)), 1.0, 1e-12);
}

TEST(EntropyRt, ConstantRtIsUndefined) {
  std::vector<TrialRecord> t;
  for (int s = 0; s < 5; ++s)
    for (int r = 0; r <= s; ++r) t.push_back(vt::make_trial("p", 0, "st" + std::to_string(s), r, 640));
  EXPECT_EQ(code_of([&] { entropy_rt_correlation(dataset_from(t)); }), ErrorCode::kUndefinedCorrelation);
}

TEST(EntropyRt, TooFewStimuli) {
  const auto t = trials_for("one", {1, 2, 3});
  EXPECT_EQ(code_of([&] { entropy_rt_correlation(dataset_from(t)); }), ErrorCode::kInsufficientData);
}

TEST(Report, EmptyDatasetWarns) {
  const AnalysisReport r = analyze(VarEmotionDataset{}, vt::make_catalog(3, 1));
  EXPECT_TRUE(r.rows.empty());
  ASSERT_FALSE(r.warnings.empty());
  const Json j = summary_json(r);
  EXPECT_TRUE(j.contains("warnings"));
}

TEST(Report, CsvHasOneRowPerStimulus) {
  const Catalog c = vt::make_catalog(15, 2);
  std::vector<TrialRecord> t;
  for (const auto& e : c.entries)
    for (int r = 0; r < 6; ++r)
      t.push_back(vt::make_trial("p", r, e.stimulus_id, r % 3, 600 + 10 * r, e.is_sentinel,
                                 e.sentinel_truth.value_or(0)));
  const AnalysisReport rep = analyze(dataset_from(t), c);
  const std::string csv = stimuli_csv(rep);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 1 + 15 + 2);  // header, boundary stimuli, sentinels
  EXPECT_EQ(csv.rfind("stimulus_id,pair,n,p_surprise,p_fear,p_disgust,p_happiness,p_sadness,p_anger,entropy_bits,outcome", 0),
            0u);
  EXPECT_TRUE(rep.mean_sentinel_entropy.has_value());
}
