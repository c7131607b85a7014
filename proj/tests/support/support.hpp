#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "varlab/catalog.hpp"
#include "varlab/experiment.hpp"

namespace varlab::testing {

// n boundary stimuli (pairs cycling through all 15) and m sentinels with
// readable ids "b000".., "s000"...
inline Catalog make_catalog(int boundary, int sentinels, int dim = 8, std::uint64_t seed = 1) {
  Catalog c;
  Rng rng(seed);
  const auto pairs = all_pairs();
  for (int i = 0; i < boundary; ++i) {
    CatalogEntry e;
    char id[16];
    std::snprintf(id, sizeof id, "b%03d", i);
    e.stimulus_id = id;
    e.embedding = standard_normal(rng, dim);
    e.pair = pairs[static_cast<std::size_t>(i) % pairs.size()];
    e.source_id = "cand-" + std::to_string(i);
    c.add(std::move(e));
  }
  for (int i = 0; i < sentinels; ++i) {
    CatalogEntry e;
    char id[16];
    std::snprintf(id, sizeof id, "s%03d", i);
    e.stimulus_id = id;
    e.embedding = Embedding::Zero(dim);
    e.embedding[i % dim] = 4.0;
    e.is_sentinel = true;
    e.sentinel_truth = i % kNumEmotions;
    c.add(std::move(e));
  }
  return c;
}

inline TrialRecord make_trial(const std::string& participant, int index, const std::string& stimulus,
                              int choice, int rt_ms = 700, bool sentinel = false, int truth = 0) {
  TrialRecord r;
  r.participant_id = participant;
  r.session_id = "sess-" + participant;
  r.trial_index = index;
  r.stimulus_id = stimulus;
  r.choice = choice;
  r.rt_ms = rt_ms;
  r.is_sentinel = sentinel;
  if (sentinel) r.sentinel_truth = truth;
  return r;
}

// 10 sentinel trials with `correct` of them answered correctly, followed by
// the given boundary trials.
inline std::vector<TrialRecord> participant_trials(const std::string& pid, int correct,
                                                   const std::vector<std::pair<std::string, int>>& boundary) {
  std::vector<TrialRecord> out;
  int idx = 0;
  for (int i = 0; i < 10; ++i) {
    const int truth = i % kNumEmotions;
    out.push_back(make_trial(pid, idx++, "s" + std::to_string(i), i < correct ? truth : (truth + 1) % 6, 600,
                             true, truth));
  }
  for (const auto& [sid, choice] : boundary) out.push_back(make_trial(pid, idx++, sid, choice));
  return out;
}

}  // namespace varlab::testing
