#include "varlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

#include "varlab/error.hpp"

namespace varlab {

std::vector<PlannedTrial> build_trial_plan(const Catalog& catalog, std::uint64_t seed) {
  const auto boundary = catalog.boundary();
  const auto sentinels = catalog.sentinels();
  require(boundary.size() >= static_cast<std::size_t>(kRandomTrials), ErrorCode::kCapacity,
          "catalog has " + std::to_string(boundary.size()) + " boundary stimuli; a session needs " +
              std::to_string(kRandomTrials));
  require(sentinels.size() >= static_cast<std::size_t>(kSentinelTrials), ErrorCode::kCapacity,
          "catalog has " + std::to_string(sentinels.size()) + " sentinel stimuli; a session needs " +
              std::to_string(kSentinelTrials));

  Rng rng(seed);
  std::vector<std::size_t> boundary_order(boundary.size());
  std::iota(boundary_order.begin(), boundary_order.end(), std::size_t{0});
  std::shuffle(boundary_order.begin(), boundary_order.end(), rng);

  std::vector<int> positions(kTrialsPerSession);
  std::iota(positions.begin(), positions.end(), 0);
  std::shuffle(positions.begin(), positions.end(), rng);
  std::vector<bool> is_sentinel_slot(kTrialsPerSession, false);
  for (int i = 0; i < kSentinelTrials; ++i) is_sentinel_slot[static_cast<std::size_t>(positions[i])] = true;

  std::vector<std::size_t> sentinel_order(sentinels.size());
  std::iota(sentinel_order.begin(), sentinel_order.end(), std::size_t{0});
  std::shuffle(sentinel_order.begin(), sentinel_order.end(), rng);

  std::vector<PlannedTrial> plan;
  plan.reserve(kTrialsPerSession);
  std::size_t next_boundary = 0;
  std::size_t next_sentinel = 0;
  for (int pos = 0; pos < kTrialsPerSession; ++pos) {
    PlannedTrial t;
    if (is_sentinel_slot[static_cast<std::size_t>(pos)]) {
      const CatalogEntry* e = sentinels[sentinel_order[next_sentinel++]];
      t.stimulus_id = e->stimulus_id;
      t.is_sentinel = true;
      t.sentinel_truth = e->sentinel_truth;
    } else {
      t.stimulus_id = boundary[boundary_order[next_boundary++]]->stimulus_id;
    }
    plan.push_back(std::move(t));
  }
  return plan;
}

Session create_session(const std::string& participant_id, const Catalog& catalog,
                       std::uint64_t seed) {
  require(!participant_id.empty(), ErrorCode::kValidation, "participant_id must be nonempty");
  Session s;
  s.participant_id = participant_id;
  s.seed = seed;
  s.trial_plan = build_trial_plan(catalog, seed);
  return s;
}

Json to_json(const TrialDescriptor& d) {
  Json choices = Json::array();
  for (auto name : kEmotionNames) choices.push_back(std::string(name));
  return Json{{"trial_index", d.trial_index},
              {"stimulus_id", d.stimulus_id},
              {"stimulus_uri", d.stimulus_uri},
              {"fixation_ms", d.fixation_ms},
              {"stimulus_ms", d.stimulus_ms},
              {"choices", std::move(choices)}};
}

TrialDescriptor trial_descriptor_from_json(const Json& j) {
  TrialDescriptor d;
  d.trial_index = j.at("trial_index").get<int>();
  d.stimulus_id = j.at("stimulus_id").get<std::string>();
  d.stimulus_uri = j.value("stimulus_uri", std::string());
  d.fixation_ms = j.value("fixation_ms", kFixationMs);
  d.stimulus_ms = j.value("stimulus_ms", kStimulusMs);
  return d;
}

void TrialRecord::validate() const {
  require(choice >= 0 && choice < kNumEmotions, ErrorCode::kValidation,
          "choice " + std::to_string(choice) + " outside 0..5");
  require(rt_ms > 0, ErrorCode::kValidation, "rt_ms must be positive");
  require(is_sentinel == sentinel_truth.has_value(), ErrorCode::kValidation,
          "sentinel_truth must be present iff is_sentinel");
}

Json to_json(const TrialRecord& r) {
  return Json{{"participant_id", r.participant_id},
              {"session_id", r.session_id},
              {"trial_index", r.trial_index},
              {"stimulus_id", r.stimulus_id},
              {"choice", r.choice},
              {"rt_ms", r.rt_ms},
              {"is_sentinel", r.is_sentinel},
              {"sentinel_truth", r.sentinel_truth ? Json(*r.sentinel_truth) : Json(nullptr)},
              {"timestamp_ms", r.timestamp_ms}};
}

TrialRecord trial_record_from_json(const Json& j) {
  TrialRecord r;
  try {
    r.participant_id = j.at("participant_id").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.trial_index = j.at("trial_index").get<int>();
    r.stimulus_id = j.at("stimulus_id").get<std::string>();
    r.choice = j.at("choice").get<int>();
    r.rt_ms = j.at("rt_ms").get<int>();
    r.is_sentinel = j.at("is_sentinel").get<bool>();
    if (j.contains("sentinel_truth") && !j["sentinel_truth"].is_null())
      r.sentinel_truth = j["sentinel_truth"].get<int>();
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed trial record: ") + e.what());
  }
  r.validate();
  return r;
}

Json to_json(const SessionEvent& e) {
  return Json{{"session_id", e.session_id},
              {"participant_id", e.participant_id},
              {"seed", e.seed},
              {"created_at_ms", e.created_at_ms}};
}

SessionEvent session_event_from_json(const Json& j) {
  SessionEvent e;
  try {
    e.session_id = j.at("session_id").get<std::string>();
    e.participant_id = j.at("participant_id").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.created_at_ms = j.value("created_at_ms", std::int64_t{0});
  } catch (const Json::exception& ex) {
    fail(ErrorCode::kValidation, std::string("malformed session event: ") + ex.what());
  }
  return e;
}

ExperimentService::ExperimentService(Catalog catalog, const std::filesystem::path& store_dir,
                                     ServiceOptions options)
    : catalog_(std::move(catalog)),
      options_(std::move(options)),
      store_(store_dir, options_.sync_writes) {
  if (!options_.clock) {
    options_.clock = [] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
  }
  replay();
}

void ExperimentService::replay() {
  for (const auto& event : store_.sessions()) {
    auto slot = std::make_unique<SessionSlot>();
    slot->session = varlab::create_session(event.participant_id, catalog_, event.seed);
    slot->session.session_id = event.session_id;
    slot->session.created_at_ms = event.created_at_ms;
    order_.push_back(event.session_id);
    sessions_.emplace(event.session_id, std::move(slot));
  }
  for (const auto& rec : store_.trials()) {
    const auto it = sessions_.find(rec.session_id);
    require(it != sessions_.end(), ErrorCode::kValidation,
            "store references unknown session " + rec.session_id);
    Session& s = it->second->session;
    require(rec.trial_index == s.next_index && !s.complete(), ErrorCode::kValidation,
            "store has a gap or duplicate at " + rec.session_id + "#" +
                std::to_string(rec.trial_index));
    require(s.trial_plan[static_cast<std::size_t>(rec.trial_index)].stimulus_id == rec.stimulus_id,
            ErrorCode::kValidation,
            "store record does not match the replayed plan at " + rec.session_id);
    s.next_index += 1;
  }
}

ExperimentService::SessionSlot& ExperimentService::slot(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session " + session_id);
  return *it->second;
}

SessionInfo ExperimentService::create_session(const std::string& participant_id) {
  require(!participant_id.empty(), ErrorCode::kValidation, "participant_id must be nonempty");
  std::unique_lock lock(sessions_mutex_);
  const std::size_t ordinal = order_.size();
  char id[32];
  std::snprintf(id, sizeof id, "sess-%06zu", ordinal + 1);

  auto slot = std::make_unique<SessionSlot>();
  slot->session = varlab::create_session(participant_id, catalog_, mix_seed(options_.seed, ordinal));
  slot->session.session_id = id;
  slot->session.created_at_ms = options_.clock();
  {
    std::lock_guard store_lock(store_mutex_);
    store_.append_session({id, participant_id, slot->session.seed, slot->session.created_at_ms});
  }
  order_.push_back(id);
  sessions_.emplace(id, std::move(slot));
  return {id, kTrialsPerSession};
}

std::optional<TrialDescriptor> ExperimentService::next_trial(const std::string& session_id) const {
  SessionSlot& s = slot(session_id);
  std::lock_guard lock(s.mutex);
  if (s.session.complete()) return std::nullopt;
  TrialDescriptor d;
  d.trial_index = s.session.next_index;
  d.stimulus_id = s.session.trial_plan[static_cast<std::size_t>(d.trial_index)].stimulus_id;
  d.stimulus_uri = "/api/stimuli/" + d.stimulus_id + ".svg";
  return d;
}

void ExperimentService::record_response(const std::string& session_id, int trial_index, int choice,
                                        int rt_ms) {
  SessionSlot& s = slot(session_id);
  std::lock_guard lock(s.mutex);
  require(choice >= 0 && choice < kNumEmotions, ErrorCode::kValidation,
          "choice " + std::to_string(choice) + " outside 0..5");
  require(rt_ms > 0, ErrorCode::kValidation, "rt_ms must be positive");
  if (s.session.complete()) {
    fail(ErrorCode::kSequencing, "session " + session_id + " is already complete");
  }
  if (trial_index != s.session.next_index) {
    fail(ErrorCode::kSequencing, "expected a response to trial " +
                                     std::to_string(s.session.next_index) + ", got " +
                                     std::to_string(trial_index));
  }
  const PlannedTrial& planned = s.session.trial_plan[static_cast<std::size_t>(trial_index)];
  TrialRecord rec;
  rec.participant_id = s.session.participant_id;
  rec.session_id = session_id;
  rec.trial_index = trial_index;
  rec.stimulus_id = planned.stimulus_id;
  rec.choice = choice;
  rec.rt_ms = rt_ms;
  rec.is_sentinel = planned.is_sentinel;
  rec.sentinel_truth = planned.sentinel_truth;
  rec.timestamp_ms = options_.clock();
  {
    std::lock_guard store_lock(store_mutex_);
    store_.append_trial(rec);
  }
  s.session.next_index += 1;
}

std::optional<Session> ExperimentService::session(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  std::lock_guard slot_lock(it->second->mutex);
  return it->second->session;
}

std::vector<std::string> ExperimentService::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  return order_;
}

std::vector<TrialRecord> ExperimentService::records() const {
  std::lock_guard lock(store_mutex_);
  return store_.trials();
}

QcResult qc_participant(std::span<const TrialRecord> records) {
  QcResult r;
  for (const auto& rec : records) {
    if (!rec.is_sentinel) continue;
    ++r.sentinel_total;
    if (rec.sentinel_truth && *rec.sentinel_truth == rec.choice) ++r.sentinel_correct;
  }
  require(r.sentinel_total > 0, ErrorCode::kInsufficientData,
          "participant has no sentinel trials to score");
  r.sentinel_accuracy = static_cast<double>(r.sentinel_correct) / r.sentinel_total;
  r.retain = r.sentinel_accuracy > kSentinelAccuracyThreshold;
  return r;
}

const char* to_string(Granularity g) { return g == Granularity::kGroup ? "group" : "individual"; }

Granularity granularity_from_string(const std::string& s) {
  if (s == "group") return Granularity::kGroup;
  if (s == "individual") return Granularity::kIndividual;
  fail(ErrorCode::kUsage, "unknown granularity '" + s + "' (expected group or individual)");
}

std::size_t VarEmotionDataset::non_sentinel_trials() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const TrialRecord& t) { return !t.is_sentinel; }));
}

Json to_json(const VarEmotionDataset& d) {
  Json stimuli = Json::object();
  for (const auto& [id, counts] : d.stimuli) stimuli[id] = counts;
  Json participants = Json::array();
  for (const auto& p : d.participants) {
    participants.push_back(Json{{"participant_id", p.participant_id},
                                {"sentinel_accuracy", p.qc.sentinel_accuracy},
                                {"sentinel_correct", p.qc.sentinel_correct},
                                {"sentinel_total", p.qc.sentinel_total}});
  }
  Json trials = Json::array();
  for (const auto& t : d.trials) trials.push_back(to_json(t));
  return Json{{"granularity", to_string(d.granularity)},
              {"participant", d.participant ? Json(*d.participant) : Json(nullptr)},
              {"stimuli", std::move(stimuli)},
              {"participants", std::move(participants)},
              {"trials", std::move(trials)}};
}

VarEmotionDataset var_emotion_from_json(const Json& j) {
  VarEmotionDataset d;
  try {
    d.granularity = granularity_from_string(j.at("granularity").get<std::string>());
    if (j.contains("participant") && !j["participant"].is_null())
      d.participant = j["participant"].get<std::string>();
    for (const auto& [id, counts] : j.at("stimuli").items())
      d.stimuli[id] = counts.get<ChoiceCounts>();
    for (const auto& p : j.at("participants")) {
      ParticipantSummary s;
      s.participant_id = p.at("participant_id").get<std::string>();
      s.qc.sentinel_accuracy = p.at("sentinel_accuracy").get<double>();
      s.qc.sentinel_correct = p.value("sentinel_correct", 0);
      s.qc.sentinel_total = p.value("sentinel_total", 0);
      s.qc.retain = true;
      d.participants.push_back(std::move(s));
    }
    for (const auto& t : j.at("trials")) d.trials.push_back(trial_record_from_json(t));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed varEmotion dataset: ") + e.what());
  }
  return d;
}

namespace {

void add_trials(VarEmotionDataset& d, std::span<const TrialRecord* const> trials) {
  for (const TrialRecord* t : trials) {
    d.trials.push_back(*t);
    if (!t->is_sentinel) d.stimuli[t->stimulus_id][static_cast<std::size_t>(t->choice)] += 1;
  }
}

}  // namespace

ExportResult export_dataset(std::span<const TrialRecord> records, Granularity granularity) {
  // Participants in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TrialRecord*>> by_participant;
  for (const auto& r : records) {
    auto& bucket = by_participant[r.participant_id];
    if (bucket.empty()) order.push_back(r.participant_id);
    bucket.push_back(&r);
  }

  ExportResult result;
  std::vector<ParticipantSummary> retained;
  for (const auto& pid : order) {
    std::vector<TrialRecord> own;
    for (const TrialRecord* r : by_participant[pid]) own.push_back(*r);
    ParticipantSummary summary{pid, {}};
    try {
      summary.qc = qc_participant(own);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientData) throw;
      result.warnings.push_back("participant " + pid + " has no sentinel trials; dropped");
    }
    result.all_participants.push_back(summary);
    if (summary.qc.retain) retained.push_back(summary);
  }
  if (retained.empty()) result.warnings.push_back("no participants passed sentinel QC; export is empty");

  if (granularity == Granularity::kGroup) {
    VarEmotionDataset d;
    d.granularity = Granularity::kGroup;
    d.participants = retained;
    for (const auto& p : retained) add_trials(d, by_participant[p.participant_id]);
    result.datasets.push_back(std::move(d));
  } else {
    for (const auto& p : retained) {
      VarEmotionDataset d;
      d.granularity = Granularity::kIndividual;
      d.participant = p.participant_id;
      d.participants = {p};
      add_trials(d, by_participant[p.participant_id]);
      result.datasets.push_back(std::move(d));
    }
  }
  return result;
}

}  // namespace varlab
