#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "varlab/catalog.hpp"

namespace varlab {

inline constexpr int kTrialsPerSession = 400;
inline constexpr int kSentinelTrials = 10;
inline constexpr int kRandomTrials = kTrialsPerSession - kSentinelTrials;
inline constexpr int kFixationMs = 300;
inline constexpr int kStimulusMs = 200;
// Retain a participant only when sentinel accuracy is strictly above this.
inline constexpr double kSentinelAccuracyThreshold = 0.7;

struct PlannedTrial {
  std::string stimulus_id;
  bool is_sentinel = false;
  std::optional<int> sentinel_truth;
};

// 390 boundary stimuli drawn without replacement, with 10 distinct sentinels
// dropped into 10 uniformly chosen positions. Throws kCapacity when the
// catalog is too small.
std::vector<PlannedTrial> build_trial_plan(const Catalog& catalog, std::uint64_t seed);

struct Session {
  std::string session_id;
  std::string participant_id;
  std::vector<PlannedTrial> trial_plan;
  int next_index = 0;
  std::int64_t created_at_ms = 0;
  std::uint64_t seed = 0;

  bool complete() const { return next_index >= static_cast<int>(trial_plan.size()); }
};

Session create_session(const std::string& participant_id, const Catalog& catalog,
                       std::uint64_t seed);

// What a client sees for one trial. Sentinel status is never included.
struct TrialDescriptor {
  int trial_index = 0;
  std::string stimulus_id;
  std::string stimulus_uri;
  int fixation_ms = kFixationMs;
  int stimulus_ms = kStimulusMs;
};

Json to_json(const TrialDescriptor& d);
TrialDescriptor trial_descriptor_from_json(const Json& j);

struct TrialRecord {
  std::string participant_id;
  std::string session_id;
  int trial_index = 0;
  std::string stimulus_id;
  int choice = 0;
  int rt_ms = 1;
  bool is_sentinel = false;
  std::optional<int> sentinel_truth;
  std::int64_t timestamp_ms = 0;

  void validate() const;
};

Json to_json(const TrialRecord& r);
TrialRecord trial_record_from_json(const Json& j);

struct SessionEvent {
  std::string session_id;
  std::string participant_id;
  std::uint64_t seed = 0;
  std::int64_t created_at_ms = 0;
};

Json to_json(const SessionEvent& e);
SessionEvent session_event_from_json(const Json& j);

inline constexpr const char* kResponsesFile = "responses.jsonl";
inline constexpr const char* kSessionsFile = "sessions.jsonl";

// Append-only JSONL persistence. Each append is a single write of one full
// line; a torn trailing line left by a crash is dropped on open.
class ResponseStore {
 public:
  ResponseStore(const std::filesystem::path& dir, bool sync_writes);
  ~ResponseStore();
  ResponseStore(const ResponseStore&) = delete;
  ResponseStore& operator=(const ResponseStore&) = delete;

  void append_session(const SessionEvent& event);
  void append_trial(const TrialRecord& record);

  const std::vector<SessionEvent>& sessions() const { return sessions_; }
  const std::vector<TrialRecord>& trials() const { return trials_; }

 private:
  int open_log(const std::filesystem::path& path);
  void append_line(int fd, const std::string& line);

  bool sync_writes_;
  int sessions_fd_ = -1;
  int responses_fd_ = -1;
  std::vector<SessionEvent> sessions_;
  std::vector<TrialRecord> trials_;
};

// Reads a responses.jsonl store without opening it for writing.
std::vector<TrialRecord> read_trial_records(const std::filesystem::path& responses_file);

struct SessionInfo {
  std::string session_id;
  int total_trials = kTrialsPerSession;
};

struct ServiceOptions {
  std::uint64_t seed = 0;
  bool sync_writes = true;
  std::function<std::int64_t()> clock;  // defaults to wall-clock milliseconds
};

// Session bookkeeping on top of the store. Sessions are independent; calls on
// one session are serialized, appends are totally ordered.
class ExperimentService {
 public:
  ExperimentService(Catalog catalog, const std::filesystem::path& store_dir, ServiceOptions options);

  SessionInfo create_session(const std::string& participant_id);
  // std::nullopt once all trials of the session have responses.
  std::optional<TrialDescriptor> next_trial(const std::string& session_id) const;
  void record_response(const std::string& session_id, int trial_index, int choice, int rt_ms);

  const Catalog& catalog() const { return catalog_; }
  std::optional<Session> session(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;
  std::vector<TrialRecord> records() const;

 private:
  struct SessionSlot {
    Session session;
    mutable std::mutex mutex;
  };

  SessionSlot& slot(const std::string& session_id) const;
  void replay();

  Catalog catalog_;
  ServiceOptions options_;
  ResponseStore store_;
  mutable std::mutex store_mutex_;
  mutable std::shared_mutex sessions_mutex_;
  std::unordered_map<std::string, std::unique_ptr<SessionSlot>> sessions_;
  std::vector<std::string> order_;
};

struct QcResult {
  bool retain = false;
  double sentinel_accuracy = 0.0;
  int sentinel_total = 0;
  int sentinel_correct = 0;
};

// retain iff correct / total > 0.7 over the participant's sentinel trials.
// Throws kInsufficientData when there are none.
QcResult qc_participant(std::span<const TrialRecord> records);

enum class Granularity { kGroup, kIndividual };

const char* to_string(Granularity g);
Granularity granularity_from_string(const std::string& s);

struct ParticipantSummary {
  std::string participant_id;
  QcResult qc;
};

using ChoiceCounts = std::array<int, kNumEmotions>;

struct VarEmotionDataset {
  Granularity granularity = Granularity::kGroup;
  std::optional<std::string> participant;
  // Non-sentinel choice counts per stimulus.
  std::map<std::string, ChoiceCounts> stimuli;
  // Every trial of the retained participants, sentinels included.
  std::vector<TrialRecord> trials;
  std::vector<ParticipantSummary> participants;

  std::size_t non_sentinel_trials() const;
};

Json to_json(const VarEmotionDataset& d);
VarEmotionDataset var_emotion_from_json(const Json& j);

struct ExportResult {
  std::vector<VarEmotionDataset> datasets;  // one for group, one per participant otherwise
  std::vector<ParticipantSummary> all_participants;  // retained and dropped
  std::vector<std::string> warnings;
};

ExportResult export_dataset(std::span<const TrialRecord> records, Granularity granularity);

}  // namespace varlab
