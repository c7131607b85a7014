#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "varlab/alignment.hpp"
#include "varlab/analysis.hpp"
#include "varlab/diffusion.hpp"
#include "varlab/http_service.hpp"
#include "varlab/observer.hpp"

namespace varlab {

// Everything a pipeline run depends on. Written once by init-domain as
// config.json; every later command reads it back, and its hash tags every
// artifact.
struct RunConfig {
  std::uint64_t seed = 42;
  int dim = 8;
  double mean_distance = 4.0;
  std::size_t n_train = 10000;
  std::size_t n_test = 2000;
  TrainingConfig classifier;
  double percentile = 75.0;
  int steps = kDefaultSteps;
  double beta_min = kDefaultBetaMin;
  double beta_max = kDefaultBetaMax;
  DenoiserConfig denoiser;
  double gamma = 0.5;
  GenerationMode mode = GenerationMode::kEdit;
  int t_start = -1;
  int candidates_per_pair = 400;
  std::vector<TargetPair> pairs = all_pairs();
  int sentinels_per_class = 3;
  int port = 8080;
  int cohort_size = 20;
  ObserverSpec observer;  // template for the default cohort
  FinetuneConfig finetune;

  // Sub-seeds derived from `seed`.
  static RunConfig with_seed(std::uint64_t seed);
  void validate() const;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);

// Artifact names relative to the data directory.
namespace paths {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kDomain = "domain.json";
inline constexpr const char* kBaseTrain = "base_train.jsonl";
inline constexpr const char* kBaseTest = "base_test.jsonl";
inline constexpr const char* kClassifier = "classifier.json";
inline constexpr const char* kThresholds = "thresholds.json";
inline constexpr const char* kDenoiser = "denoiser.json";
inline constexpr const char* kCandidates = "candidates.jsonl";
inline constexpr const char* kCatalog = "catalog.jsonl";
inline constexpr const char* kGlyphs = "glyphs";
inline constexpr const char* kCohort = "cohort.json";
inline constexpr const char* kGroupExport = "export/varemotion.json";
inline constexpr const char* kIndividualExportDir = "export/varemotion_i";
inline constexpr const char* kParticipants = "export/participants.json";
inline constexpr const char* kSplits = "splits.json";
inline constexpr const char* kGroupNet = "models/groupnet.json";
inline constexpr const char* kAnalysisCsv = "analysis/stimuli.csv";
inline constexpr const char* kAnalysisSummary = "analysis/summary.json";
inline constexpr const char* kReportJson = "report/alignment.json";
inline constexpr const char* kReportAccuracy = "report/accuracy.csv";
inline constexpr const char* kReportParticipants = "report/participants.csv";
inline constexpr const char* kLock = ".varlab.lock";
std::string indivnet(const std::string& participant);
}  // namespace paths

// A data directory held under an exclusive flock for the object's lifetime.
class Workspace {
 public:
  // Throws kLocked when another process holds the directory.
  explicit Workspace(std::filesystem::path dir);
  ~Workspace();
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path file(const std::string& rel) const { return dir_ / rel; }
  // kDependency naming the file and the command that produces it.
  std::filesystem::path need(const std::string& rel, const char* producer) const;

  const RunConfig& config();
  void reload_config() { config_.reset(); }
  std::string config_hash();

  void warn(std::string message) { warnings_.push_back(std::move(message)); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void clear_warnings() { warnings_.clear(); }

 private:
  std::filesystem::path dir_;
  int lock_fd_ = -1;
  std::optional<RunConfig> config_;
  std::string config_hash_;
  std::vector<std::string> warnings_;
};

// Writes manifests/<name>.json with the config hash, seed, options, output
// file digests and metrics. Contains nothing run-specific beyond those, so
// reruns are byte-identical.
void write_manifest(Workspace& ws, const std::string& name, const Json& options,
                    const std::vector<std::string>& outputs, const Json& metrics);

struct InitOptions {
  std::uint64_t seed = 42;
  std::optional<std::filesystem::path> config_file;  // full RunConfig JSON
};

struct GenerateOptions {
  std::optional<TargetPair> pair;
  std::optional<int> n;
  std::optional<double> gamma;
  std::optional<GenerationMode> mode;
};

struct SimulateOptions {
  std::optional<std::filesystem::path> cohort_file;
  std::optional<int> count;
};

struct FinetuneOptions {
  Granularity level = Granularity::kGroup;
  std::optional<std::string> participant;
};

void cmd_init_domain(Workspace& ws, const InitOptions& opts);
void cmd_train_classifier(Workspace& ws);
void cmd_train_denoiser(Workspace& ws);
void cmd_generate(Workspace& ws, const GenerateOptions& opts);
void cmd_filter(Workspace& ws);
CohortRun cmd_simulate(Workspace& ws, const SimulateOptions& opts);
void cmd_export(Workspace& ws, Granularity granularity);
void cmd_finetune(Workspace& ws, const FinetuneOptions& opts);
void cmd_analyze(Workspace& ws);
void cmd_report(Workspace& ws, bool force);

// A live service over the workspace catalog and store.
class ServiceHost {
 public:
  ServiceHost(Workspace& ws, const std::string& host, int port, bool sync_writes,
              std::function<std::int64_t()> clock = {});
  ~ServiceHost();

  int port() const { return port_; }
  ExperimentService& service() { return *service_; }

 private:
  std::unique_ptr<ExperimentService> service_;
  std::unique_ptr<HttpService> http_;
  int port_ = 0;
};

}  // namespace varlab
