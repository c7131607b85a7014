#include "varlab/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <set>

#include "varlab/catalog.hpp"
#include "varlab/error.hpp"
#include "varlab/experiment_client.hpp"
#include "varlab/glyph.hpp"

namespace varlab {

namespace fs = std::filesystem;

namespace {

// Sub-seed streams of the run seed.
enum Stream : std::uint64_t {
  kTrainSample = 1,
  kTestSample,
  kClassifierSeed,
  kDenoiserSeed,
  kGenerationSeed,
  kSentinelSeed,
  kCatalogSeed,
  kServiceSeed,
  kCohortSeed,
  kRunSeed,
  kSplitSeed,
  kFinetuneSeed,
  kIndividualSeed,
  kDomainSeed,
};

constexpr int kGlyphSize = 256;

}  // namespace

std::string paths::indivnet(const std::string& participant) {
  return "models/indivnet_" + participant + ".json";
}

RunConfig RunConfig::with_seed(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.classifier.seed = mix_seed(seed, kClassifierSeed);
  c.denoiser.seed = mix_seed(seed, kDenoiserSeed);
  c.finetune.seed = mix_seed(seed, kFinetuneSeed);
  c.observer.observer_id = "template";
  return c;
}

void RunConfig::validate() const {
  require(dim >= kNumEmotions, ErrorCode::kConfig, "dim must be at least 6");
  require(mean_distance > 0, ErrorCode::kConfig, "mean_distance must be positive");
  require(n_train > 0 && n_test > 0, ErrorCode::kConfig, "sample counts must be positive");
  require(percentile >= 0 && percentile <= 100, ErrorCode::kConfig, "percentile outside [0, 100]");
  require(steps >= 1 && beta_min > 0 && beta_max < 1 && beta_min <= beta_max, ErrorCode::kConfig,
          "invalid noise schedule");
  require(gamma >= 0, ErrorCode::kConfig, "gamma must be nonnegative");
  require(t_start <= steps, ErrorCode::kConfig, "t_start beyond the schedule");
  require(candidates_per_pair > 0, ErrorCode::kConfig, "candidates_per_pair must be positive");
  require(!pairs.empty(), ErrorCode::kConfig, "at least one target pair is required");
  require(sentinels_per_class >= 1, ErrorCode::kConfig, "sentinels_per_class must be positive");
  require(port >= 0 && port < 65536, ErrorCode::kConfig, "port out of range");
  require(cohort_size >= 1, ErrorCode::kConfig, "cohort_size must be positive");
  observer.validate();
  finetune.ratio.validate();
}

Json to_json(const RunConfig& c) {
  Json pairs = Json::array();
  for (const auto& p : c.pairs) pairs.push_back({p.e1, p.e2});
  return {{"seed", c.seed},
          {"domain", {{"dim", c.dim}, {"mean_distance", c.mean_distance}}},
          {"n_train", c.n_train},
          {"n_test", c.n_test},
          {"classifier", to_json(c.classifier)},
          {"percentile", c.percentile},
          {"schedule", {{"steps", c.steps}, {"beta_min", c.beta_min}, {"beta_max", c.beta_max}}},
          {"denoiser", to_json(c.denoiser)},
          {"generation",
           {{"gamma", c.gamma},
            {"mode", to_string(c.mode)},
            {"t_start", c.t_start},
            {"candidates_per_pair", c.candidates_per_pair},
            {"pairs", pairs}}},
          {"sentinels_per_class", c.sentinels_per_class},
          {"port", c.port},
          {"cohort", {{"size", c.cohort_size}, {"observer", to_json(c.observer)}}},
          {"finetune", to_json(c.finetune)}};
}

RunConfig run_config_from_json(const Json& j) {
  try {
    RunConfig c = RunConfig::with_seed(j.value("seed", std::uint64_t{42}));
    if (j.contains("domain")) {
      c.dim = j["domain"].value("dim", c.dim);
      c.mean_distance = j["domain"].value("mean_distance", c.mean_distance);
    }
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    if (j.contains("classifier")) c.classifier = training_config_from_json(j["classifier"]);
    c.percentile = j.value("percentile", c.percentile);
    if (j.contains("schedule")) {
      c.steps = j["schedule"].value("steps", c.steps);
      c.beta_min = j["schedule"].value("beta_min", c.beta_min);
      c.beta_max = j["schedule"].value("beta_max", c.beta_max);
    }
    if (j.contains("denoiser")) c.denoiser = denoiser_config_from_json(j["denoiser"]);
    if (j.contains("generation")) {
      const Json& g = j["generation"];
      c.gamma = g.value("gamma", c.gamma);
      if (g.contains("mode")) c.mode = generation_mode_from_string(g["mode"].get<std::string>());
      c.t_start = g.value("t_start", c.t_start);
      c.candidates_per_pair = g.value("candidates_per_pair", c.candidates_per_pair);
      if (g.contains("pairs")) {
        c.pairs.clear();
        for (const auto& p : g["pairs"]) c.pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
      }
    }
    c.sentinels_per_class = j.value("sentinels_per_class", c.sentinels_per_class);
    c.port = j.value("port", c.port);
    if (j.contains("cohort")) {
      c.cohort_size = j["cohort"].value("size", c.cohort_size);
      if (j["cohort"].contains("observer")) c.observer = observer_spec_from_json(j["cohort"]["observer"]);
    }
    if (j.contains("finetune")) c.finetune = finetune_config_from_json(j["finetune"]);
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed run config: ") + e.what());
  }
}

Workspace::Workspace(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  require(!ec, ErrorCode::kIo, "cannot create data directory " + dir_.string() + ": " + ec.message());
  const fs::path lock = dir_ / paths::kLock;
  lock_fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) fail(ErrorCode::kIo, "cannot open " + lock.string() + ": " + std::strerror(errno));
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    fail(ErrorCode::kLocked, "data directory " + dir_.string() + " is in use by another varlab process");
  }
}

Workspace::~Workspace() {
  if (lock_fd_ >= 0) ::close(lock_fd_);  // releases the flock
}

fs::path Workspace::need(const std::string& rel, const char* producer) const {
  const fs::path p = dir_ / rel;
  if (!fs::exists(p)) {
    fail(ErrorCode::kDependency,
         "missing prerequisite artifact " + rel + " (produced by `" + producer + "`)");
  }
  return p;
}

const RunConfig& Workspace::config() {
  if (!config_) {
    const fs::path p = need(paths::kConfig, "init-domain");
    const std::string text = read_text(p);
    config_ = run_config_from_json(Json::parse(text));
    config_hash_ = hex64(fnv1a(text));
  }
  return *config_;
}

std::string Workspace::config_hash() {
  config();
  return config_hash_;
}

namespace {

Json tagged(Json j, Workspace& ws) {
  j["config_hash"] = ws.config_hash();
  return j;
}

std::string csv_tagged(const std::string& body, Workspace& ws) {
  return "# config_hash=" + ws.config_hash() + "\n" + body;
}

// Reads a JSON artifact, optionally recording its config hash.
Json load_artifact(Workspace& ws, const std::string& rel, const char* producer,
                   std::set<std::string>* hashes = nullptr) {
  Json j = read_json(ws.need(rel, producer));
  if (hashes) hashes->insert(j.value("config_hash", std::string("untagged")));
  return j;
}

DomainSpec load_domain(Workspace& ws) {
  return domain_from_json(load_artifact(ws, paths::kDomain, "init-domain"));
}

ClassifierBundle load_classifier(Workspace& ws, const std::string& rel, const char* producer,
                                 std::set<std::string>* hashes = nullptr) {
  return classifier_from_json(load_artifact(ws, rel, producer, hashes));
}

LabeledDataset load_dataset(Workspace& ws, const char* rel) {
  return read_dataset_jsonl(ws.need(rel, "init-domain"));
}

std::vector<StimulusRecord> load_candidates(Workspace& ws) {
  std::vector<StimulusRecord> out;
  for (const auto& row : read_jsonl(ws.need(paths::kCandidates, "generate")))
    out.push_back(stimulus_from_json(row));
  return out;
}

void save_candidates(Workspace& ws, const std::vector<StimulusRecord>& records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(tagged(to_json(r), ws));
  write_jsonl(ws.file(paths::kCandidates), rows);
}

Catalog load_catalog(Workspace& ws) { return read_catalog(ws.need(paths::kCatalog, "filter")); }

VarEmotionDataset load_group_export(Workspace& ws, std::set<std::string>* hashes = nullptr) {
  return var_emotion_from_json(load_artifact(ws, paths::kGroupExport, "export --granularity group", hashes));
}

std::string file_digest(const fs::path& p) { return hex64(fnv1a(read_text(p))); }

}  // namespace

void write_manifest(Workspace& ws, const std::string& name, const Json& options,
                    const std::vector<std::string>& outputs, const Json& metrics) {
  Json files = Json::array();
  for (const auto& rel : outputs) files.push_back({{"path", rel}, {"fnv1a", file_digest(ws.file(rel))}});
  const Json manifest = {{"command", name},
                         {"config_hash", ws.config_hash()},
                         {"seed", ws.config().seed},
                         {"options", options},
                         {"outputs", files},
                         {"metrics", metrics}};
  fs::create_directories(ws.file("manifests"));
  write_json(ws.file("manifests/" + name + ".json"), manifest);
}

void cmd_init_domain(Workspace& ws, const InitOptions& opts) {
  RunConfig cfg = opts.config_file ? run_config_from_json(read_json(*opts.config_file))
                                   : RunConfig::with_seed(opts.seed);
  cfg.validate();
  write_text_atomic(ws.file(paths::kConfig), to_json(cfg).dump(2) + "\n");
  ws.reload_config();
  const RunConfig& c = ws.config();

  const DomainSpec spec = DomainSpec::default_spec(mix_seed(c.seed, kDomainSeed), c.dim, c.mean_distance);
  write_json(ws.file(paths::kDomain), tagged(to_json(spec), ws));
  write_dataset_jsonl(ws.file(paths::kBaseTrain), sample_labeled(spec, c.n_train, mix_seed(c.seed, kTrainSample)));
  write_dataset_jsonl(ws.file(paths::kBaseTest), sample_labeled(spec, c.n_test, mix_seed(c.seed, kTestSample)));
  write_manifest(ws, "init-domain", {{"seed", c.seed}, {"config_file", opts.config_file.has_value()}},
                 {paths::kConfig, paths::kDomain, paths::kBaseTrain, paths::kBaseTest},
                 {{"n_train", c.n_train}, {"n_test", c.n_test}});
}

void cmd_train_classifier(Workspace& ws) {
  const RunConfig& c = ws.config();
  const LabeledDataset train = load_dataset(ws, paths::kBaseTrain);
  const LabeledDataset test = load_dataset(ws, paths::kBaseTest);
  const ClassifierBundle bundle = train_classifier(train, c.classifier);
  const ActivationThresholds th = activation_thresholds(bundle, train, c.percentile, paths::kBaseTrain);
  write_json(ws.file(paths::kClassifier), tagged(to_json(bundle), ws));
  write_json(ws.file(paths::kThresholds), tagged(to_json(th), ws));
  write_manifest(ws, "train-classifier", to_json(c.classifier), {paths::kClassifier, paths::kThresholds},
                 {{"train_accuracy", accuracy(bundle, train)}, {"test_accuracy", accuracy(bundle, test)}});
}

void cmd_train_denoiser(Workspace& ws) {
  const RunConfig& c = ws.config();
  const LabeledDataset train = load_dataset(ws, paths::kBaseTrain);
  const NoiseSchedule schedule = NoiseSchedule::make(c.steps, c.beta_min, c.beta_max);
  std::vector<double> curve;
  const DenoiserBundle den = train_denoiser(train, schedule, c.denoiser, &curve);
  write_json(ws.file(paths::kDenoiser), tagged(to_json(den), ws));
  write_manifest(ws, "train-denoiser", to_json(c.denoiser), {paths::kDenoiser},
                 {{"final_loss", curve.empty() ? 0.0 : curve.back()}});
}

void cmd_generate(Workspace& ws, const GenerateOptions& opts) {
  const RunConfig& c = ws.config();
  const DenoiserBundle den = denoiser_from_json(load_artifact(ws, paths::kDenoiser, "train-denoiser"));
  const ClassifierBundle clf = load_classifier(ws, paths::kClassifier, "train-classifier");
  const LabeledDataset train = load_dataset(ws, paths::kBaseTrain);

  GenerationConfig g;
  g.gamma = opts.gamma.value_or(c.gamma);
  g.mode = opts.mode.value_or(c.mode);
  g.t_start = c.t_start;
  g.seed_data = &train;
  const int n = opts.n.value_or(c.candidates_per_pair);
  require(n > 0, ErrorCode::kUsage, "--n must be positive");
  require(g.gamma >= 0, ErrorCode::kUsage, "--gamma must be nonnegative");
  const std::vector<TargetPair> pairs = opts.pair ? std::vector<TargetPair>{*opts.pair} : c.pairs;

  // Regenerating a pair replaces its earlier candidates.
  std::vector<StimulusRecord> all;
  if (fs::exists(ws.file(paths::kCandidates))) {
    for (auto& r : load_candidates(ws)) {
      const bool replaced = std::find(pairs.begin(), pairs.end(), r.pair) != pairs.end();
      if (!replaced) all.push_back(std::move(r));
    }
  }
  for (const auto& p : pairs) {
    g.seed = mix_seed(mix_seed(c.seed, kGenerationSeed), static_cast<std::uint64_t>(p.e1 * kNumEmotions + p.e2));
    auto batch = generate_candidates(den, clf, p, n, g);
    all.insert(all.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
  }
  std::stable_sort(all.begin(), all.end(), [](const StimulusRecord& a, const StimulusRecord& b) {
    return std::pair(a.pair.e1, a.pair.e2) < std::pair(b.pair.e1, b.pair.e2);
  });
  save_candidates(ws, all);

  Json pair_labels = Json::array();
  for (const auto& p : pairs) pair_labels.push_back(p.label());
  write_manifest(ws, opts.pair ? "generate-" + opts.pair->label() : "generate",
                 {{"pairs", pair_labels}, {"n", n}, {"gamma", g.gamma}, {"mode", to_string(g.mode)}},
                 {paths::kCandidates}, {{"candidates_total", all.size()}});
}

void cmd_filter(Workspace& ws) {
  const RunConfig& c = ws.config();
  const ActivationThresholds th =
      thresholds_from_json(load_artifact(ws, paths::kThresholds, "train-classifier"));
  std::vector<StimulusRecord> candidates = load_candidates(ws);
  const std::vector<StimulusRecord> accepted = filter_candidates(candidates, th);
  save_candidates(ws, candidates);

  const DomainSpec spec = load_domain(ws);
  const auto sentinels = sentinel_pool(spec, c.sentinels_per_class, mix_seed(c.seed, kSentinelSeed));
  const Catalog catalog = build_catalog(accepted, sentinels, mix_seed(c.seed, kCatalogSeed));
  write_catalog(ws.file(paths::kCatalog), catalog);

  const fs::path glyph_dir = ws.file(paths::kGlyphs);
  fs::remove_all(glyph_dir);
  fs::create_directories(glyph_dir);
  for (const auto& e : catalog.entries) {
    write_text_atomic(glyph_dir / (e.stimulus_id + ".svg"),
                      render_glyph(embedding_to_glyph(e.embedding), kGlyphSize));
  }
  if (static_cast<int>(catalog.boundary().size()) < kRandomTrials) {
    ws.warn("catalog holds " + std::to_string(catalog.boundary().size()) +
            " boundary stimuli; sessions need " + std::to_string(kRandomTrials));
  }
  Json per_pair = Json::object();
  for (const auto& r : accepted) per_pair[r.pair.label()] = per_pair.value(r.pair.label(), 0) + 1;
  write_manifest(ws, "filter", {{"percentile", th.percentile}}, {paths::kCandidates, paths::kCatalog},
                 {{"candidates", candidates.size()},
                  {"accepted", accepted.size()},
                  {"accepted_per_pair", per_pair},
                  {"sentinels", catalog.sentinels().size()}});
}

ServiceHost::ServiceHost(Workspace& ws, const std::string& host, int port, bool sync_writes,
                         std::function<std::int64_t()> clock) {
  const RunConfig& c = ws.config();
  ServiceOptions opts;
  opts.seed = mix_seed(c.seed, kServiceSeed);
  opts.sync_writes = sync_writes;
  opts.clock = std::move(clock);
  service_ = std::make_unique<ExperimentService>(load_catalog(ws), ws.dir(), opts);
  http_ = std::make_unique<HttpService>(*service_, kGlyphSize);
  port_ = http_->start(host, port < 0 ? c.port : port);
}

ServiceHost::~ServiceHost() {
  if (http_) http_->stop();
}

CohortRun cmd_simulate(Workspace& ws, const SimulateOptions& opts) {
  const RunConfig& c = ws.config();
  const Catalog catalog = load_catalog(ws);
  std::vector<ObserverSpec> specs;
  if (opts.cohort_file) {
    specs = read_cohort_file(*opts.cohort_file);
  } else {
    specs = default_cohort(opts.count.value_or(c.cohort_size), mix_seed(c.seed, kCohortSeed),
                           c.observer.perturb_scale);
    for (auto& s : specs) {
      const std::string id = s.observer_id;
      const std::uint64_t seed = s.seed;
      s = c.observer;
      s.observer_id = id;
      s.seed = seed;
    }
  }
  require(!specs.empty(), ErrorCode::kValidation, "cohort is empty");
  write_cohort_file(ws.file(paths::kCohort), specs);

  // Observers referencing the same checkpoint share one load.
  std::map<std::string, ClassifierBundle> bases;
  for (const auto& s : specs) {
    if (bases.count(s.base_classifier)) continue;
    const fs::path p = fs::path(s.base_classifier).is_absolute() ? fs::path(s.base_classifier)
                                                                 : ws.file(s.base_classifier);
    if (!fs::exists(p)) {
      fail(ErrorCode::kDependency, "missing base classifier " + s.base_classifier +
                                       " (produced by `train-classifier`)");
    }
    bases.emplace(s.base_classifier, classifier_from_json(read_json(p)));
  }

  // Simulated time: a logical clock keeps the store byte-reproducible.
  auto ticks = std::make_shared<std::atomic<std::int64_t>>(0);
  ServiceHost host(ws, "127.0.0.1", 0, false, [ticks] { return ticks->fetch_add(1); });
  HttpClient client("127.0.0.1", host.port());
  CohortRun total;
  const std::uint64_t run_seed = mix_seed(c.seed, kRunSeed);
  for (const auto& s : specs) {
    const CohortRun one = run_cohort({s}, bases.at(s.base_classifier), catalog, client, run_seed);
    total.session_ids.insert(total.session_ids.end(), one.session_ids.begin(), one.session_ids.end());
    total.trials_submitted += one.trials_submitted;
  }
  write_manifest(ws, "simulate", {{"observers", specs.size()}, {"cohort_file", opts.cohort_file.has_value()}},
                 {paths::kCohort, kSessionsFile, kResponsesFile},
                 {{"sessions", total.session_ids.size()}, {"trials", total.trials_submitted}});
  return total;
}

void cmd_export(Workspace& ws, Granularity granularity) {
  ws.config();
  const fs::path responses = ws.file(kResponsesFile);
  if (!fs::exists(responses)) {
    fail(ErrorCode::kDependency,
         std::string("missing prerequisite artifact ") + kResponsesFile + " (produced by `simulate` or `serve`)");
  }
  const auto records = read_trial_records(responses);
  const ExportResult result = export_dataset(records, granularity);
  for (const auto& w : result.warnings) ws.warn(w);

  Json participants = Json::array();
  for (const auto& p : result.all_participants) {
    participants.push_back({{"participant_id", p.participant_id},
                            {"retained", p.qc.retain},
                            {"sentinel_accuracy", p.qc.sentinel_accuracy},
                            {"sentinel_correct", p.qc.sentinel_correct},
                            {"sentinel_total", p.qc.sentinel_total}});
  }
  fs::create_directories(ws.file("export"));
  write_json(ws.file(paths::kParticipants), tagged(Json{{"participants", participants}}, ws));
  std::vector<std::string> outputs{paths::kParticipants};
  if (granularity == Granularity::kGroup) {
    write_json(ws.file(paths::kGroupExport), tagged(to_json(result.datasets.at(0)), ws));
    outputs.push_back(paths::kGroupExport);
  } else {
    fs::remove_all(ws.file(paths::kIndividualExportDir));
    fs::create_directories(ws.file(paths::kIndividualExportDir));
    for (const auto& d : result.datasets) {
      const std::string rel = std::string(paths::kIndividualExportDir) + "/" + *d.participant + ".json";
      write_json(ws.file(rel), tagged(to_json(d), ws));
      outputs.push_back(rel);
    }
  }
  std::size_t retained = 0;
  for (const auto& p : result.all_participants) retained += p.qc.retain ? 1 : 0;
  write_manifest(ws, std::string("export-") + to_string(granularity),
                 {{"granularity", to_string(granularity)}}, outputs,
                 {{"participants", result.all_participants.size()},
                  {"retained", retained},
                  {"records", records.size()},
                  {"warnings", result.warnings}});
}

namespace {

struct BehavioralData {
  Catalog catalog;
  VarEmotionDataset group;
  BehavioralSplits splits;
};

BehavioralData load_behavioral(Workspace& ws, std::set<std::string>* hashes = nullptr) {
  BehavioralData b;
  b.catalog = load_catalog(ws);
  b.group = load_group_export(ws, hashes);
  b.splits = make_behavioral_splits(behavioral_items(b.group.trials, b.catalog),
                                    mix_seed(ws.config().seed, kSplitSeed));
  return b;
}

std::uint64_t participant_seed(std::uint64_t seed, const std::string& pid) {
  return mix_seed(mix_seed(seed, kIndividualSeed), fnv1a(pid));
}

}  // namespace

void cmd_finetune(Workspace& ws, const FinetuneOptions& opts) {
  const RunConfig& c = ws.config();
  if (opts.level == Granularity::kGroup) {
    require(!opts.participant, ErrorCode::kUsage, "--participant applies to --level individual only");
    const ClassifierBundle base = load_classifier(ws, paths::kClassifier, "train-classifier");
    const BehavioralData b = load_behavioral(ws);
    require(!b.splits.group_train.empty(), ErrorCode::kInsufficientData, "group export has no trials");
    write_json(ws.file(paths::kSplits), tagged(splits_to_json(b.splits), ws));
    const auto base_train = base_items(load_dataset(ws, paths::kBaseTrain));
    const ClassifierBundle group = finetune_group(base, b.splits.group_train, base_train, c.finetune);
    fs::create_directories(ws.file("models"));
    write_json(ws.file(paths::kGroupNet), tagged(to_json(group), ws));
    write_manifest(ws, "finetune-group", to_json(c.finetune), {paths::kSplits, paths::kGroupNet},
                   {{"group_train", b.splits.group_train.size()},
                    {"group_val", b.splits.group_val.size()},
                    {"val_accuracy_base", accuracy(base, b.splits.group_val)},
                    {"val_accuracy_group", accuracy(group, b.splits.group_val)}});
    return;
  }

  const ClassifierBundle group = load_classifier(ws, paths::kGroupNet, "finetune --level group");
  const BehavioralData b = load_behavioral(ws);
  std::vector<std::string> targets;
  if (opts.participant) {
    require(b.splits.individual_train.count(*opts.participant) > 0, ErrorCode::kNotFound,
            "participant " + *opts.participant + " is not in the retained export");
    targets.push_back(*opts.participant);
  } else {
    for (const auto& [pid, items] : b.splits.individual_train) targets.push_back(pid);
  }
  std::vector<std::string> outputs;
  Json metrics = Json::object();
  for (const auto& pid : targets) {
    const auto& train = b.splits.individual_train.at(pid);
    if (!opts.participant && static_cast<int>(train.size()) < kMinIndividualTrials) {
      ws.warn("skipping " + pid + ": " + std::to_string(train.size()) + " training trials");
      continue;
    }
    FinetuneConfig fc = c.finetune;
    fc.seed = participant_seed(c.seed, pid);
    const ClassifierBundle indiv = finetune_individual(group, pid, train, b.splits.group_train, fc);
    const std::string rel = paths::indivnet(pid);
    fs::create_directories(ws.file("models"));
    write_json(ws.file(rel), tagged(to_json(indiv), ws));
    outputs.push_back(rel);
    const auto& val = b.splits.individual_val.at(pid);
    metrics[pid] = {{"val_accuracy_group", accuracy(group, val)},
                    {"val_accuracy_individual", accuracy(indiv, val)}};
  }
  write_manifest(ws, opts.participant ? "finetune-individual-" + *opts.participant : "finetune-individual",
                 to_json(c.finetune), outputs, metrics);
}

void cmd_analyze(Workspace& ws) {
  ws.config();
  const VarEmotionDataset data = load_group_export(ws);
  const Catalog catalog = load_catalog(ws);
  const AnalysisReport report = analyze(data, catalog);
  for (const auto& w : report.warnings) ws.warn(w);
  fs::create_directories(ws.file("analysis"));
  write_text_atomic(ws.file(paths::kAnalysisCsv), csv_tagged(stimuli_csv(report), ws));
  write_json(ws.file(paths::kAnalysisSummary), tagged(summary_json(report), ws));
  write_manifest(ws, "analyze", Json::object(), {paths::kAnalysisCsv, paths::kAnalysisSummary},
                 summary_json(report));
}

void cmd_report(Workspace& ws, bool force) {
  ws.config();
  std::set<std::string> hashes;
  const ClassifierBundle base = load_classifier(ws, paths::kClassifier, "train-classifier", &hashes);
  const ClassifierBundle group = load_classifier(ws, paths::kGroupNet, "finetune --level group", &hashes);
  const BehavioralData b = load_behavioral(ws, &hashes);
  const auto base_test = base_items(load_dataset(ws, paths::kBaseTest));

  AlignmentReport rep;
  std::vector<BehavioralItem> indiv_val_all;
  for (const auto& [pid, v] : b.splits.individual_val) indiv_val_all.insert(indiv_val_all.end(), v.begin(), v.end());

  std::map<std::string, ClassifierBundle> indiv;
  for (const auto& [pid, v] : b.splits.individual_val) {
    const std::string rel = paths::indivnet(pid);
    if (fs::exists(ws.file(rel))) indiv.emplace(pid, load_classifier(ws, rel, "finetune --level individual", &hashes));
  }
  if (hashes.size() > 1) {
    std::string list;
    for (const auto& h : hashes) list += (list.empty() ? "" : ", ") + h;
    if (!force) fail(ErrorCode::kValidation, "inputs come from different configurations (" + list + "); rerun or pass --force");
    ws.warn("mixed config hashes in report inputs: " + list);
  }

  auto add_rows = [&](const std::string& model, const ClassifierBundle& m) {
    rep.accuracy.push_back({model, "base-analog", accuracy(m, base_test), base_test.size()});
    if (!b.splits.group_val.empty())
      rep.accuracy.push_back({model, "varEmotion", accuracy(m, b.splits.group_val), b.splits.group_val.size()});
    if (!indiv_val_all.empty())
      rep.accuracy.push_back({model, "varEmotion-i", accuracy(m, indiv_val_all), indiv_val_all.size()});
    rep.entropy_rho[model] = entropy_alignment(m, b.group, b.catalog);
  };
  add_rows("BaseNet", base);
  add_rows("GroupNet", group);
  if (!indiv.empty()) {
    // IndivNet on varEmotion-i: each participant judged by their own model.
    std::size_t hits = 0, n = 0;
    for (const auto& [pid, model] : indiv) {
      const auto& val = b.splits.individual_val.at(pid);
      const double ia = accuracy(model, val);
      rep.participants.push_back({pid, accuracy(group, val), ia, val.size()});
      hits += static_cast<std::size_t>(std::llround(ia * static_cast<double>(val.size())));
      n += val.size();
    }
    rep.accuracy.push_back({"IndivNet", "varEmotion-i", static_cast<double>(hits) / static_cast<double>(n), n});
  } else {
    ws.warn("no individual models found; IndivNet rows omitted");
  }
  rep.validate();

  fs::create_directories(ws.file("report"));
  write_json(ws.file(paths::kReportJson), tagged(to_json(rep), ws));
  write_text_atomic(ws.file(paths::kReportAccuracy), csv_tagged(accuracy_csv(rep), ws));
  write_text_atomic(ws.file(paths::kReportParticipants), csv_tagged(participants_csv(rep), ws));
  write_manifest(ws, "report", {{"force", force}},
                 {paths::kReportJson, paths::kReportAccuracy, paths::kReportParticipants}, to_json(rep));
}

}  // namespace varlab
