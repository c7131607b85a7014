// Command-line driver. Talks to the library only through its C API.
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "varlab/varlab.h"

namespace {

int report_failure(vl_status st, const char* what) {
  std::fprintf(stderr, "varlab %s: %s error: %s\n", what, vl_status_name(st), vl_last_error());
  return vl_exit_code(st);
}

void print_warnings(const vl_workspace* ws) {
  for (size_t i = 0; i < vl_workspace_warning_count(ws); ++i)
    std::fprintf(stderr, "warning: %s\n", vl_workspace_warning(ws, i));
}

bool parse_pair(const std::string& text, int* e1, int* e2) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) return false;
  *e1 = vl_emotion_index(text.substr(0, comma).c_str());
  *e2 = vl_emotion_index(text.substr(comma + 1).c_str());
  return *e1 >= 0 && *e2 >= 0 && *e1 != *e2;
}

int serve(vl_workspace* ws, const std::string& host, int port, bool sync) {
  // Block the stop signals before the server threads start so that they
  // inherit the mask and sigwait sees every delivery.
  sigset_t stop;
  sigemptyset(&stop);
  sigaddset(&stop, SIGINT);
  sigaddset(&stop, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop, nullptr);

  vl_service* svc = nullptr;
  const vl_status st = vl_service_start(ws, host.c_str(), port, sync ? 1 : 0, &svc);
  if (st != VL_OK) return report_failure(st, "serve");
  std::printf("listening on http://%s:%d\n", host.c_str(), vl_service_port(svc));
  std::fflush(stdout);
  int sig = 0;
  sigwait(&stop, &sig);
  vl_service_stop(svc);
  std::printf("stopped (signal %d)\n", sig);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varlab: boundary stimulus sampling, behavioral collection and alignment"};
  app.require_subcommand(1);

  std::string data_dir;
  if (const char* env = std::getenv("VARLAB_DATA_DIR")) data_dir = env;
  app.add_option("--data-dir", data_dir, "Data directory (default: $VARLAB_DATA_DIR or ./varlab-data)");

  uint64_t seed = 42;
  std::string config_file;
  auto* init = app.add_subcommand("init-domain", "Write config, domain and base datasets");
  init->add_option("--seed", seed, "Run seed");
  init->add_option("--config", config_file, "Full run config JSON")->check(CLI::ExistingFile);

  auto* train_clf = app.add_subcommand("train-classifier", "Train the base classifier and thresholds");
  auto* train_den = app.add_subcommand("train-denoiser", "Train the noise-prediction network");

  std::string pair_text, mode;
  int n = 0;
  double gamma = -1.0;
  auto* gen = app.add_subcommand("generate", "Sample guided candidates");
  gen->add_option("--pair", pair_text, "Target pair, e.g. fear,surprise");
  gen->add_option("--n", n, "Candidates per pair")->check(CLI::PositiveNumber);
  gen->add_option("--gamma", gamma, "Guidance strength")->check(CLI::NonNegativeNumber);
  gen->add_option("--mode", mode, "edit or scratch")->check(CLI::IsMember({"edit", "scratch"}));

  auto* filt = app.add_subcommand("filter", "Apply the threshold filter and build the catalog");

  std::string host = "127.0.0.1";
  int port = -1;
  bool no_sync = false;
  auto* srv = app.add_subcommand("serve", "Run the experiment service");
  srv->add_option("--port", port, "Port (0 picks a free one; default from config)");
  srv->add_option("--host", host, "Bind address");
  srv->add_flag("--no-sync", no_sync, "Skip fdatasync after each append");

  std::string cohort_file;
  int count = 0;
  auto* sim = app.add_subcommand("simulate", "Run a simulated cohort through the HTTP API");
  sim->add_option("--cohort", cohort_file, "Cohort spec JSON")->check(CLI::ExistingFile);
  sim->add_option("--count", count, "Default cohort size")->check(CLI::PositiveNumber);

  std::string granularity = "group";
  auto* exp = app.add_subcommand("export", "Export QC-filtered behavioral datasets");
  exp->add_option("--granularity", granularity)->check(CLI::IsMember({"group", "individual"}));

  std::string level = "group", participant;
  auto* ft = app.add_subcommand("finetune", "Fine-tune GroupNet or IndivNet");
  ft->add_option("--level", level)->check(CLI::IsMember({"group", "individual"}));
  ft->add_option("--participant", participant, "Only this participant (individual level)");

  auto* ana = app.add_subcommand("analyze", "Choice distributions, outcomes, RT statistics");

  bool force = false;
  auto* rep = app.add_subcommand("report", "Alignment report across models");
  rep->add_flag("--force", force, "Accept inputs from different configurations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (data_dir.empty()) data_dir = "varlab-data";

  vl_workspace* ws = nullptr;
  vl_status st = vl_workspace_open(data_dir.c_str(), &ws);
  if (st != VL_OK) return report_failure(st, "open");

  const std::string name = app.get_subcommands().front()->get_name();
  if (*srv) {
    const int rc = serve(ws, host, port, !no_sync);
    vl_workspace_close(ws);
    return rc;
  }

  if (*init) {
    st = vl_cmd_init_domain(ws, seed, config_file.empty() ? nullptr : config_file.c_str());
  } else if (*train_clf) {
    st = vl_cmd_train_classifier(ws);
  } else if (*train_den) {
    st = vl_cmd_train_denoiser(ws);
  } else if (*gen) {
    vl_generate_options o;
    vl_generate_options_init(&o);
    if (!pair_text.empty()) {
      if (!parse_pair(pair_text, &o.e1, &o.e2)) {
        std::fprintf(stderr, "varlab generate: --pair needs two distinct emotions out of "
                             "surprise,fear,disgust,happiness,sadness,anger\n");
        vl_workspace_close(ws);
        return 2;
      }
      o.has_pair = 1;
    }
    o.n = n;
    o.gamma = gamma;
    o.mode = mode.empty() ? nullptr : mode.c_str();
    st = vl_cmd_generate(ws, &o);
  } else if (*filt) {
    st = vl_cmd_filter(ws);
  } else if (*sim) {
    size_t trials = 0;
    st = vl_cmd_simulate(ws, cohort_file.empty() ? nullptr : cohort_file.c_str(), count, &trials);
    if (st == VL_OK) std::printf("submitted %zu trials\n", trials);
  } else if (*exp) {
    st = vl_cmd_export(ws, granularity.c_str());
  } else if (*ft) {
    st = vl_cmd_finetune(ws, level.c_str(), participant.empty() ? nullptr : participant.c_str());
  } else if (*ana) {
    st = vl_cmd_analyze(ws);
  } else if (*rep) {
    st = vl_cmd_report(ws, force ? 1 : 0);
  }

  print_warnings(ws);
  vl_workspace_close(ws);
  if (st != VL_OK) return report_failure(st, name.c_str());
  return 0;
}
