#include "varlab/varlab.h"

#include <memory>
#include <string>
#include <vector>

#include "varlab/analysis.hpp"
#include "varlab/error.hpp"
#include "varlab/pipeline.hpp"
#include "varlab/stats.hpp"

struct vl_workspace {
  std::unique_ptr<varlab::Workspace> impl;
};

struct vl_service {
  std::unique_ptr<varlab::ServiceHost> host;
};

struct vl_classifier {
  varlab::ClassifierBundle bundle;
};

namespace {

thread_local std::string g_last_error;

vl_status status_of(varlab::ErrorCode code) {
  // ErrorCode and vl_status share their order, offset by VL_OK.
  return static_cast<vl_status>(static_cast<int>(code) + 1);
}

template <typename Fn>
vl_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VL_OK;
  } catch (const varlab::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return VL_ERR_INTERNAL;
  }
}

varlab::Workspace& ws_of(vl_workspace* ws) {
  varlab::require(ws && ws->impl, varlab::ErrorCode::kUsage, "null workspace handle");
  ws->impl->clear_warnings();
  return *ws->impl;
}

varlab::Granularity granularity_arg(const char* s) {
  varlab::require(s != nullptr, varlab::ErrorCode::kUsage, "granularity is required");
  try {
    return varlab::granularity_from_string(s);
  } catch (const varlab::Error& e) {
    varlab::fail(varlab::ErrorCode::kUsage, e.what());
  }
}

}  // namespace

extern "C" {

const char* vl_version(void) { return "0.1.0"; }

const char* vl_status_name(vl_status status) {
  if (status == VL_OK) return "ok";
  if (status == VL_ERR_INTERNAL) return "internal";
  if (status > VL_OK && status < VL_ERR_INTERNAL)
    return varlab::to_string(static_cast<varlab::ErrorCode>(static_cast<int>(status) - 1));
  return "unknown";
}

const char* vl_last_error(void) { return g_last_error.c_str(); }

int vl_exit_code(vl_status status) {
  switch (status) {
    case VL_OK: return 0;
    case VL_ERR_USAGE: return 2;
    case VL_ERR_DEPENDENCY: return 3;
    case VL_ERR_INPUT_SHAPE:
    case VL_ERR_EMPTY_INPUT:
    case VL_ERR_INSUFFICIENT_COVERAGE:
    case VL_ERR_INSUFFICIENT_DATA:
    case VL_ERR_CONFIG:
    case VL_ERR_CAPACITY:
    case VL_ERR_NOT_FOUND:
    case VL_ERR_VALIDATION:
    case VL_ERR_UNDEFINED_CORRELATION: return 4;
    default: return 1;
  }
}

const char* vl_emotion_name(int index) {
  if (index < 0 || index >= varlab::kNumEmotions) return nullptr;
  return varlab::kEmotionNames[static_cast<std::size_t>(index)].data();
}

int vl_emotion_index(const char* name) {
  if (!name) return -1;
  try {
    return varlab::emotion_index(name);
  } catch (const varlab::Error&) {
    return -1;
  }
}

vl_status vl_workspace_open(const char* data_dir, vl_workspace** out) {
  return guard([&] {
    varlab::require(data_dir && out, varlab::ErrorCode::kUsage, "data_dir and out are required");
    auto ws = std::make_unique<vl_workspace>();
    ws->impl = std::make_unique<varlab::Workspace>(data_dir);
    *out = ws.release();
  });
}

void vl_workspace_close(vl_workspace* ws) { delete ws; }

size_t vl_workspace_warning_count(const vl_workspace* ws) {
  return ws && ws->impl ? ws->impl->warnings().size() : 0;
}

const char* vl_workspace_warning(const vl_workspace* ws, size_t index) {
  if (!ws || !ws->impl || index >= ws->impl->warnings().size()) return nullptr;
  return ws->impl->warnings()[index].c_str();
}

vl_status vl_cmd_init_domain(vl_workspace* ws, uint64_t seed, const char* config_file) {
  return guard([&] {
    varlab::InitOptions opts;
    opts.seed = seed;
    if (config_file) opts.config_file = config_file;
    varlab::cmd_init_domain(ws_of(ws), opts);
  });
}

vl_status vl_cmd_train_classifier(vl_workspace* ws) {
  return guard([&] { varlab::cmd_train_classifier(ws_of(ws)); });
}

vl_status vl_cmd_train_denoiser(vl_workspace* ws) {
  return guard([&] { varlab::cmd_train_denoiser(ws_of(ws)); });
}

void vl_generate_options_init(vl_generate_options* opts) {
  if (!opts) return;
  opts->has_pair = 0;
  opts->e1 = 0;
  opts->e2 = 1;
  opts->n = 0;
  opts->gamma = -1.0;
  opts->mode = nullptr;
}

vl_status vl_cmd_generate(vl_workspace* ws, const vl_generate_options* opts) {
  return guard([&] {
    varlab::GenerateOptions g;
    if (opts) {
      if (opts->has_pair) {
        try {
          g.pair = varlab::TargetPair(opts->e1, opts->e2);
        } catch (const varlab::Error& e) {
          varlab::fail(varlab::ErrorCode::kUsage, e.what());
        }
      }
      if (opts->n > 0) g.n = opts->n;
      if (opts->gamma >= 0) g.gamma = opts->gamma;
      if (opts->mode) {
        try {
          g.mode = varlab::generation_mode_from_string(opts->mode);
        } catch (const varlab::Error& e) {
          varlab::fail(varlab::ErrorCode::kUsage, e.what());
        }
      }
    }
    varlab::cmd_generate(ws_of(ws), g);
  });
}

vl_status vl_cmd_filter(vl_workspace* ws) {
  return guard([&] { varlab::cmd_filter(ws_of(ws)); });
}

vl_status vl_cmd_simulate(vl_workspace* ws, const char* cohort_file, int count, size_t* trials_out) {
  return guard([&] {
    varlab::SimulateOptions opts;
    if (cohort_file) opts.cohort_file = cohort_file;
    if (count > 0) opts.count = count;
    const auto run = varlab::cmd_simulate(ws_of(ws), opts);
    if (trials_out) *trials_out = run.trials_submitted;
  });
}

vl_status vl_cmd_export(vl_workspace* ws, const char* granularity) {
  return guard([&] { varlab::cmd_export(ws_of(ws), granularity_arg(granularity)); });
}

vl_status vl_cmd_finetune(vl_workspace* ws, const char* level, const char* participant) {
  return guard([&] {
    varlab::FinetuneOptions opts;
    opts.level = granularity_arg(level);
    if (participant) opts.participant = participant;
    varlab::cmd_finetune(ws_of(ws), opts);
  });
}

vl_status vl_cmd_analyze(vl_workspace* ws) {
  return guard([&] { varlab::cmd_analyze(ws_of(ws)); });
}

vl_status vl_cmd_report(vl_workspace* ws, int force) {
  return guard([&] { varlab::cmd_report(ws_of(ws), force != 0); });
}

vl_status vl_service_start(vl_workspace* ws, const char* host, int port, int sync_writes,
                           vl_service** out) {
  return guard([&] {
    varlab::require(out != nullptr, varlab::ErrorCode::kUsage, "out is required");
    auto svc = std::make_unique<vl_service>();
    svc->host = std::make_unique<varlab::ServiceHost>(ws_of(ws), host ? host : "127.0.0.1", port,
                                                      sync_writes != 0);
    *out = svc.release();
  });
}

int vl_service_port(const vl_service* svc) { return svc && svc->host ? svc->host->port() : -1; }

void vl_service_stop(vl_service* svc) { delete svc; }

vl_status vl_classifier_load(const char* path, vl_classifier** out) {
  return guard([&] {
    varlab::require(path && out, varlab::ErrorCode::kUsage, "path and out are required");
    auto c = std::make_unique<vl_classifier>();
    c->bundle = varlab::classifier_from_json(varlab::read_json(path));
    *out = c.release();
  });
}

size_t vl_classifier_input_dim(const vl_classifier* clf) {
  return clf ? static_cast<size_t>(clf->bundle.model.layer_dims.front()) : 0;
}

vl_status vl_classifier_predict(const vl_classifier* clf, const double* x, size_t dim,
                                double probs_out[VL_NUM_EMOTIONS]) {
  return guard([&] {
    varlab::require(clf && x && probs_out, varlab::ErrorCode::kUsage, "null argument");
    varlab::require(dim == vl_classifier_input_dim(clf), varlab::ErrorCode::kInputShape,
                    "embedding has " + std::to_string(dim) + " values, the classifier expects " +
                        std::to_string(vl_classifier_input_dim(clf)));
    const varlab::Embedding e = Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(dim));
    const auto p = varlab::predict_probs(clf->bundle, e);
    for (int k = 0; k < varlab::kNumEmotions; ++k) probs_out[k] = p[static_cast<std::size_t>(k)];
  });
}

void vl_classifier_free(vl_classifier* clf) { delete clf; }

vl_status vl_spearman(const double* xs, const double* ys, size_t n, double* rho_out) {
  return guard([&] {
    varlab::require(rho_out != nullptr && (n == 0 || (xs && ys)), varlab::ErrorCode::kUsage, "null argument");
    *rho_out = varlab::stats::spearman(std::span<const double>(xs, n), std::span<const double>(ys, n));
  });
}

vl_status vl_choice_entropy(const int counts[VL_NUM_EMOTIONS], double* bits_out) {
  return guard([&] {
    varlab::require(counts && bits_out, varlab::ErrorCode::kUsage, "null argument");
    varlab::ChoiceCounts c{};
    for (int k = 0; k < varlab::kNumEmotions; ++k) c[static_cast<std::size_t>(k)] = counts[k];
    *bits_out = varlab::entropy_bits(varlab::choice_distribution("", c));
  });
}

vl_outcome vl_classify_outcome(double p1, double p2) {
  switch (varlab::classify_outcome(p1, p2)) {
    case varlab::Outcome::kSuccess: return VL_OUTCOME_SUCCESS;
    case varlab::Outcome::kBias: return VL_OUTCOME_BIAS;
    case varlab::Outcome::kFailure: return VL_OUTCOME_FAILURE;
  }
  return VL_OUTCOME_FAILURE;
}

}  // extern "C"
