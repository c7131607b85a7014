#ifndef VARLAB_VARLAB_H
#define VARLAB_VARLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(VARLAB_BUILDING_LIBRARY)
#define VL_API __attribute__((visibility("default")))
#else
#define VL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vl_status {
  VL_OK = 0,
  VL_ERR_INPUT_SHAPE,
  VL_ERR_EMPTY_INPUT,
  VL_ERR_INSUFFICIENT_COVERAGE,
  VL_ERR_INSUFFICIENT_DATA,
  VL_ERR_CONFIG,
  VL_ERR_CAPACITY,
  VL_ERR_NOT_FOUND,
  VL_ERR_SEQUENCING,
  VL_ERR_VALIDATION,
  VL_ERR_UNDEFINED_CORRELATION,
  VL_ERR_DEPENDENCY,
  VL_ERR_USAGE,
  VL_ERR_LOCKED,
  VL_ERR_IO,
  VL_ERR_INTERNAL
} vl_status;

typedef enum vl_outcome { VL_OUTCOME_SUCCESS = 0, VL_OUTCOME_BIAS, VL_OUTCOME_FAILURE } vl_outcome;

typedef struct vl_workspace vl_workspace;
typedef struct vl_service vl_service;
typedef struct vl_classifier vl_classifier;

#define VL_NUM_EMOTIONS 6

VL_API const char* vl_version(void);
VL_API const char* vl_status_name(vl_status status);
/* Message of the last failure on this thread; "" after success. */
VL_API const char* vl_last_error(void);
/* 0 ok, 2 usage, 3 missing dependency, 4 data validation, 1 otherwise. */
VL_API int vl_exit_code(vl_status status);

/* Canonical order: surprise, fear, disgust, happiness, sadness, anger. */
VL_API const char* vl_emotion_name(int index);
VL_API int vl_emotion_index(const char* name); /* -1 when unknown */

/* Opens (creating if needed) a data directory and takes its lock. */
VL_API vl_status vl_workspace_open(const char* data_dir, vl_workspace** out);
VL_API void vl_workspace_close(vl_workspace* ws);
/* Warnings raised by the most recent command. */
VL_API size_t vl_workspace_warning_count(const vl_workspace* ws);
VL_API const char* vl_workspace_warning(const vl_workspace* ws, size_t index);

/* config_file may be NULL; then defaults derived from seed are used. */
VL_API vl_status vl_cmd_init_domain(vl_workspace* ws, uint64_t seed, const char* config_file);
VL_API vl_status vl_cmd_train_classifier(vl_workspace* ws);
VL_API vl_status vl_cmd_train_denoiser(vl_workspace* ws);

typedef struct vl_generate_options {
  int has_pair; /* nonzero: only pair (e1, e2) */
  int e1;
  int e2;
  int n;        /* <= 0: config value */
  double gamma; /* < 0: config value */
  const char* mode; /* "edit" | "scratch" | NULL for config */
} vl_generate_options;

VL_API void vl_generate_options_init(vl_generate_options* opts);
VL_API vl_status vl_cmd_generate(vl_workspace* ws, const vl_generate_options* opts);
VL_API vl_status vl_cmd_filter(vl_workspace* ws);

/* cohort_file may be NULL (default cohort of `count`, or the config size
   when count <= 0). trials_out may be NULL. */
VL_API vl_status vl_cmd_simulate(vl_workspace* ws, const char* cohort_file, int count,
                                 size_t* trials_out);
/* granularity: "group" | "individual" */
VL_API vl_status vl_cmd_export(vl_workspace* ws, const char* granularity);
/* level: "group" | "individual"; participant may be NULL. */
VL_API vl_status vl_cmd_finetune(vl_workspace* ws, const char* level, const char* participant);
VL_API vl_status vl_cmd_analyze(vl_workspace* ws);
VL_API vl_status vl_cmd_report(vl_workspace* ws, int force);

/* Serves the workspace catalog over HTTP until vl_service_stop. port 0 picks
   a free port, a negative port uses the configured one. */
VL_API vl_status vl_service_start(vl_workspace* ws, const char* host, int port, int sync_writes,
                                  vl_service** out);
VL_API int vl_service_port(const vl_service* svc);
VL_API void vl_service_stop(vl_service* svc);

VL_API vl_status vl_classifier_load(const char* path, vl_classifier** out);
VL_API size_t vl_classifier_input_dim(const vl_classifier* clf);
VL_API vl_status vl_classifier_predict(const vl_classifier* clf, const double* x, size_t dim,
                                       double probs_out[VL_NUM_EMOTIONS]);
VL_API void vl_classifier_free(vl_classifier* clf);

VL_API vl_status vl_spearman(const double* xs, const double* ys, size_t n, double* rho_out);
VL_API vl_status vl_choice_entropy(const int counts[VL_NUM_EMOTIONS], double* bits_out);
VL_API vl_outcome vl_classify_outcome(double p1, double p2);

#ifdef __cplusplus
}
#endif

#endif
