#pragma once

#include <memory>
#include <string>

#include "varlab/error.hpp"
#include "varlab/experiment.hpp"

namespace varlab {

// JSON/HTTP front end for an ExperimentService:
//   POST /api/sessions                  {participant_id} -> {session_id, total_trials}
//   GET  /api/sessions/{id}/trials/next -> TrialDescriptor | {complete: true}
//   POST /api/sessions/{id}/responses   {trial_index, choice, rt_ms} -> {ok: true}
//   GET  /api/stimuli/{id}.svg          -> image/svg+xml
//   GET  /api/health                    -> {status: "ok"}
// Errors are {error, message} with 400 (validation), 404, 409 (sequencing),
// 503 (capacity) or 500.
class HttpService {
 public:
  explicit HttpService(ExperimentService& service, int glyph_size = 256);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

int http_status_for(ErrorCode code);
ErrorCode error_code_from_name(const std::string& name);

}  // namespace varlab
