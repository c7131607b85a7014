#pragma once

#include <memory>
#include <optional>
#include <string>

#include "varlab/experiment.hpp"

namespace varlab {

// The participant-facing surface of the experiment service.
class ExperimentClient {
 public:
  virtual ~ExperimentClient() = default;
  virtual SessionInfo create_session(const std::string& participant_id) = 0;
  // std::nullopt when the session is complete.
  virtual std::optional<TrialDescriptor> next_trial(const std::string& session_id) = 0;
  virtual void submit_response(const std::string& session_id, int trial_index, int choice,
                               int rt_ms) = 0;
};

// In-process calls straight into a service.
class DirectClient final : public ExperimentClient {
 public:
  explicit DirectClient(ExperimentService& service) : service_(service) {}
  SessionInfo create_session(const std::string& participant_id) override;
  std::optional<TrialDescriptor> next_trial(const std::string& session_id) override;
  void submit_response(const std::string& session_id, int trial_index, int choice,
                       int rt_ms) override;

 private:
  ExperimentService& service_;
};

// JSON over HTTP against a running service. Server-side errors are rethrown
// as varlab::Error with the matching code.
class HttpClient final : public ExperimentClient {
 public:
  HttpClient(const std::string& host, int port);
  ~HttpClient() override;
  SessionInfo create_session(const std::string& participant_id) override;
  std::optional<TrialDescriptor> next_trial(const std::string& session_id) override;
  void submit_response(const std::string& session_id, int trial_index, int choice,
                       int rt_ms) override;

  // Raw GET for endpoints outside the participant flow (health, SVG).
  std::string get(const std::string& path, int* status = nullptr);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace varlab
