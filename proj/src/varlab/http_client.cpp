
#include "varlab/error.hpp"
#include "varlab/experiment_client.hpp"
#include "varlab/http_service.hpp"

#include <httplib.h>
// <resolv.h> defines this, and it collides with Eigen parameter names.
#undef _res

namespace varlab {

SessionInfo DirectClient::create_session(const std::string& participant_id) {
  return service_.create_session(participant_id);
}

std::optional<TrialDescriptor> DirectClient::next_trial(const std::string& session_id) {
  return service_.next_trial(session_id);
}

void DirectClient::submit_response(const std::string& session_id, int trial_index, int choice,
                                   int rt_ms) {
  service_.record_response(session_id, trial_index, choice, rt_ms);
}

struct HttpClient::Impl {
  httplib::Client client;
  Impl(const std::string& host, int port) : client(host, port) {
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
  }
};

namespace {

Json checked(const httplib::Result& res, const std::string& what) {
  if (!res) fail(ErrorCode::kIo, what + ": " + httplib::to_string(res.error()));
  Json body;
  try {
    body = Json::parse(res->body);
  } catch (const Json::parse_error&) {
    fail(ErrorCode::kIo, what + ": non-JSON response (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    fail(error_code_from_name(body.value("error", std::string("io"))),
         body.value("message", what + " failed with HTTP " + std::to_string(res->status)));
  }
  return body;
}

}  // namespace

HttpClient::HttpClient(const std::string& host, int port) : impl_(std::make_unique<Impl>(host, port)) {}

HttpClient::~HttpClient() = default;

SessionInfo HttpClient::create_session(const std::string& participant_id) {
  const Json body = checked(
      impl_->client.Post("/api/sessions", Json{{"participant_id", participant_id}}.dump(),
                         "application/json"),
      "create session");
  return {body.at("session_id").get<std::string>(), body.at("total_trials").get<int>()};
}

std::optional<TrialDescriptor> HttpClient::next_trial(const std::string& session_id) {
  const Json body =
      checked(impl_->client.Get("/api/sessions/" + session_id + "/trials/next"), "next trial");
  if (body.value("complete", false)) return std::nullopt;
  return trial_descriptor_from_json(body);
}

void HttpClient::submit_response(const std::string& session_id, int trial_index, int choice,
                                 int rt_ms) {
  checked(impl_->client.Post("/api/sessions/" + session_id + "/responses",
                             Json{{"trial_index", trial_index}, {"choice", choice}, {"rt_ms", rt_ms}}.dump(),
                             "application/json"),
          "submit response");
}

std::string HttpClient::get(const std::string& path, int* status) {
  auto res = impl_->client.Get(path);
  if (!res) fail(ErrorCode::kIo, "GET " + path + ": " + httplib::to_string(res.error()));
  if (status) *status = res->status;
  return res->body;
}

}  // namespace varlab
