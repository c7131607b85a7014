#include "varlab/http_service.hpp"

#include <thread>


#include "varlab/error.hpp"
#include "varlab/glyph.hpp"

#include <httplib.h>
// <resolv.h> defines this, and it collides with Eigen parameter names.
#undef _res

namespace varlab {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation:
    case ErrorCode::kInputShape:
    case ErrorCode::kUsage: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kSequencing: return 409;
    case ErrorCode::kCapacity: return 503;
    default: return 500;
  }
}

ErrorCode error_code_from_name(const std::string& name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::kIo); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    if (name == to_string(code)) return code;
  }
  return ErrorCode::kIo;
}

struct HttpService::Impl {
  ExperimentService& service;
  int glyph_size;
  httplib::Server server;
  std::thread thread;

  Impl(ExperimentService& s, int size) : service(s), glyph_size(size) {}
};

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status_for(code), Json{{"error", to_string(code)}, {"message", message}});
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const Json::exception& e) {
    send_error(res, ErrorCode::kValidation, std::string("bad request body: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, ErrorCode::kIo, e.what());
  }
}

Json parse_body(const httplib::Request& req) {
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kValidation, std::string("request body is not JSON: ") + e.what());
  }
}

}  // namespace

HttpService::HttpService(ExperimentService& service, int glyph_size)
    : impl_(std::make_unique<Impl>(service, glyph_size)) {
  auto& srv = impl_->server;
  Impl* impl = impl_.get();
  // Small request/response pairs: without this every round trip waits on
  // delayed ACKs.
  srv.set_tcp_nodelay(true);
  srv.set_keep_alive_max_count(100000);

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, Json{{"status", "ok"}});
  });

  srv.Post("/api/sessions", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      require(body.contains("participant_id") && body["participant_id"].is_string(),
              ErrorCode::kValidation, "participant_id (string) is required");
      const SessionInfo info = impl->service.create_session(body["participant_id"].get<std::string>());
      send_json(res, 200, Json{{"session_id", info.session_id}, {"total_trials", info.total_trials}});
    });
  });

  srv.Get(R"(/api/sessions/([^/]+)/trials/next)",
          [impl](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const auto trial = impl->service.next_trial(req.matches[1]);
              send_json(res, 200, trial ? to_json(*trial) : Json{{"complete", true}});
            });
          });

  srv.Post(R"(/api/sessions/([^/]+)/responses)",
           [impl](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const Json body = parse_body(req);
               for (const char* field : {"trial_index", "choice", "rt_ms"}) {
                 require(body.contains(field) && body[field].is_number_integer(),
                         ErrorCode::kValidation, std::string(field) + " (integer) is required");
               }
               impl->service.record_response(req.matches[1], body["trial_index"].get<int>(),
                                             body["choice"].get<int>(), body["rt_ms"].get<int>());
               send_json(res, 200, Json{{"ok", true}});
             });
           });

  srv.Get(R"(/api/stimuli/([^/]+)\.svg)", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const CatalogEntry& e = impl->service.catalog().at(req.matches[1]);
      res.status = 200;
      res.set_content(render_glyph(embedding_to_glyph(e.embedding), impl->glyph_size),
                      "image/svg+xml");
    });
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    port_ = srv.bind_to_any_port(host);
  } else {
    port_ = srv.bind_to_port(host, port) ? port : -1;
  }
  require(port_ > 0, ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace varlab
