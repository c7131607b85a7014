#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#undef _res

#include "support.hpp"
#include "varlab/error.hpp"
#include "varlab/experiment_client.hpp"
#include "varlab/glyph.hpp"
#include "varlab/http_service.hpp"

using namespace varlab;
namespace vt = varlab::testing;

namespace {

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    ServiceOptions o;
    o.seed = 3;
    o.sync_writes = false;
    catalog_ = vt::make_catalog(400, 10);
    service_ = std::make_unique<ExperimentService>(catalog_, dir_.path(), o);
    http_ = std::make_unique<HttpService>(*service_, 128);
    port_ = http_->start("127.0.0.1", 0);
  }
  void TearDown() override { http_->stop(); }

  ErrorCode submit_error(HttpClient& c, const std::string& sid, int idx, int choice, int rt) {
    try {
      c.submit_response(sid, idx, choice, rt);
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::kIo;
  }

  vt::TempDir dir_;
  Catalog catalog_;
  std::unique_ptr<ExperimentService> service_;
  std::unique_ptr<HttpService> http_;
  int port_ = 0;
};

}  // namespace

TEST_F(Http, Health) {
  HttpClient c("127.0.0.1", port_);
  int status = 0;
  const auto body = Json::parse(c.get("/api/health", &status));
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body["status"], "ok");
}

TEST_F(Http, FullSessionWithoutSentinelLeak) {
  httplib::Client raw("127.0.0.1", port_);
  auto created = raw.Post("/api/sessions", R"({"participant_id":"web-1"})", "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 200);
  const Json info = Json::parse(created->body);
  EXPECT_EQ(info["total_trials"], 400);
  const std::string sid = info["session_id"];
  for (int i = 0; i < 400; ++i) {
    auto next = raw.Get("/api/sessions/" + sid + "/trials/next");
    ASSERT_TRUE(next);
    ASSERT_EQ(next->status, 200);
    const Json d = Json::parse(next->body);
    EXPECT_EQ(d["trial_index"], i);
    EXPECT_EQ(d["fixation_ms"], 300);
    EXPECT_EQ(d["stimulus_ms"], 200);
    EXPECT_EQ(d["choices"].size(), 6u);
    EXPECT_EQ(next->body.find("sentinel"), std::string::npos);
    Json r = {{"trial_index", i}, {"choice", i % 6}, {"rt_ms", 500}};
    auto ok = raw.Post("/api/sessions/" + sid + "/responses", r.dump(), "application/json");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    EXPECT_EQ(Json::parse(ok->body)["ok"], true);
  }
  auto done = raw.Get("/api/sessions/" + sid + "/trials/next");
  EXPECT_EQ(Json::parse(done->body)["complete"], true);
  EXPECT_EQ(service_->records().size(), 400u);
}

TEST_F(Http, ErrorsMapToStatusCodes) {
  HttpClient c("127.0.0.1", port_);
  const auto sid = c.create_session("x").session_id;
  EXPECT_EQ(submit_error(c, sid, 0, 9, 400), ErrorCode::kValidation);
  EXPECT_EQ(submit_error(c, sid, 3, 1, 400), ErrorCode::kSequencing);
  c.submit_response(sid, 0, 1, 400);
  EXPECT_EQ(submit_error(c, sid, 0, 1, 400), ErrorCode::kSequencing);
  EXPECT_EQ(submit_error(c, "missing", 0, 1, 400), ErrorCode::kNotFound);

  httplib::Client raw("127.0.0.1", port_);
  EXPECT_EQ(raw.Post("/api/sessions/" + sid + "/responses", "{not json", "application/json")->status, 400);
  EXPECT_EQ(raw.Post("/api/sessions/" + sid + "/responses", R"({"trial_index":1,"choice":"a","rt_ms":3})",
                     "application/json")
                ->status,
            400);
  EXPECT_EQ(raw.Post("/api/sessions", R"({})", "application/json")->status, 400);
  auto dup = raw.Post("/api/sessions/" + sid + "/responses", R"({"trial_index":0,"choice":1,"rt_ms":3})",
                      "application/json");
  EXPECT_EQ(dup->status, 409);
  EXPECT_EQ(Json::parse(dup->body)["error"], "sequencing");
  EXPECT_EQ(raw.Get("/api/sessions/zzz/trials/next")->status, 404);
  EXPECT_EQ(raw.Get("/api/stimuli/zzz.svg")->status, 404);
}

TEST_F(Http, StimulusSvgIsTheRenderedGlyph) {
  httplib::Client raw("127.0.0.1", port_);
  for (const char* id : {"b007", "s003"}) {
    auto res = raw.Get(std::string("/api/stimuli/") + id + ".svg");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/svg+xml");
    EXPECT_EQ(res->body, render_glyph(embedding_to_glyph(catalog_.at(id).embedding), 128));
  }
}

TEST_F(Http, ConcurrentSessions) {
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w)
    workers.emplace_back([this, w] {
      HttpClient c("127.0.0.1", port_);
      const auto sid = c.create_session("w" + std::to_string(w)).session_id;
      while (auto d = c.next_trial(sid)) c.submit_response(sid, d->trial_index, w, 300 + w);
    });
  for (auto& t : workers) t.join();
  const auto recs = service_->records();
  EXPECT_EQ(recs.size(), 1600u);
  std::map<std::string, int> expected_next;
  for (const auto& r : recs) {
    EXPECT_EQ(r.trial_index, expected_next[r.session_id]++);
  }
}

TEST(HttpMapping, StatusCodes) {
  EXPECT_EQ(http_status_for(ErrorCode::kValidation), 400);
  EXPECT_EQ(http_status_for(ErrorCode::kInputShape), 400);
  EXPECT_EQ(http_status_for(ErrorCode::kNotFound), 404);
  EXPECT_EQ(http_status_for(ErrorCode::kSequencing), 409);
  EXPECT_EQ(http_status_for(ErrorCode::kCapacity), 503);
  EXPECT_EQ(http_status_for(ErrorCode::kIo), 500);
  for (int c = 0; c <= static_cast<int>(ErrorCode::kIo); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    EXPECT_EQ(error_code_from_name(to_string(code)), code);
  }
}
