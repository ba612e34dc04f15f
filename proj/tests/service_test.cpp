#include <gtest/gtest.h>

#include <thread>

#include "pclkit/io.hpp"
#include "pclkit/service.hpp"
#include "stub_server.hpp"
#include "test_support.hpp"

using namespace pclkit;
using nlohmann::json;

namespace {

LabelRecord rec(const std::string& doc, bool pcl) {
  LabelRecord r;
  r.doc_id = doc;
  r.pcl = pcl;
  if (pcl) {
    r.subcategories = {Subcategory::PREJUDICE};
    r.intensity = Intensity::MODERATE;
  }
  return r;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::vector<Document> docs;
    for (int i = 0; i < 12; ++i) {
      Document d;
      d.id = "doc-" + std::to_string(10 + i);
      d.text = "text " + std::to_string(i);
      d.language = i % 2 ? Language::ZH : Language::EN;
      docs.push_back(d);
    }
    state = create_session("s1", docs,
                           {{"alice", AnnotatorRole::PRIMARY}, {"bob", AnnotatorRole::PRIMARY},
                            {"carol", AnnotatorRole::PRIMARY}, {"pat", AnnotatorRole::PROOFREADER}},
                           17);
    std::filesystem::create_directories(dir / "sessions");
    save_session(state, session_path(dir / "sessions", "s1"));
    config.sessions_dir = dir / "sessions";
    config.runs_dir = dir / "runs";
    config.batch_size = 3;
    service = std::make_unique<AnnotationService>(
        config, std::vector<ApiToken>{{"ta", "alice", ApiRole::PRIMARY},
                                      {"tb", "bob", ApiRole::PRIMARY},
                                      {"tc", "carol", ApiRole::PRIMARY},
                                      {"tp", "pat", ApiRole::PROOFREADER},
                                      {"tx", "root", ApiRole::ADMIN}});
    service->attach(stub.server());
    stub.start();
  }

  httplib::Client client(const std::string& token = "") {
    httplib::Client c("127.0.0.1", stub.port());
    if (!token.empty()) c.set_bearer_token_auth(token);
    return c;
  }

  httplib::Result post(const std::string& token, const std::string& path, const json& body) {
    return client(token).Post(path, body.dump(), "application/json");
  }

  httplib::Result submit(const std::string& token, const std::string& doc, bool pcl) {
    return post(token, "/api/labels", {{"session", "s1"}, {"doc_id", doc}, {"record", rec(doc, pcl)}});
  }

  std::string token_of(const std::string& annotator) { return std::string("t") + annotator[0]; }

  /// Fills both submissions of every doc; even-indexed docs disagree.
  void label_everything() {
    int i = 0;
    for (const auto& d : state.docs) {
      const auto& pair = state.assignment.at(d.id);
      ASSERT_EQ(submit(token_of(pair[0]), d.id, true)->status, 200);
      ASSERT_EQ(submit(token_of(pair[1]), d.id, i++ % 2 == 1)->status, 200);
    }
  }

  test::TempDir dir;
  SessionState state;
  ServiceConfig config;
  std::unique_ptr<AnnotationService> service;
  test::StubServer stub;
};

}  // namespace

TEST_F(ServiceTest, AuthenticationAndRoles) {
  EXPECT_EQ(client().Get("/api/tasks/next?annotator=alice&session=s1")->status, 401);
  EXPECT_EQ(client("wrong").Get("/api/tasks/next?annotator=alice&session=s1")->status, 401);
  EXPECT_EQ(client("tb").Get("/api/tasks/next?annotator=alice&session=s1")->status, 403);
  EXPECT_EQ(client("tx").Get("/api/tasks/next?annotator=alice&session=s1")->status, 200);
  EXPECT_EQ(client("ta").Get("/api/adjudication?session=s1")->status, 403);
  EXPECT_EQ(post("ta", "/api/admin/lock", {{"session", "s1"}})->status, 403);
  EXPECT_EQ(post("tp", "/api/labels", {{"session", "s1"}, {"doc_id", "doc-10"}, {"record", rec("doc-10", true)}})
                ->status,
            403);
}

TEST_F(ServiceTest, StatusCodesForSessionErrors) {
  EXPECT_EQ(client("ta").Get("/api/tasks/next?annotator=alice&session=nope")->status, 404);
  EXPECT_EQ(client("ta").Get("/api/tasks/next?annotator=alice&session=..%2Fx")->status, 400);
  EXPECT_EQ(submit("ta", "doc-missing", true)->status, 404);

  std::string unassigned;
  for (const auto& d : state.docs)
    if (!state.is_assigned(d.id, "alice")) unassigned = d.id;
  ASSERT_FALSE(unassigned.empty());
  EXPECT_EQ(submit("ta", unassigned, true)->status, 403);

  const auto& doc = state.docs[0].id;
  const auto who = token_of(state.assignment.at(doc)[0]);
  json bad = rec(doc, true);
  bad["subcategories"] = json::array();
  auto r = post(who, "/api/labels", {{"session", "s1"}, {"doc_id", doc}, {"record", bad}});
  EXPECT_EQ(r->status, 422);
  auto body = json::parse(r->body);
  EXPECT_FALSE(body.at("errors").empty());
  EXPECT_EQ(post(who, "/api/labels", {{"session", "s1"}, {"doc_id", doc}})->status, 422);
  EXPECT_EQ(client(who).Post("/api/labels", "{oops", "application/json")->status, 400);

  EXPECT_EQ(post("tp", "/api/adjudication/resolve", {{"session", "s1"}, {"doc_id", doc}, {"record", rec(doc, true)}})
                ->status,
            409);
  EXPECT_EQ(post("tx", "/api/admin/lock", {{"session", "s1"}})->status, 200);
  EXPECT_EQ(submit(who, doc, true)->status, 409);
}

TEST_F(ServiceTest, NextTaskPayloadAndExhaustion) {
  auto r = client("ta").Get("/api/tasks/next?annotator=alice&session=s1");
  ASSERT_EQ(r->status, 200);
  auto body = json::parse(r->body);
  const auto first = body.at("doc").at("id").get<std::string>();
  EXPECT_EQ(first, *next_task(state, "alice"));
  EXPECT_EQ(body.at("progress").at("assigned"), state.workload("alice"));
  EXPECT_EQ(body.at("batch").at("size"), 3);
  EXPECT_TRUE(body.at("layer_schema").is_array());

  // Concurrent reads see the same task.
  std::vector<std::string> seen(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < seen.size(); ++i)
    threads.emplace_back([&, i] {
      auto res = client("ta").Get("/api/tasks/next?annotator=alice&session=s1");
      seen[i] = json::parse(res->body).at("doc").at("id").get<std::string>();
    });
  for (auto& t : threads) t.join();
  for (const auto& s : seen) EXPECT_EQ(s, first);

  for (const auto& d : state.docs)
    if (state.is_assigned(d.id, "alice")) ASSERT_EQ(submit("ta", d.id, false)->status, 200);
  EXPECT_EQ(client("ta").Get("/api/tasks/next?annotator=alice&session=s1")->status, 204);
}

TEST_F(ServiceTest, ReplayIsIdempotentAndPersisted) {
  const auto& doc = state.docs[0].id;
  const auto who = token_of(state.assignment.at(doc)[0]);
  auto a = submit(who, doc, true);
  auto b = submit(who, doc, true);
  ASSERT_EQ(a->status, 200);
  EXPECT_EQ(a->body, b->body);
  auto on_disk = load_session(session_path(config.sessions_dir, "s1"));
  EXPECT_EQ(on_disk.submissions.size(), 1u);
  EXPECT_EQ(on_disk, service->snapshot("s1"));
}

TEST_F(ServiceTest, ConcurrentDoubleSubmitKeepsBothLabels) {
  std::vector<std::thread> threads;
  for (const auto& d : state.docs)
    for (const auto& who : state.assignment.at(d.id))
      threads.emplace_back([&, doc = d.id, who] {
        auto r = submit(token_of(who), doc, who == "alice");
        EXPECT_TRUE(r) << httplib::to_string(r.error());
        if (r) EXPECT_EQ(r->status, 200) << r->body;
      });
  for (auto& t : threads) t.join();
  auto end = load_session(session_path(config.sessions_dir, "s1"));
  EXPECT_EQ(end.submissions.size(), 2 * state.docs.size());
  EXPECT_EQ(end.assignment, state.assignment);
  for (const auto& [key, r] : end.submissions) EXPECT_TRUE(state.is_assigned(key.first, key.second));
}

TEST_F(ServiceTest, AdjudicationPagingAndResolve) {
  label_everything();
  auto full = json::parse(client("tp").Get("/api/adjudication?session=s1")->body);
  ASSERT_EQ(full.at("items").size(), 6u);
  EXPECT_TRUE(full.at("next_cursor").is_null());
  for (std::size_t limit : {1u, 4u, 6u, 10u}) {
    json concat = json::array();
    std::string cursor;
    for (int guard = 0; guard < 20; ++guard) {
      std::string path = "/api/adjudication?session=s1&limit=" + std::to_string(limit);
      if (!cursor.empty()) path += "&cursor=" + cursor;
      auto page = json::parse(client("tx").Get(path)->body);
      for (auto& item : page.at("items")) concat.push_back(item);
      if (page.at("next_cursor").is_null()) break;
      cursor = page.at("next_cursor").get<std::string>();
    }
    EXPECT_EQ(concat, full.at("items")) << "limit " << limit;
  }
  EXPECT_EQ(client("tp").Get("/api/adjudication?session=s1&cursor=zzz")->status, 400);

  const auto doc = full.at("items")[0].at("doc_id").get<std::string>();
  auto r = post("tp", "/api/adjudication/resolve", {{"session", "s1"}, {"doc_id", doc}, {"record", rec(doc, true)}});
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body).at("record").at("round"), "PROOFREAD");
  auto after = json::parse(client("tp").Get("/api/adjudication?session=s1")->body);
  EXPECT_EQ(after.at("items").size(), 5u);
}

TEST_F(ServiceTest, ReportsServeLibraryBytes) {
  EXPECT_EQ(client("ta").Get("/api/reports/iaa?session=s1")->status, 409);
  label_everything();
  auto iaa = client("ta").Get("/api/reports/iaa?session=s1");
  ASSERT_EQ(iaa->status, 200);
  EXPECT_EQ(iaa->body, iaa_summary(compute_iaa(service->snapshot("s1"))));

  EXPECT_EQ(client("ta").Get("/api/reports/eval?run=r1")->status, 404);
  std::filesystem::create_directories(config.runs_dir / "r1");
  write_file_atomic(config.runs_dir / "r1" / "eval_summary.json", "{\"macro\":1}\n");
  auto ev = client("ta").Get("/api/reports/eval?run=r1");
  ASSERT_EQ(ev->status, 200);
  EXPECT_EQ(ev->body, "{\"macro\":1}\n");
}

TEST(Tokens, LoadSkipsCommentsAndRejectsBadRoles) {
  test::TempDir dir;
  write_file_atomic(dir / "t.tsv", "# token\tannotator\trole\nabc\talice\tPRIMARY\nxyz\troot\tADMIN\n");
  auto tokens = load_tokens(dir / "t.tsv");
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_EQ(tokens[1].role, ApiRole::ADMIN);
  write_file_atomic(dir / "bad.tsv", "abc\talice\tOWNER\n");
  EXPECT_THROW(load_tokens(dir / "bad.tsv"), Error);
}
