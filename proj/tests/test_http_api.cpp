#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "support/fixtures.hpp"
#include "support/http_harness.hpp"
#include "xaitrust/http_api.hpp"
#include "xaitrust/ingest.hpp"

using namespace xtrust;
using nlohmann::json;

namespace {

StudyConfig blinded_config() {
  StudyConfig c;
  c.study_id = "blind";
  c.seed = 9;
  c.thresholds = {0.5, 0.9};
  for (int i = 0; i < 6; ++i) {
    StudyItem it;
    it.item_id = "img" + std::to_string(i);
    it.image_ref = "img" + std::to_string(i) + ".png";
    it.predicted_label = "covid";
    it.true_label = i % 2 ? "covid" : "SECRET-normal";
    it.saliency = SaliencyMap(3, 1, {0, double(i), 9});
    c.items.push_back(it);
  }
  c.shared_items = {"img0", "img1"};
  c.assignment = {{"r1", {"img2", "img3"}}, {"r2", {"img4", "img5"}}};
  c.questionnaire = {{"q1", "Did the overlay help?", "img0"}};
  return c;
}

// No key naming ground truth or correctness, and no hidden label value.
void expect_blind(const std::string& body) {
  EXPECT_EQ(body.find("SECRET"), std::string::npos) << body;
  const std::function<void(const json&)> walk = [&](const json& j) {
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) {
        for (const char* banned : {"true_label", "correct", "outcome", "truth", "cell"})
          EXPECT_EQ(k.find(banned), std::string::npos) << "key " << k << " in " << body;
        walk(v);
      }
    } else if (j.is_array()) {
      for (const auto& v : j) walk(v);
    }
  };
  walk(json::parse(body));
}

}  // namespace

TEST(Http, FullFlowAndBlinding) {
  harness::Server srv;
  auto& cli = srv.client();

  auto res = cli.Post("/studies", to_json(blinded_config()).dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(json::parse(res->body)["study_id"], "blind");

  res = cli.Post("/studies/blind/sessions", R"({"user":"r1"})", "application/json");
  ASSERT_EQ(res->status, 201);
  expect_blind(res->body);
  const std::string sid = json::parse(res->body)["session_id"];
  EXPECT_EQ(json::parse(res->body)["queue_length"], 8);

  res = cli.Post("/studies/blind/sessions", R"({"user":"r1"})", "application/json");
  EXPECT_EQ(res->status, 200);
  EXPECT_TRUE(json::parse(res->body)["resumed"].get<bool>());
  expect_blind(res->body);

  for (int i = 0;; ++i) {
    res = cli.Get("/sessions/" + sid + "/next");
    ASSERT_EQ(res->status, 200);
    expect_blind(res->body);
    const auto next = json::parse(res->body);
    if (next["status"] == "completed") {
      EXPECT_EQ(i, 8);
      EXPECT_EQ(next["questionnaire"][0]["prompt"], "Did the overlay help?");
      break;
    }
    EXPECT_EQ(next["position"], i);
    EXPECT_EQ(next["mask"]["width"], 3);
    EXPECT_EQ(next["mask"]["rows"].size(), 1u);
    json d = {{"item", next["item_id"]}, {"trusted", i % 3 == 0}, {"position", i},
              {"threshold", next["threshold"]}};
    res = cli.Post("/sessions/" + sid + "/decisions", d.dump(), "application/json");
    ASSERT_EQ(res->status, 200) << res->body;
    expect_blind(res->body);
    EXPECT_EQ(json::parse(res->body)["status"], "recorded");
    // replay of the same request is acknowledged, not recorded twice
    res = cli.Post("/sessions/" + sid + "/decisions", d.dump(), "application/json");
    EXPECT_EQ(json::parse(res->body)["status"], "duplicate");
    expect_blind(res->body);
  }

  res = cli.Post("/studies/blind/questionnaire",
                 R"({"user":"r1","answers":[{"question":"q1","answer":"yes"}]})", "application/json");
  EXPECT_EQ(res->status, 200);
  expect_blind(res->body);
  res = cli.Post("/studies/blind/questionnaire",
                 R"({"user":"r1","answers":[{"question":"q1","answer":"no"}]})", "application/json");
  EXPECT_EQ(res->status, 409);
  expect_blind(res->body);

  res = cli.Get("/studies/blind/report?user=r1");
  ASSERT_EQ(res->status, 200);
  const auto report = json::parse(res->body);
  EXPECT_EQ(report["study"], "blind");
  EXPECT_EQ(report["filter"]["user"], "r1");
  EXPECT_EQ(report["report"]["total"], 8);

  res = cli.Get("/studies/blind/log");
  ASSERT_EQ(res->status, 200);
  const auto loaded = load_event_log(res->body);
  EXPECT_EQ(loaded.records.size(), 8u);
  EXPECT_EQ(loaded.only_study().answers().size(), 1u);
}

TEST(Http, ErrorStatuses) {
  harness::Server srv;
  auto& cli = srv.client();
  auto res = cli.Post("/studies", "{nope", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"], "bad_request");

  auto bad = to_json(blinded_config());
  bad["shared_items"].push_back("ghost");
  res = cli.Post("/studies", bad.dump(), "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_FALSE(json::parse(res->body)["violations"].empty());

  ASSERT_EQ(cli.Post("/studies", to_json(blinded_config()).dump(), "application/json")->status, 201);
  EXPECT_EQ(cli.Post("/studies", to_json(blinded_config()).dump(), "application/json")->status, 409);
  EXPECT_EQ(cli.Post("/studies/none/sessions", R"({"user":"r1"})", "application/json")->status, 404);
  EXPECT_EQ(cli.Post("/studies/blind/sessions", R"({})", "application/json")->status, 400);
  EXPECT_EQ(cli.Get("/sessions/s-none/next")->status, 404);
  EXPECT_EQ(cli.Get("/studies/blind/report?user=ghost")->status, 404);
  EXPECT_EQ(cli.Get("/studies/blind/report?threshold=high")->status, 400);
  EXPECT_EQ(cli.Get("/studies/blind/report?color=red")->status, 400);
  EXPECT_EQ(cli.Get("/studies/none/log")->status, 404);

  const std::string sid =
      json::parse(cli.Post("/studies/blind/sessions", R"({"user":"r2"})", "application/json")->body)["session_id"];
  EXPECT_EQ(cli.Post("/sessions/" + sid + "/decisions", R"({"item":"img4"})", "application/json")->status, 400);
  res = cli.Post("/sessions/" + sid + "/decisions", R"({"item":"nope","trusted":true})", "application/json");
  EXPECT_EQ(res->status, 409);
  expect_blind(res->body);
  EXPECT_EQ(cli.Post("/studies/blind/questionnaire",
                     R"({"user":"r2","answers":[{"question":"q1","answer":"maybe"}]})", "application/json")
                ->status,
            400);
}

TEST(Http, ReportFilterParsing) {
  httplib::Params p = {{"user", "u"}, {"shared_only", "true"}, {"threshold", "0.75"}};
  const auto f = parse_report_filter(p);
  EXPECT_EQ(*f.user_id, "u");
  EXPECT_TRUE(f.shared_only);
  EXPECT_EQ(*f.threshold, 0.75);
  EXPECT_FALSE(parse_report_filter({{"shared_only", "0"}}).shared_only);
  EXPECT_THROW(parse_report_filter({{"shared_only", "perhaps"}}), ServiceError);
}

TEST(Http, ImageMount) {
  const auto dir = std::filesystem::temp_directory_path() / "xaitrust-images-test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "img0.png") << "PNGDATA";
  HttpOptions o;
  o.image_dir = dir;
  harness::Server srv(o);
  auto res = srv.client().Get("/images/img0.png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "PNGDATA");
  std::filesystem::remove_all(dir);
}

TEST(Http, ReportMatchesService) {
  harness::Server srv;
  const auto plan = fixtures::table5_plan();
  srv.service().create_study(plan.config);
  fixtures::drive(srv.service(), plan);
  const auto res = srv.client().Get("/studies/" + plan.config.study_id + "/report?user=usr1&shared_only=true");
  ASSERT_EQ(res->status, 200);
  ReportFilter f;
  f.user_id = "usr1";
  f.shared_only = true;
  const auto r = srv.service().get_report(plan.config.study_id, f);
  const auto j = json::parse(res->body)["report"];
  EXPECT_EQ(j["tt"], r.matrix.tt);
  EXPECT_EQ(j["f1"].get<double>(), r.f1);
  EXPECT_EQ(j["precision"].get<double>(), r.precision);
}
