#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "../common/random_script.hpp"
#include "lifesat/service.hpp"

using namespace lifesat;
using namespace lifesat::service;
using namespace testing_helpers;
using io::json;

namespace {

service::SurveyService::Clock fixed_clock() {
  auto t = std::make_shared<long long>(1'800'000'000'000LL);
  return [t] { return Timestamp{std::chrono::milliseconds{*t += 250}}; };
}

json create_body(const RandomScript& s) {
  return {{"seed", std::to_string(s.seed)}, {"profile", io::to_json(s.profile)}};
}

// Back entries carry the service clock, not the script's.
json without_back_times(json record) {
  for (auto& e : record["transcript"]) {
    if (e["kind"] == "back") e.erase("timestamp");
  }
  return record;
}

std::string error_code(const Reply& r) { return r.body.at("error").at("code").get<std::string>(); }

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("lifesat-test-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("api and engine agree on 50 random transcripts") {
  SurveyService svc(ServiceConfig{}, fixed_clock());
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto script = random_script(1000 + k);
    const auto created = svc.create(create_body(script));
    REQUIRE(created.status == 201);
    const auto id = created.body.at("session_id").get<std::string>();
    CHECK(id == script.final_state.id);
    for (const auto& step : script.steps) {
      const auto r = step ? svc.respond(id, io::to_json(*step)) : svc.back(id);
      REQUIRE(r.status == 200);
    }
    const auto rec = svc.record(id);
    REQUIRE(rec.status == 200);
    CHECK(without_back_times(rec.body.at("record")).dump() ==
          without_back_times(io::to_json(script.final_state)).dump());
    CHECK(same_survey_state(io::session_from_json(rec.body.at("record")), script.final_state));
  }
  CHECK(svc.session_count() == 50);
}

TEST_CASE("error statuses") {
  SurveyService svc(ServiceConfig{}, fixed_clock());
  CHECK(svc.prompt("missing").status == 404);
  CHECK(error_code(svc.prompt("missing")) == "not_found");
  CHECK(svc.create(json::array()).status == 400);

  const auto script = random_script(7);
  const auto id = svc.create(create_body(script)).body.at("session_id").get<std::string>();
  const auto dup = svc.create(create_body(script));
  CHECK(dup.status == 409);
  CHECK(error_code(dup) == "duplicate_session");

  CHECK(svc.back(id).status == 409);  // nothing to undo
  CHECK(svc.respond(id, json{{"kind", "own_ls"}, {"value", "seven"}}).status == 400);
  CHECK(svc.respond(id, json{{"kind", "own_ls"}, {"value", 14}}).status == 400);
  CHECK(svc.respond(id, "not an object").status == 400);

  const auto p = svc.prompt(id);
  CHECK(p.status == 200);
  CHECK(p.body.at("schema_version") == 1);

  for (const auto& step : script.steps) step ? svc.respond(id, io::to_json(*step)) : svc.back(id);
  CHECK(svc.record(id).body.at("record").at("phase") == "done");
  const auto late = svc.respond(id, json{{"kind", "own_ls"}, {"value", 3}});
  CHECK(late.status == 409);
  const auto done = svc.prompt(id);
  CHECK(done.status == 409);
}

TEST_CASE("stale gamble answers are a sequencing conflict") {
  SurveyService svc(ServiceConfig{}, fixed_clock());
  const auto script = random_script(21);
  const auto id = svc.create(create_body(script)).body.at("session_id").get<std::string>();
  // walk until the first gamble prompt
  json prompt;
  for (int guard = 0; guard < 50; ++guard) {
    prompt = svc.prompt(id).body;
    if (prompt.at("kind") == "gamble") break;
    if (prompt.at("kind") == "own_life_satisfaction") {
      svc.respond(id, {{"kind", "own_ls"}, {"value", 5}});
    } else {
      const int v = std::string("ABCDE").find(prompt.at("state").get<std::string>()[0]) * -2 + 10;
      svc.respond(id, {{"kind", "rating"}, {"state", prompt.at("state")}, {"value", v}});
    }
  }
  REQUIRE(prompt.at("kind") == "gamble");
  const auto& g = prompt.at("gamble");
  json body = {{"kind", "choice"}, {"gamble", g.at("gamble")}, {"ladder_index", 3}, {"response", "accept"}};
  const auto r = svc.respond(id, body);
  CHECK(r.status == 409);
  CHECK(error_code(r) == "sequencing");
}

TEST_CASE("logs persist and reload") {
  TempDir dir;
  ServiceConfig cfg;
  cfg.data_dir = dir.path;
  const auto script = random_script(33);
  std::string id;
  json before;
  {
    SurveyService svc(cfg, fixed_clock());
    id = svc.create(create_body(script)).body.at("session_id").get<std::string>();
    for (const auto& step : script.steps) step ? svc.respond(id, io::to_json(*step)) : svc.back(id);
    before = svc.record(id).body.at("record");
  }
  CHECK(std::filesystem::exists(dir.path / (id + ".jsonl")));
  SurveyService again(cfg, fixed_clock());
  CHECK(again.session_count() == 1);
  CHECK(again.record(id).body.at("record").dump() == before.dump());

  // a torn last line loses only that event
  {
    std::ofstream out(dir.path / (id + ".jsonl"), std::ios::app);
    out << "{\"type\":\"event\",\"sess";
  }
  SurveyService torn(cfg, fixed_clock());
  CHECK(torn.record(id).body.at("record").dump() == before.dump());
}

TEST_CASE("http transport") {
  ServiceConfig cfg;
  cfg.token = "s3cret";
  cfg.seed_base = 500;
  SurveyService svc(cfg, fixed_clock());
  httplib::Server server;
  svc.bind(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  const httplib::Headers auth = {{"X-Api-Token", "s3cret"}};

  auto unauth = cli.Post("/sessions", "{}", "application/json");
  REQUIRE(unauth);
  CHECK(unauth->status == 401);

  auto made = cli.Post("/sessions", auth, R"({"profile": {"age_band": "25-34"}, "condition_override": "life_satisfaction_first"})", "application/json");
  REQUIRE(made);
  CHECK(made->status == 201);
  CHECK(made->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto body = json::parse(made->body);
  CHECK(body.at("seed") == "500");
  const auto id = body.at("session_id").get<std::string>();

  auto p = cli.Get("/sessions/" + id + "/prompt", auth);
  REQUIRE(p);
  CHECK(p->status == 200);
  CHECK(json::parse(p->body).at("schema_version") == 1);

  auto r = cli.Post("/sessions/" + id + "/responses", auth, R"({"kind": "own_ls", "value": 8})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(json::parse(r->body).at("transcript_length") == 1);

  auto bad = cli.Post("/sessions/" + id + "/responses", auth, "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  auto b = cli.Post("/sessions/" + id + "/back", auth, "", "application/json");
  REQUIRE(b);
  CHECK(b->status == 200);

  auto rec = cli.Get("/sessions/" + id + "/record", auth);
  REQUIRE(rec);
  CHECK(json::parse(rec->body).at("record").at("id") == id);

  auto nf = cli.Get("/sessions/nope/record", auth);
  REQUIRE(nf);
  CHECK(nf->status == 404);
  auto route = cli.Get("/elsewhere", auth);
  REQUIRE(route);
  CHECK(route->status == 404);

  server.stop();
  th.join();
}
