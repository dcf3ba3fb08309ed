#include "lifesat/service.hpp"

#include <fstream>
#include <iostream>
#include <random>

#include <httplib.h>

#include "lifesat/error.hpp"

namespace lifesat::service {

namespace {

using io::json;

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Sequencing:
    case ErrorCode::SessionComplete:
    case ErrorCode::EmptyHistory: return 409;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

Reply ok(json body, int status = 200) {
  body["schema_version"] = io::kSchemaVersion;
  return {status, std::move(body)};
}

json parse_body(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed JSON body: ") + e.what());
  }
}

template <class F>
Reply guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return error_reply(e);
  } catch (const json::exception& e) {
    return error_reply(Error(ErrorCode::Parse, e.what()));
  }
}

json state_summary(const SessionState& s, const EngineConfig& engine) {
  json out = {{"session_id", s.id},
              {"phase", to_string(content_phase(s))},
              {"transcript_length", s.transcript.size()}};
  out["prompt"] = content_phase(s) == Phase::Done ? json(nullptr) : io::to_json(next_prompt(s, engine));
  return out;
}

}  // namespace

ServiceConfig config_from_json(const json& j) {
  ServiceConfig c;
  if (!j.is_object()) throw Error(ErrorCode::Parse, "service config must be an object");
  if (j.contains("host")) c.host = j["host"].get<std::string>();
  if (j.contains("port")) c.port = j["port"].get<int>();
  if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
  if (j.contains("token") && !j["token"].is_null()) c.token = j["token"].get<std::string>();
  if (j.contains("condition_override") && !j["condition_override"].is_null()) {
    c.condition_override = parse_condition(j["condition_override"].get<std::string>());
  }
  if (j.contains("seed_base") && !j["seed_base"].is_null()) c.seed_base = j["seed_base"].get<std::uint64_t>();
  if (j.contains("engine")) c.engine = io::engine_config_from_json(j["engine"]);
  if (j.contains("quality")) c.quality = io::quality_config_from_json(j["quality"]);
  return c;
}

Reply error_reply(const Error& e) {
  return {status_for(e.code()),
          {{"schema_version", io::kSchemaVersion},
           {"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}};
}

SurveyService::SurveyService(ServiceConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
  if (!config_.data_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config_.data_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create data directory: " + ec.message());
    load_existing();
  }
}

Timestamp SurveyService::now() const {
  if (clock_) return clock_();
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::size_t SurveyService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

void SurveyService::load_existing() {
  for (const auto& entry : std::filesystem::directory_iterator(config_.data_dir)) {
    if (entry.path().extension() != ".jsonl") continue;
    std::ifstream in(entry.path());
    auto result = io::read_session_logs(in, entry.path().filename().string());
    for (const auto& msg : result.skipped) std::cerr << "skipped " << msg << '\n';
    for (auto& s : result.sessions) {
      auto slot = std::make_shared<Slot>();
      slot->state = std::move(s);
      sessions_[slot->state.id] = slot;
    }
  }
}

std::shared_ptr<SurveyService::Slot> SurveyService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
  return it->second;
}

void SurveyService::append_log(const Slot& slot, std::size_t first_new_entry, bool header) {
  if (config_.data_dir.empty()) return;
  const auto path = config_.data_dir / (slot.state.id + ".jsonl");
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  if (header) out << io::log_header_line(slot.state) << '\n';
  for (std::size_t i = first_new_entry; i < slot.state.transcript.size(); ++i) {
    out << io::log_event_line(slot.state.id, slot.state.transcript[i]) << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

Reply SurveyService::create(const json& body) {
  return guarded([&] {
    if (!body.is_object()) throw Error(ErrorCode::Parse, "body must be an object");
    std::uint64_t seed = 0;
    if (body.contains("seed") && !body["seed"].is_null()) {
      const auto& v = body["seed"];
      seed = v.is_string() ? std::stoull(v.get<std::string>()) : v.get<std::uint64_t>();
    } else if (config_.seed_base) {
      seed = *config_.seed_base + next_seed_.fetch_add(1);
    } else {
      std::random_device rd;
      seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    ParticipantProfile profile;
    if (body.contains("profile")) profile = io::profile_from_json(body["profile"]);
    auto override_ = config_.condition_override;
    if (body.contains("condition_override") && !body["condition_override"].is_null()) {
      override_ = parse_condition(body["condition_override"].get<std::string>());
    }

    auto slot = std::make_shared<Slot>();
    slot->state = create_session(profile, seed, override_);
    {
      std::unique_lock lock(sessions_mutex_);
      if (sessions_.contains(slot->state.id)) {
        return Reply{409,
                     {{"schema_version", io::kSchemaVersion},
                      {"error", {{"code", "duplicate_session"},
                                 {"message", "session " + slot->state.id + " already exists"}}}}};
      }
      sessions_[slot->state.id] = slot;
    }
    std::lock_guard guard(slot->mutex);
    append_log(*slot, 0, true);
    return ok({{"session_id", slot->state.id},
               {"condition", to_string(slot->state.condition)},
               {"seed", std::to_string(seed)}},
              201);
  });
}

Reply SurveyService::prompt(const std::string& id) {
  return guarded([&] {
    auto slot = find(id);
    std::lock_guard guard(slot->mutex);
    return ok(io::to_json(next_prompt(slot->state, config_.engine)));
  });
}

Reply SurveyService::respond(const std::string& id, const json& body) {
  return guarded([&] {
    auto slot = find(id);
    const SessionInput input = io::input_from_json(body, now());
    std::lock_guard guard(slot->mutex);
    const std::size_t before = slot->state.transcript.size();
    SessionState next = apply_input(slot->state, input);
    slot->state = std::move(next);
    append_log(*slot, before, false);
    return ok(state_summary(slot->state, config_.engine));
  });
}

Reply SurveyService::back(const std::string& id) {
  return guarded([&] {
    auto slot = find(id);
    std::lock_guard guard(slot->mutex);
    const std::size_t before = slot->state.transcript.size();
    SessionState next = go_back(slot->state, now());
    slot->state = std::move(next);
    append_log(*slot, before, false);
    return ok(state_summary(slot->state, config_.engine));
  });
}

Reply SurveyService::record(const std::string& id) {
  return guarded([&] {
    auto slot = find(id);
    std::lock_guard guard(slot->mutex);
    json rec = io::to_json(slot->state);
    json flags = json::array();
    for (auto f : quality_flags(slot->state, config_.quality)) flags.push_back(to_string(f));
    return ok({{"record", rec}, {"quality_flags", flags}});
  });
}

void SurveyService::bind(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  if (config_.token) {
    server.set_pre_routing_handler([this, send](const httplib::Request& req, httplib::Response& res) {
      if (req.method == "OPTIONS" || req.get_header_value("X-Api-Token") == *config_.token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      send(res, {401,
                 {{"schema_version", io::kSchemaVersion},
                  {"error", {{"code", "unauthorized"}, {"message", "missing or wrong X-Api-Token"}}}}});
      return httplib::Server::HandlerResponse::Handled;
    });
  }
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type, X-Api-Token"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, guarded([&] { return create(parse_body(req.body)); }));
  });
  server.Get(R"(/sessions/([^/]+)/prompt)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, prompt(req.matches[1]));
  });
  server.Post(R"(/sessions/([^/]+)/responses)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, guarded([&] { return respond(req.matches[1], parse_body(req.body)); }));
              });
  server.Post(R"(/sessions/([^/]+)/back)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, back(req.matches[1]));
  });
  server.Get(R"(/sessions/([^/]+)/record)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, record(req.matches[1]));
  });
  server.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    send(res, {res.status,
               {{"schema_version", io::kSchemaVersion},
                {"error", {{"code", res.status == 404 ? "not_found" : "http_error"},
                           {"message", "no such endpoint"}}}}});
  });
}

int serve(const ServiceConfig& config) {
  SurveyService service(config);
  httplib::Server server;
  service.bind(server);
  std::cerr << "listening on " << config.host << ':' << config.port << " with "
            << service.session_count() << " stored sessions\n";
  if (!server.listen(config.host, config.port)) {
    std::cerr << "cannot listen on " << config.host << ':' << config.port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lifesat::service
