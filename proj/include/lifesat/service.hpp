#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "lifesat/engine.hpp"
#include "lifesat/error.hpp"
#include "lifesat/io.hpp"

namespace httplib {
class Server;
}

namespace lifesat::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir;  // empty: in-memory only
  EngineConfig engine = EngineConfig::defaults();
  QualityConfig quality;
  std::optional<SessionCondition> condition_override;
  std::optional<std::string> token;  // required X-Api-Token value when set
  // Seeds for sessions created without one; absent draws from the OS.
  std::optional<std::uint64_t> seed_base;
};

// Reads {"port", "host", "data_dir", "token", "condition_override",
// "seed_base", "engine": {...}, "quality": {...}}; missing keys keep defaults.
ServiceConfig config_from_json(const io::json& j);

struct Reply {
  int status = 200;
  io::json body;
};

// Maps an error to its HTTP status and {"schema_version", "error": {code, message}}.
Reply error_reply(const Error& e);

// The API without the transport, so it can be driven directly in tests.
class SurveyService {
 public:
  using Clock = std::function<Timestamp()>;

  explicit SurveyService(ServiceConfig config, Clock clock = {});

  Reply create(const io::json& body);
  Reply prompt(const std::string& id);
  Reply respond(const std::string& id, const io::json& body);
  Reply back(const std::string& id);
  Reply record(const std::string& id);

  // Attaches the routes; checks the token when one is configured.
  void bind(httplib::Server& server);

  std::size_t session_count() const;

 private:
  struct Slot {
    std::mutex mutex;
    SessionState state;
  };

  std::shared_ptr<Slot> find(const std::string& id) const;
  void append_log(const Slot& slot, std::size_t first_new_entry, bool header);
  void load_existing();
  Timestamp now() const;

  ServiceConfig config_;
  Clock clock_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::atomic<std::uint64_t> next_seed_{0};
};

// Blocks until the server stops.
int serve(const ServiceConfig& config);

}  // namespace lifesat::service
