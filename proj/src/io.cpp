#include "lifesat/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "lifesat/error.hpp"

namespace lifesat::io {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::Parse, msg); }

json num(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

double get_num(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (!j.is_number()) fail("expected a number");
  return j.get<double>();
}

template <class T>
json opt(const std::optional<T>& v) {
  if (!v) return nullptr;
  return to_json(*v);
}

const json& at(const json& j, const char* key) {
  if (!j.is_object()) fail(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

bool present(const json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && !it->is_null();
}

std::string str(const json& j, const char* key) {
  const json& v = at(j, key);
  if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

int integer(const json& j, const char* key) {
  const json& v = at(j, key);
  if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

std::uint64_t parse_seed(const json& v) {
  if (v.is_number_unsigned() || v.is_number_integer()) return v.get<std::uint64_t>();
  if (!v.is_string()) fail("seed must be an integer or a decimal string");
  const auto s = v.get<std::string>();
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail("bad seed '" + s + "'");
  return out;
}

json state_map(const std::map<LifeState, double>& m) {
  json out = json::object();
  for (const auto& [s, v] : m) out[std::string(to_string(s))] = num(v);
  return out;
}

std::map<LifeState, double> state_map_from(const json& j) {
  std::map<LifeState, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[parse_life_state(it.key())] = get_num(it.value());
  return out;
}

json int_state_map(const std::map<LifeState, int>& m) {
  json out = json::object();
  for (const auto& [s, v] : m) out[std::string(to_string(s))] = v;
  return out;
}

std::map<LifeState, int> int_state_map_from(const json& j) {
  std::map<LifeState, int> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer()) fail("rating must be an integer");
    out[parse_life_state(it.key())] = it.value().get<int>();
  }
  return out;
}

// Runs a parse step and rethrows any failure as a Parse error with context.
template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Version) throw;
    throw Error(ErrorCode::Parse, what + ": " + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, what + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    fail("bad number '" + std::string(text) + "'");
  }
  return out;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss<milliseconds> tod{t - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0, used = 0;
  const std::string t(text);
  if (std::sscanf(t.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &s, &used) != 6) {
    fail("bad timestamp '" + t + "'");
  }
  std::string_view rest = text.substr(static_cast<std::size_t>(used));
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    int digits = 0;
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
      if (digits < 3) ms = ms * 10 + (rest.front() - '0');
      ++digits;
      rest.remove_prefix(1);
    }
    if (digits == 0) fail("bad timestamp '" + t + "'");
    for (int i = digits; i < 3; ++i) ms *= 10;
  }
  if (rest != "Z" && rest != "+00:00") fail("timestamp must be UTC: '" + t + "'");
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) fail("bad timestamp '" + t + "'");
  return Timestamp{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{s} +
                   milliseconds{ms}};
}

void require_schema(const json& j, std::string_view what) {
  if (!j.is_object() || !j.contains("schema_version")) {
    fail(std::string(what) + ": missing schema_version");
  }
  const json& v = j["schema_version"];
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::Version, std::string(what) + ": schema_version " + v.dump() +
                                        " is not supported (expected " +
                                        std::to_string(kSchemaVersion) + ")");
  }
}

json to_json(const ParticipantProfile& p) {
  return {{"age_band", p.age_band},
          {"sex", p.sex},
          {"party", p.party},
          {"bsa_items", p.bsa_items},
          {"left_right", p.left_right},
          {"attention_checks_failed", p.attention_checks_failed},
          {"completion_seconds", num(p.completion_seconds)}};
}

ParticipantProfile profile_from_json(const json& j) {
  ParticipantProfile p;
  if (!j.is_object()) fail("profile must be an object");
  if (present(j, "age_band")) p.age_band = str(j, "age_band");
  if (present(j, "sex")) p.sex = str(j, "sex");
  if (present(j, "party")) p.party = str(j, "party");
  if (present(j, "bsa_items")) {
    const auto& items = j["bsa_items"];
    if (!items.is_array() || items.size() != 5) fail("bsa_items must hold five integers");
    for (std::size_t i = 0; i < 5; ++i) p.bsa_items[i] = items[i].get<int>();
  }
  if (present(j, "left_right")) p.left_right = integer(j, "left_right");
  if (present(j, "attention_checks_failed")) {
    p.attention_checks_failed = integer(j, "attention_checks_failed");
  }
  if (present(j, "completion_seconds")) p.completion_seconds = get_num(j["completion_seconds"]);
  return p;
}

json to_json(const GambleSpec& g) {
  return {{"baseline", to_string(g.baseline)}, {"win", to_string(g.win)},
          {"lose", to_string(g.lose)},         {"context", to_string(g.context)},
          {"block", to_string(g.block)},       {"basis", to_string(g.basis)}};
}

GambleSpec gamble_from_json(const json& j) {
  GambleSpec g;
  g.baseline = parse_life_state(str(j, "baseline"));
  g.win = parse_life_state(str(j, "win"));
  g.lose = parse_life_state(str(j, "lose"));
  g.context = parse_context(str(j, "context"));
  g.block = parse_block(str(j, "block"));
  g.basis = parse_basis(str(j, "basis"));
  return g;
}

json to_json(const IndifferenceBracket& b) {
  json out = {{"status", b.is_resolved() ? "resolved" : "undecidable"}};
  if (b.is_resolved()) {
    out["accepted_rung"] = b.accepted_rung ? json(*b.accepted_rung) : json(nullptr);
    out["rejected_rung"] = b.rejected_rung ? json(*b.rejected_rung) : json(nullptr);
    out["highest_accepted"] = b.highest_accepted();
    out["lowest_rejected"] = b.lowest_rejected();
  }
  return out;
}

IndifferenceBracket bracket_from_json(const json& j) {
  const auto status = str(j, "status");
  if (status == "undecidable") return IndifferenceBracket::undecidable();
  if (status != "resolved") fail("unknown bracket status '" + status + "'");
  auto rung = [&](const char* key) -> std::optional<std::size_t> {
    if (!present(j, key)) return std::nullopt;
    const auto r = at(j, key).get<std::size_t>();
    if (r >= ladder::kRungs) fail("rung out of range");
    return r;
  };
  return IndifferenceBracket::resolved(rung("accepted_rung"), rung("rejected_rung"));
}

json to_json(const TranscriptEntry& e) {
  json out = {{"seq", e.seq}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, OwnRatingInput>) {
          out["kind"] = "own_ls";
          out["value"] = p.value;
        } else if constexpr (std::is_same_v<T, VignetteInput>) {
          out["kind"] = "rating";
          out["state"] = to_string(p.state);
          out["value"] = p.value;
          if (p.explanation) out["explanation"] = *p.explanation;
        } else if constexpr (std::is_same_v<T, ChoiceEvent>) {
          out["kind"] = "choice";
          out["gamble"] = to_json(p.gamble);
          out["ladder_index"] = p.ladder_index;
          out["response"] = to_string(p.response);
        } else {
          out["kind"] = "back";
          out["reverted_seq"] = p.reverted_seq;
        }
        out["timestamp"] = format_timestamp(p.timestamp);
      },
      e.payload);
  return out;
}

SessionInput input_from_json(const json& j, Timestamp now) {
  const auto kind = str(j, "kind");
  const Timestamp t = present(j, "timestamp") ? parse_timestamp(str(j, "timestamp")) : now;
  if (kind == "own_ls") return OwnRatingInput{integer(j, "value"), t};
  if (kind == "rating") {
    VignetteInput v;
    v.state = parse_life_state(str(j, "state"));
    v.value = integer(j, "value");
    if (present(j, "explanation")) v.explanation = str(j, "explanation");
    v.timestamp = t;
    return v;
  }
  if (kind == "choice") {
    ChoiceEvent c;
    c.gamble = gamble_from_json(at(j, "gamble"));
    const json& idx = at(j, "ladder_index");
    if (!idx.is_number_unsigned() && !idx.is_number_integer()) fail("ladder_index must be an integer");
    if (idx.get<long long>() < 0) fail("ladder_index must be non-negative");
    c.ladder_index = idx.get<std::size_t>();
    c.response = parse_response(str(j, "response"));
    c.timestamp = t;
    return c;
  }
  fail("unknown response kind '" + kind + "'");
}

json to_json(const SessionInput& input) {
  TranscriptEntry e;
  std::visit([&](const auto& p) { e.payload = p; }, input);
  json out = to_json(e);
  out.erase("seq");
  return out;
}

TranscriptEntry transcript_entry_from_json(const json& j) {
  TranscriptEntry e;
  e.seq = at(j, "seq").get<std::size_t>();
  if (str(j, "kind") == "back") {
    e.payload = Revision{at(j, "reverted_seq").get<std::size_t>(), parse_timestamp(str(j, "timestamp"))};
    return e;
  }
  if (!present(j, "timestamp")) fail("transcript entry without timestamp");
  std::visit([&](const auto& p) { e.payload = p; }, input_from_json(j, Timestamp{}));
  return e;
}

json to_json(const Prompt& p) {
  json out = {{"schema_version", kSchemaVersion}, {"kind", to_string(p.kind)}, {"phase", to_string(p.phase)}};
  if (p.state) out["state"] = to_string(*p.state);
  if (p.own_ls) out["own_ls"] = *p.own_ls;
  if (!p.violations.empty()) {
    json v = json::array();
    for (const auto& [lo, hi] : p.violations) v.push_back({{"lower", to_string(lo)}, {"higher", to_string(hi)}});
    out["violations"] = v;
  }
  if (p.gamble) {
    const auto& g = *p.gamble;
    json gj = {{"queue_index", g.queue_index},
               {"gamble", to_json(g.gamble)},
               {"ladder_index", g.ladder_index},
               {"probability", g.probability},
               {"denominator", ladder::kDenominators[g.ladder_index]},
               {"pictogram",
                {{"numerator", g.pictogram.numerator},
                 {"denominator", g.pictogram.denominator},
                 {"icons", g.pictogram.icons},
                 {"highlighted", g.pictogram.highlighted},
                 {"caption", g.pictogram.caption}}},
               {"comparator", g.comparator},
               {"baseline_label", g.baseline_label},
               {"win_label", g.win_label},
               {"lose_label", g.lose_label},
               {"changed_fields", g.changed_fields},
               {"collapsed",
                {{"previous_rungs", g.collapsed_previous_rungs},
                 {"ratings", int_state_map(g.collapsed_ratings)}}}};
    if (g.societal_reminder) gj["societal_reminder"] = *g.societal_reminder;
    out["gamble"] = gj;
  }
  return out;
}

json to_json(const SessionState& s) {
  json out = {{"schema_version", kSchemaVersion},
              {"id", s.id},
              {"seed", std::to_string(s.seed)},
              {"condition", to_string(s.condition)},
              {"condition_override", s.condition_override ? json(to_string(*s.condition_override)) : json(nullptr)},
              {"profile", to_json(s.profile)},
              {"phase", to_string(s.phase)},
              {"own_ls", s.own_ls ? json(*s.own_ls) : json(nullptr)},
              {"ratings", int_state_map(s.ratings.ratings)},
              {"order_violation", s.order_violation}};
  json expl = json::object();
  for (const auto& [st, text] : s.ratings.explanations) expl[std::string(to_string(st))] = text;
  out["explanations"] = expl;
  json queue = json::array();
  for (const auto& g : s.gamble_queue) queue.push_back(to_json(g));
  out["gamble_queue"] = queue;
  json brackets = json::array();
  for (const auto& b : s.brackets) brackets.push_back(b ? to_json(*b) : json(nullptr));
  out["brackets"] = brackets;
  if (s.active) {
    out["active"] = {{"queue_index", s.active->queue_index},
                     {"ladder_index", s.active->ladder_index},
                     {"consecutive_cant_choose", s.active->consecutive_cant_choose},
                     {"last_rejected_rung", s.active->last_rejected_rung
                                                ? json(*s.active->last_rejected_rung)
                                                : json(nullptr)}};
  } else {
    out["active"] = nullptr;
  }
  json transcript = json::array();
  for (const auto& e : s.transcript) transcript.push_back(to_json(e));
  out["transcript"] = transcript;
  return out;
}

SessionState session_from_json(const json& j) {
  require_schema(j, "session record");
  return guarded("session record", [&] {
    const auto id = str(j, "id");
    const auto seed = parse_seed(at(j, "seed"));
    std::optional<SessionCondition> override_;
    if (present(j, "condition_override")) override_ = parse_condition(str(j, "condition_override"));
    const auto profile = profile_from_json(at(j, "profile"));
    std::vector<TranscriptEntry> transcript;
    for (const auto& e : at(j, "transcript")) transcript.push_back(transcript_entry_from_json(e));
    SessionState s = replay(id, profile, seed, override_, transcript);
    // The derived fields must agree with what the record claims.
    json derived = to_json(s);
    for (const char* key : {"condition", "phase", "own_ls", "ratings", "explanations",
                            "order_violation", "gamble_queue", "brackets", "active"}) {
      if (j.contains(key) && j[key] != derived[key]) {
        fail(std::string("field '") + key + "' disagrees with the replayed transcript");
      }
    }
    return s;
  });
}

std::string log_header_line(const SessionState& s) {
  json h = {{"type", "session"},
            {"schema_version", kSchemaVersion},
            {"id", s.id},
            {"seed", std::to_string(s.seed)},
            {"condition_override", s.condition_override ? json(to_string(*s.condition_override)) : json(nullptr)},
            {"profile", to_json(s.profile)}};
  return h.dump();
}

std::string log_event_line(const std::string& session_id, const TranscriptEntry& e) {
  json line = {{"type", "event"}, {"session", session_id}};
  line.update(to_json(e));
  return line.dump();
}

void write_session_log(std::ostream& out, const SessionState& s) {
  out << log_header_line(s) << '\n';
  for (const auto& e : s.transcript) out << log_event_line(s.id, e) << '\n';
}

LogReadResult read_session_logs(std::istream& in, const std::string& source) {
  struct Pending {
    std::string id;
    std::uint64_t seed = 0;
    std::optional<SessionCondition> override_;
    ParticipantProfile profile;
    std::vector<TranscriptEntry> events;
  };
  std::vector<Pending> order;
  std::unordered_map<std::string, std::size_t> index;
  LogReadResult result;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      const auto type = str(j, "type");
      if (type == "session") {
        require_schema(j, where);
        Pending p;
        p.id = str(j, "id");
        p.seed = parse_seed(at(j, "seed"));
        if (present(j, "condition_override")) p.override_ = parse_condition(str(j, "condition_override"));
        p.profile = profile_from_json(at(j, "profile"));
        if (index.contains(p.id)) {
          result.skipped.push_back(where + ": duplicate header for session " + p.id);
          continue;
        }
        index[p.id] = order.size();
        order.push_back(std::move(p));
      } else if (type == "event") {
        const auto sid = str(j, "session");
        auto it = index.find(sid);
        if (it == index.end()) {
          result.skipped.push_back(where + ": event for unknown session " + sid);
          continue;
        }
        order[it->second].events.push_back(transcript_entry_from_json(j));
      } else {
        result.skipped.push_back(where + ": unknown line type '" + type + "'");
      }
    } catch (const json::exception& e) {
      result.skipped.push_back(where + ": unreadable line (" + e.what() + ")");
    } catch (const Error& e) {
      result.skipped.push_back(where + ": " + e.what());
    }
  }

  for (auto& p : order) {
    try {
      result.sessions.push_back(replay(p.id, p.profile, p.seed, p.override_, p.events));
    } catch (const Error& e) {
      result.skipped.push_back(source + ": session " + p.id + ": " + e.what());
    }
  }
  return result;
}

DistributionSpec parse_distribution(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  auto to_int = [](const std::string& s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) fail("bad integer '" + s + "'");
    return v;
  };

  std::string line;
  if (!std::getline(in, line)) fail("distribution file is empty");
  const auto header = split(line);
  const std::vector<std::string> required = {"band_label", "ls_low", "ls_high", "proportion"};
  if (header.size() < 4 || header.size() > 5 ||
      !std::equal(required.begin(), required.end(), header.begin()) ||
      (header.size() == 5 && header[4] != "representative_ls")) {
    fail("distribution header must be band_label,ls_low,ls_high,proportion[,representative_ls]");
  }
  DistributionSpec dist;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      fail("distribution line " + std::to_string(lineno) + ": expected " +
           std::to_string(header.size()) + " columns");
    }
    Band b;
    b.label = cells[0];
    b.ls_low = to_int(cells[1]);
    b.ls_high = to_int(cells[2]);
    b.proportion = parse_double(cells[3]);
    b.representative_ls = header.size() == 5 && !cells[4].empty() ? parse_double(cells[4])
                                                                   : band_midpoint(b.ls_low, b.ls_high);
    dist.bands.push_back(b);
  }
  require_valid(dist);
  return dist;
}

void write_distribution(std::ostream& out, const DistributionSpec& dist) {
  out << "band_label,ls_low,ls_high,proportion,representative_ls\n";
  for (const auto& b : dist.bands) {
    out << b.label << ',' << b.ls_low << ',' << b.ls_high << ',' << format_double(b.proportion)
        << ',' << format_double(b.representative_ls) << '\n';
  }
}

json to_json(const UtilityCurve& c) {
  return {{"context", to_string(c.context)},
          {"include_death", c.include_death},
          {"scale", to_string(c.scale)},
          {"method", to_string(c.method)},
          {"values", state_map(c.values)}};
}

UtilityCurve curve_from_json(const json& j) {
  UtilityCurve c;
  c.context = parse_context(str(j, "context"));
  c.include_death = at(j, "include_death").get<bool>();
  c.scale = parse_scale(str(j, "scale"));
  c.method = parse_method(str(j, "method"));
  c.values = state_map_from(at(j, "values"));
  return c;
}

json to_json(const MleFit& f) {
  return {{"utilities", to_json(f.utilities)},
          {"sigma", num(f.sigma)},
          {"log_likelihood", num(f.log_likelihood)},
          {"null_log_likelihood", num(f.null_log_likelihood)},
          {"mcfadden_r2", num(f.mcfadden_r2)},
          {"fraction_correct", num(f.fraction_correct)},
          {"observations", f.observations},
          {"starts_converged", f.starts_converged},
          {"boundary_fit", f.boundary_fit},
          {"parameters", f.parameters}};
}

MleFit mle_fit_from_json(const json& j) {
  MleFit f;
  f.utilities = curve_from_json(at(j, "utilities"));
  f.sigma = get_num(at(j, "sigma"));
  f.log_likelihood = get_num(at(j, "log_likelihood"));
  f.null_log_likelihood = get_num(at(j, "null_log_likelihood"));
  f.mcfadden_r2 = get_num(at(j, "mcfadden_r2"));
  f.fraction_correct = get_num(at(j, "fraction_correct"));
  f.observations = at(j, "observations").get<std::size_t>();
  f.starts_converged = integer(j, "starts_converged");
  f.boundary_fit = at(j, "boundary_fit").get<bool>();
  const auto& params = at(j, "parameters");
  if (!params.is_array() || params.size() != f.parameters.size()) fail("parameters must hold 5 numbers");
  for (std::size_t i = 0; i < f.parameters.size(); ++i) f.parameters[i] = get_num(params[i]);
  return f;
}

ParticipantRecord make_participant_record(const SessionState& session, const SessionEstimates& est,
                                          const QualityConfig& quality) {
  ParticipantRecord r;
  r.estimates = est;
  r.curves = participant_curves(session, est);
  r.own_ls = session.own_ls;
  r.politics = political_alignment(session.profile);
  r.party = session.profile.party;
  for (auto f : quality_flags(session, quality)) r.quality_flags.emplace_back(to_string(f));
  return r;
}

namespace {

json participant_to_json(const ParticipantRecord& r) {
  const auto& e = r.estimates;
  json points = json::object();
  json las = json::object();
  for (const auto& [ctx, m] : e.points) {
    json pj = json::object();
    for (const auto& [baseline, p] : m) {
      pj[std::string(to_string(baseline))] =
          p ? json{{"p_star", p->p_star}, {"infinite_aversion", p->infinite_aversion}} : json(nullptr);
    }
    points[std::string(to_string(ctx))] = pj;
  }
  for (const auto& [ctx, m] : e.loss_aversion) {
    json lj = json::object();
    for (const auto& [baseline, la] : m) {
      lj[std::string(to_string(baseline))] =
          la ? json{{"lambda", num(la->lambda)}, {"lambda_prime", num(la->lambda_prime)}} : json(nullptr);
    }
    las[std::string(to_string(ctx))] = lj;
  }
  json curves = {{"personal", opt(e.personal)},
                 {"personal_no_death", opt(e.personal_no_death)},
                 {"societal", opt(e.societal)},
                 {"societal_no_death", opt(e.societal_no_death)}};
  return {{"id", e.participant},
          {"own_ls", r.own_ls ? json(*r.own_ls) : json(nullptr)},
          {"ratings", int_state_map(r.curves.ratings)},
          {"politics", r.politics},
          {"party", r.party},
          {"quality_flags", r.quality_flags},
          {"indifference_points", points},
          {"loss_aversion", las},
          {"curves", curves},
          {"mle", opt(e.mle)},
          {"diagnostics", e.diagnostics}};
}

ParticipantRecord participant_from_json(const json& j) {
  ParticipantRecord r;
  auto& e = r.estimates;
  e.participant = str(j, "id");
  if (present(j, "own_ls")) r.own_ls = integer(j, "own_ls");
  r.politics = integer(j, "politics");
  r.party = str(j, "party");
  r.quality_flags = at(j, "quality_flags").get<std::vector<std::string>>();
  const auto& points = at(j, "indifference_points");
  for (auto it = points.begin(); it != points.end(); ++it) {
    auto& m = e.points[parse_context(it.key())];
    for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
      std::optional<IndifferencePoint> p;
      if (!jt.value().is_null()) {
        p = IndifferencePoint{get_num(at(jt.value(), "p_star")),
                              at(jt.value(), "infinite_aversion").get<bool>()};
      }
      m[parse_life_state(jt.key())] = p;
    }
  }
  const auto& las = at(j, "loss_aversion");
  for (auto it = las.begin(); it != las.end(); ++it) {
    auto& m = e.loss_aversion[parse_context(it.key())];
    for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
      std::optional<LossAversion> la;
      if (!jt.value().is_null()) {
        la = LossAversion{get_num(at(jt.value(), "lambda")), get_num(at(jt.value(), "lambda_prime"))};
      }
      m[parse_life_state(jt.key())] = la;
    }
  }
  const auto& curves = at(j, "curves");
  auto curve = [&](const char* key) -> std::optional<UtilityCurve> {
    if (!present(curves, key)) return std::nullopt;
    return curve_from_json(curves[key]);
  };
  e.personal = curve("personal");
  e.personal_no_death = curve("personal_no_death");
  e.societal = curve("societal");
  e.societal_no_death = curve("societal_no_death");
  if (present(j, "mle")) e.mle = mle_fit_from_json(j["mle"]);
  e.diagnostics = at(j, "diagnostics").get<std::vector<std::string>>();

  auto& c = r.curves;
  c.participant = e.participant;
  c.personal = e.personal;
  if (e.mle) c.personal_mle = e.mle->utilities;
  c.societal_no_death = e.societal_no_death;
  if (auto it = e.loss_aversion.find(Context::Societal); it != e.loss_aversion.end()) {
    if (auto jt = it->second.find(LifeState::E); jt != it->second.end() && jt->second) {
      c.societal_death_lambda = jt->second->lambda;
    }
  }
  c.ratings = int_state_map_from(at(j, "ratings"));
  return r;
}

}  // namespace

json to_json(const CurvesFile& f) {
  json participants = json::array();
  for (const auto& p : f.participants) participants.push_back(participant_to_json(p));
  return {{"schema_version", kSchemaVersion},
          {"mode", f.cpt ? "cpt" : "eum"},
          {"cpt", opt(f.cpt)},
          {"participants", participants}};
}

CurvesFile curves_file_from_json(const json& j) {
  require_schema(j, "curves file");
  return guarded("curves file", [&] {
    CurvesFile f;
    if (present(j, "cpt")) f.cpt = cpt_from_json(j["cpt"]);
    for (const auto& p : at(j, "participants")) f.participants.push_back(participant_from_json(p));
    return f;
  });
}

stats::CohortParticipant cohort_participant(const ParticipantRecord& r) {
  stats::CohortParticipant c;
  c.id = r.estimates.participant;
  if (auto it = r.estimates.loss_aversion.find(Context::Personal); it != r.estimates.loss_aversion.end()) {
    c.personal = it->second;
  }
  if (auto it = r.estimates.loss_aversion.find(Context::Societal); it != r.estimates.loss_aversion.end()) {
    c.societal = it->second;
  }
  c.politics = static_cast<double>(r.politics);
  c.party = r.party;
  return c;
}

json to_json(const CptConfig& c) { return {{"delta", c.delta}, {"gamma", c.gamma}}; }

CptConfig cpt_from_json(const json& j) {
  CptConfig c{get_num(at(j, "delta")), get_num(at(j, "gamma"))};
  if (!(c.delta > 0) || !(c.gamma > 0)) throw Error(ErrorCode::Validation, "CPT delta and gamma must be positive");
  return c;
}

EngineConfig engine_config_from_json(const json& j) {
  EngineConfig c = EngineConfig::defaults();
  if (present(j, "comparators")) {
    const auto& arr = j["comparators"];
    if (!arr.is_array() || arr.size() != ladder::kRungs) {
      fail("comparators must list one sentence per ladder rung");
    }
    for (std::size_t i = 0; i < ladder::kRungs; ++i) c.comparators[i] = arr[i].get<std::string>();
  }
  if (present(j, "societal_reminder")) c.societal_reminder = str(j, "societal_reminder");
  return c;
}

QualityConfig quality_config_from_json(const json& j) {
  QualityConfig q;
  if (present(j, "min_completion_seconds")) q.min_completion_seconds = get_num(j["min_completion_seconds"]);
  if (present(j, "max_attention_failures")) q.max_attention_failures = integer(j, "max_attention_failures");
  if (present(j, "attention_items")) q.attention_items = j["attention_items"].get<std::vector<std::string>>();
  return q;
}

json to_json(const sim::AgentSpec& a) {
  json out = {{"true_utilities", state_map(a.true_utilities)},
              {"sigma", a.sigma ? num(*a.sigma) : json(nullptr)},
              {"perceptual_weighting", opt(a.perceptual_weighting)},
              {"societal_multiplier", a.societal_multiplier},
              {"tie_epsilon", a.tie_epsilon},
              {"seed", std::to_string(a.seed)},
              {"vignette_ratings", int_state_map(a.vignette_ratings)},
              {"own_ls", a.own_ls},
              {"profile", to_json(a.profile)},
              {"condition", a.condition ? json(to_string(*a.condition)) : json(nullptr)}};
  return out;
}

namespace {

// Applies every agent field present in `j` on top of `a`.
void apply_agent_fields(sim::AgentSpec& a, const json& j) {
  if (present(j, "true_utilities")) a.true_utilities = state_map_from(j["true_utilities"]);
  if (j.contains("sigma")) a.sigma = j["sigma"].is_null() ? std::nullopt : std::optional(get_num(j["sigma"]));
  if (j.contains("perceptual_weighting")) {
    const auto& w = j["perceptual_weighting"];
    a.perceptual_weighting = w.is_null() ? std::nullopt : std::optional(cpt_from_json(w));
  }
  if (present(j, "societal_multiplier")) a.societal_multiplier = get_num(j["societal_multiplier"]);
  if (present(j, "tie_epsilon")) a.tie_epsilon = get_num(j["tie_epsilon"]);
  if (present(j, "seed")) a.seed = parse_seed(j["seed"]);
  if (present(j, "vignette_ratings")) a.vignette_ratings = int_state_map_from(j["vignette_ratings"]);
  if (present(j, "own_ls")) a.own_ls = integer(j, "own_ls");
  if (present(j, "profile")) a.profile = profile_from_json(j["profile"]);
  if (present(j, "condition")) a.condition = parse_condition(str(j, "condition"));
}

}  // namespace

sim::AgentSpec agent_from_json(const json& j) {
  return guarded("agent", [&] {
    sim::AgentSpec a;
    apply_agent_fields(a, j);
    if (auto v = sim::validate_agent(a); !v) throw Error(ErrorCode::Validation, v.violation);
    return a;
  });
}

std::vector<sim::AgentSpec> cohort_from_json(const json& j) {
  require_schema(j, "cohort config");
  return guarded("cohort config", [&] {
    std::vector<sim::AgentSpec> out;
    if (present(j, "agents")) {
      for (const auto& a : j["agents"]) out.push_back(agent_from_json(a));
    }
    if (present(j, "generate")) {
      for (const auto& g : j["generate"]) {
        const int count = integer(g, "count");
        if (count < 0) throw Error(ErrorCode::Validation, "generator count must be non-negative");
        const auto kind = present(g, "kind") ? str(g, "kind") : std::string("concave");
        const std::uint64_t seed = present(g, "seed") ? parse_seed(g["seed"]) : 0;
        std::mt19937_64 rng(seed);
        for (int i = 0; i < count; ++i) {
          sim::AgentSpec a;
          apply_agent_fields(a, g);
          a.seed = seed + static_cast<std::uint64_t>(i);
          if (kind == "concave") {
            const double lo = present(g, "min_ratio") ? get_num(g["min_ratio"]) : 0.3;
            const double hi = present(g, "max_ratio") ? get_num(g["max_ratio"]) : 0.95;
            a.true_utilities = sim::random_concave_utilities(rng, lo, hi);
          } else if (kind == "power") {
            a.true_utilities = sim::power_utilities(present(g, "exponent") ? get_num(g["exponent"]) : 0.5);
          } else if (kind == "linear") {
            a.true_utilities = sim::power_utilities(1.0);
          } else {
            fail("unknown generator kind '" + kind + "'");
          }
          if (auto v = sim::validate_agent(a); !v) throw Error(ErrorCode::Validation, v.violation);
          out.push_back(std::move(a));
        }
      }
    }
    return out;
  });
}

}  // namespace lifesat::io
