#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "../common/random_script.hpp"
#include "lifesat/error.hpp"
#include "lifesat/io.hpp"
#include "lifesat/simulator.hpp"

using namespace lifesat;
using namespace testing_helpers;
using io::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ContractViolation;
}

}  // namespace

TEST_CASE("doubles and timestamps round-trip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(io::parse_double(io::format_double(x)) == x);
  }
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(std::isinf(io::parse_double("inf")));
  CHECK(io::parse_double("-inf") < 0);
  CHECK(code_of([] { io::parse_double("1.5x"); }) == ErrorCode::Parse);

  const Timestamp t{std::chrono::milliseconds{1'700'000'123'456LL}};
  CHECK(io::format_timestamp(t) == "2023-11-14T22:15:23.456Z");
  CHECK(io::parse_timestamp(io::format_timestamp(t)) == t);
  CHECK(code_of([] { io::parse_timestamp("yesterday"); }) == ErrorCode::Parse);
}

TEST_CASE("session records round-trip") {
  for (std::uint64_t k = 0; k < 25; ++k) {
    const auto script = random_script(k);
    const auto& s = script.final_state;
    const json j = io::to_json(s);
    CHECK(j.at("schema_version") == io::kSchemaVersion);
    const auto back = io::session_from_json(json::parse(j.dump()));
    CHECK(same_survey_state(back, s));
    CHECK(io::to_json(back).dump() == j.dump());
  }
}

TEST_CASE("tampered and foreign records are rejected") {
  const auto s = random_script(3).final_state;
  json j = io::to_json(s);
  json v = j;
  v["schema_version"] = 2;
  CHECK(code_of([&] { io::session_from_json(v); }) == ErrorCode::Version);
  json t = j;
  t["own_ls"] = (s.own_ls.value_or(0) + 1) % 11;
  CHECK(code_of([&] { io::session_from_json(t); }) == ErrorCode::Parse);
  json m = j;
  m.erase("transcript");
  CHECK_THROWS_AS(io::session_from_json(m), Error);
}

TEST_CASE("inputs and prompts serialize") {
  const Timestamp now{std::chrono::milliseconds{5000}};
  const auto in = io::input_from_json(json{{"kind", "own_ls"}, {"value", 6}}, now);
  REQUIRE(std::holds_alternative<OwnRatingInput>(in));
  CHECK(std::get<OwnRatingInput>(in).timestamp == now);
  CHECK(io::input_from_json(io::to_json(in), {}).index() == in.index());
  CHECK(code_of([&] { io::input_from_json(json{{"kind", "dance"}}, now); }) == ErrorCode::Parse);
  CHECK(code_of([&] { io::input_from_json(json{{"kind", "choice"}, {"ladder_index", -1}}, now); }) ==
        ErrorCode::Parse);

  GambleSpec g;
  CHECK(io::gamble_from_json(io::to_json(g)) == g);
  const auto b = IndifferenceBracket::resolved(3, 2);
  CHECK(io::bracket_from_json(io::to_json(b)) == b);
  CHECK(io::bracket_from_json(io::to_json(IndifferenceBracket::undecidable())) == IndifferenceBracket::undecidable());
  const auto open = IndifferenceBracket::resolved(std::nullopt, 7);
  CHECK(io::bracket_from_json(io::to_json(open)) == open);

  const auto s = random_script(8).final_state;
  auto fresh = create_session(s.profile, s.seed);
  const json p = io::to_json(next_prompt(fresh));
  CHECK(p.at("schema_version") == 1);
  CHECK(p.contains("kind"));
}

TEST_CASE("session logs tolerate damage and interleaving") {
  std::vector<SessionState> sessions;
  for (std::uint64_t k = 10; k < 13; ++k) sessions.push_back(random_script(k).final_state);

  // interleave the three logs line by line
  std::vector<std::vector<std::string>> per;
  for (const auto& s : sessions) {
    std::ostringstream os;
    io::write_session_log(os, s);
    std::istringstream is(os.str());
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    per.push_back(lines);
  }
  std::string mixed;
  for (std::size_t i = 0;; ++i) {
    bool any = false;
    for (const auto& lines : per) {
      if (i < lines.size()) {
        mixed += lines[i] + "\n";
        any = true;
      }
    }
    if (!any) break;
  }
  {
    std::istringstream in(mixed);
    const auto r = io::read_session_logs(in);
    REQUIRE(r.sessions.size() == 3);
    CHECK(r.skipped.empty());
    for (std::size_t i = 0; i < 3; ++i) CHECK(same_survey_state(r.sessions[i], sessions[i]));
  }

  // garbage in the middle and a cut-off last line
  const std::string last = per[0].back();
  std::string damaged = "not json at all\n" + mixed + "{\"type\":\"event\",\"session\":\"nobody\"}\n" +
                        last.substr(0, last.size() / 2);
  std::istringstream in(damaged);
  const auto r = io::read_session_logs(in, "damaged.jsonl");
  CHECK(r.sessions.size() == 3);
  CHECK(r.skipped.size() >= 2);
  for (const auto& why : r.skipped) CHECK(why.find("damaged.jsonl") != std::string::npos);

  // a log cut short mid-session still yields the prefix
  std::string prefix;
  for (std::size_t i = 0; i < per[1].size() / 2; ++i) prefix += per[1][i] + "\n";
  std::istringstream half(prefix);
  const auto h = io::read_session_logs(half);
  REQUIRE(h.sessions.size() == 1);
  CHECK(h.sessions[0].transcript.size() == per[1].size() / 2 - 1);
}

TEST_CASE("distribution files") {
  const std::string text =
      "band_label,ls_low,ls_high,proportion,representative_ls\n"
      "0-4,0,4,0.08,2\n"
      "5-6,5,6,0.17,5.5\n"
      "7-8,7,8,0.45,7.5\n"
      "9-10,9,10,0.3,9.5\n";
  std::istringstream in(text);
  const auto d = io::parse_distribution(in);
  std::ostringstream out;
  io::write_distribution(out, d);
  CHECK(out.str() == text);

  std::istringstream short_form("band_label,ls_low,ls_high,proportion\n0-4,0,4,0.5\n5-10,5,10,0.5\n");
  const auto s = io::parse_distribution(short_form);
  CHECK(s.bands[1].representative_ls == 7.5);

  std::istringstream no_header("0-4,0,4,0.5\n5-10,5,10,0.5\n");
  CHECK(code_of([&] { io::parse_distribution(no_header); }) == ErrorCode::Parse);
  std::istringstream bad_sum("band_label,ls_low,ls_high,proportion\n0-4,0,4,0.5\n5-10,5,10,0.6\n");
  CHECK(code_of([&] { io::parse_distribution(bad_sum); }) == ErrorCode::Validation);
}

TEST_CASE("curves files round-trip") {
  std::mt19937_64 rng(4);
  std::vector<sim::AgentSpec> agents(4);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    agents[i].true_utilities = sim::random_concave_utilities(rng);
    agents[i].seed = 40 + i;
  }
  io::CurvesFile f;
  f.cpt = CptConfig::median_respondent();
  for (const auto& s : sim::run_cohort(agents)) {
    f.participants.push_back(io::make_participant_record(s, estimate_session(s, f.cpt, true)));
  }
  const json j = io::to_json(f);
  const auto back = io::curves_file_from_json(json::parse(j.dump()));
  CHECK(io::to_json(back).dump() == j.dump());
  REQUIRE(back.participants.size() == 4);
  CHECK(back.cpt == f.cpt);
  const auto cp = io::cohort_participant(back.participants[0]);
  CHECK(cp.personal.size() == 4);

  json wrong = j;
  wrong["schema_version"] = 7;
  CHECK(code_of([&] { io::curves_file_from_json(wrong); }) == ErrorCode::Version);

  const auto& fit = *f.participants[0].estimates.mle;
  const auto fit2 = io::mle_fit_from_json(io::to_json(fit));
  CHECK(fit2.sigma == fit.sigma);
  CHECK(fit2.parameters == fit.parameters);
}

TEST_CASE("cohort configs") {
  const json j = json::parse(R"({
    "schema_version": 1,
    "agents": [{"true_utilities": {"Death": 0, "E": 1, "D": 2, "C": 3, "B": 4, "A": 5}, "seed": 3}],
    "generate": [{"count": 5, "kind": "concave", "seed": 100, "sigma": 20},
                 {"count": 2, "kind": "power", "exponent": 0.5, "seed": 7,
                  "perceptual_weighting": {"delta": 0.77, "gamma": 0.44}}]
  })");
  const auto agents = io::cohort_from_json(j);
  REQUIRE(agents.size() == 8);
  CHECK(agents[0].seed == 3);
  CHECK(agents[1].seed == 100);
  CHECK(agents[5].seed == 104);
  CHECK(agents[1].sigma == 20.0);
  CHECK(agents[6].true_utilities.at(LifeState::B) == doctest::Approx(2.0));
  CHECK(agents[7].perceptual_weighting == CptConfig::median_respondent());
  // same config, same agents
  CHECK(io::to_json(io::cohort_from_json(j)[3]).dump() == io::to_json(agents[3]).dump());
  CHECK(io::agent_from_json(io::to_json(agents[2])).true_utilities == agents[2].true_utilities);

  json bad = j;
  bad["generate"][0]["kind"] = "wiggly";
  CHECK_THROWS_AS(io::cohort_from_json(bad), Error);
}
