#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lifesat/aggregation.hpp"
#include "lifesat/engine.hpp"
#include "lifesat/estimation.hpp"
#include "lifesat/simulator.hpp"
#include "lifesat/stats.hpp"

namespace lifesat::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Shortest decimal that parses back to the same double; "inf"/"-inf"/"nan"
// for non-finite values.
std::string format_double(double x);
double parse_double(std::string_view text);

// ISO-8601 UTC with millisecond precision, e.g. 2024-03-01T12:00:00.000Z.
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);

void require_schema(const json& j, std::string_view what);

json to_json(const ParticipantProfile& p);
ParticipantProfile profile_from_json(const json& j);

json to_json(const GambleSpec& g);
GambleSpec gamble_from_json(const json& j);

json to_json(const IndifferenceBracket& b);
IndifferenceBracket bracket_from_json(const json& j);

json to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const json& j);

// Body of a submitted response: {"kind": "choice"|"rating"|"own_ls", ...}.
// A missing timestamp is filled with `now`.
SessionInput input_from_json(const json& j, Timestamp now);
json to_json(const SessionInput& input);

json to_json(const Prompt& p);

// SessionRecord: the full state plus schema_version.
json to_json(const SessionState& s);
// Rebuilds the state by replaying the transcript, then checks the derived
// fields against the record. Throws Parse or Version.
SessionState session_from_json(const json& j);

// Line-delimited session log: one "session" header line, then one line per
// transcript entry. Several sessions may share a file.
std::string log_header_line(const SessionState& s);
std::string log_event_line(const std::string& session_id, const TranscriptEntry& e);
void write_session_log(std::ostream& out, const SessionState& s);

struct LogReadResult {
  std::vector<SessionState> sessions;  // in order of first appearance
  std::vector<std::string> skipped;    // itemized problems
};

// Malformed lines (for example a partial last line) are skipped and reported;
// each session is rebuilt from the events it has.
LogReadResult read_session_logs(std::istream& in, const std::string& source = "input");

// Distribution file: band_label,ls_low,ls_high,proportion[,representative_ls]
DistributionSpec parse_distribution(std::istream& in);
void write_distribution(std::ostream& out, const DistributionSpec& dist);

json to_json(const UtilityCurve& c);
UtilityCurve curve_from_json(const json& j);

json to_json(const MleFit& f);
MleFit mle_fit_from_json(const json& j);

// One participant in the curves file written by `estimate`.
struct ParticipantRecord {
  SessionEstimates estimates;
  ParticipantCurves curves;
  std::optional<int> own_ls;
  int politics = 0;
  std::string party;
  std::vector<std::string> quality_flags;
};

ParticipantRecord make_participant_record(const SessionState& session, const SessionEstimates& est,
                                          const QualityConfig& quality = {});

struct CurvesFile {
  std::optional<CptConfig> cpt;  // absent: EUM
  std::vector<ParticipantRecord> participants;
};

json to_json(const CurvesFile& f);
CurvesFile curves_file_from_json(const json& j);

stats::CohortParticipant cohort_participant(const ParticipantRecord& r);

json to_json(const CptConfig& c);
CptConfig cpt_from_json(const json& j);

// Service configuration pieces; missing keys keep their defaults.
EngineConfig engine_config_from_json(const json& j);
QualityConfig quality_config_from_json(const json& j);

json to_json(const sim::AgentSpec& a);
sim::AgentSpec agent_from_json(const json& j);

// Cohort config: {"schema_version": 1, "agents": [...], "generate": [...]}.
// Each generator is {"count", "kind": "concave"|"power"|"linear", "seed",
// plus any agent field}; generated agents get seeds seed, seed+1, ...
std::vector<sim::AgentSpec> cohort_from_json(const json& j);

}  // namespace lifesat::io
