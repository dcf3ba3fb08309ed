#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "lifesat/core.hpp"

namespace lifesat {

enum class SessionCondition { GamblesFirst, LifeSatisfactionFirst };
enum class Phase { Profile, Vignettes, Block1, Block2, Block3, Done };
enum class Response { AcceptGamble, RefuseGamble, CantChoose };

std::string_view to_string(SessionCondition c) noexcept;
std::string_view to_string(Phase p) noexcept;
std::string_view to_string(Response r) noexcept;
SessionCondition parse_condition(std::string_view text);
Phase parse_phase(std::string_view text);
Response parse_response(std::string_view text);

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

struct ParticipantProfile {
  std::string age_band;
  std::string sex;
  std::string party;
  std::array<int, 5> bsa_items{3, 3, 3, 3, 3};  // Likert 1..5
  int left_right = 5;
  int attention_checks_failed = 0;
  double completion_seconds = 0.0;  // 0 = derive from the transcript

  friend bool operator==(const ParticipantProfile&, const ParticipantProfile&) = default;
};

ValidationResult validate_profile(const ParticipantProfile& profile);

// Summed five-item scale, 5..25.
int political_alignment(const ParticipantProfile& profile);

struct ChoiceEvent {
  GambleSpec gamble;
  std::size_t ladder_index = 0;
  Response response = Response::RefuseGamble;
  Timestamp timestamp{};
};

struct OwnRatingInput {
  int value = 0;
  Timestamp timestamp{};
};

struct VignetteInput {
  LifeState state = LifeState::A;
  int value = 0;
  std::optional<std::string> explanation;
  Timestamp timestamp{};
};

// Anything that mutates the survey state; go_back pops the most recent one.
using SessionInput = std::variant<OwnRatingInput, VignetteInput, ChoiceEvent>;

struct Revision {
  std::size_t reverted_seq = 0;
  Timestamp timestamp{};
};

struct TranscriptEntry {
  std::size_t seq = 0;
  std::variant<OwnRatingInput, VignetteInput, ChoiceEvent, Revision> payload;
};

Timestamp timestamp_of(const TranscriptEntry& entry);

struct ActiveGamble {
  std::size_t queue_index = 0;
  std::size_t ladder_index = 0;
  int consecutive_cant_choose = 0;
  // Lowest rung refused (or passed with "can't choose") so far.
  std::optional<std::size_t> last_rejected_rung;

  friend bool operator==(const ActiveGamble&, const ActiveGamble&) = default;
};

inline constexpr std::size_t kGamblesPerBlock = 4;
inline constexpr std::size_t kGambleCount = 3 * kGamblesPerBlock;

struct SessionState {
  std::string id;
  std::uint64_t seed = 0;
  SessionCondition condition = SessionCondition::GamblesFirst;
  std::optional<SessionCondition> condition_override;
  ParticipantProfile profile;
  Phase phase = Phase::Profile;
  std::optional<int> own_ls;
  VignetteRatings ratings;
  bool order_violation = false;
  std::vector<GambleSpec> gamble_queue;
  std::optional<ActiveGamble> active;
  std::vector<std::optional<IndifferenceBracket>> brackets;  // parallel to gamble_queue
  std::vector<SessionInput> applied;
  std::vector<TranscriptEntry> transcript;

  Block block_of(std::size_t queue_index) const { return gamble_queue.at(queue_index).block; }
};

// Equality over everything except the transcript and timestamps.
bool same_survey_state(const SessionState& a, const SessionState& b);

SessionState create_session(const ParticipantProfile& profile, std::uint64_t seed,
                            std::optional<SessionCondition> condition_override = std::nullopt);

struct EngineConfig {
  // Comparator sentence per ladder rung.
  std::array<std::string, ladder::kRungs> comparators;
  std::string societal_reminder;
  static EngineConfig defaults();
};

enum class PromptKind { OwnLifeSatisfaction, VignetteRating, ReviseOrExplain, Gamble };
std::string_view to_string(PromptKind k) noexcept;

// Icon array: at most 100 icons, with a caption once the odds go past 1 in 100.
struct Pictogram {
  long numerator = 1;
  long denominator = 2;
  int icons = 2;
  int highlighted = 1;
  std::string caption;
};

Pictogram pictogram_for(std::size_t rung);
std::string odds_text(std::size_t rung);  // "1 in 1,000"

struct GamblePrompt {
  std::size_t queue_index = 0;
  GambleSpec gamble;
  std::size_t ladder_index = 0;
  double probability = 0.5;
  Pictogram pictogram;
  std::string comparator;
  std::string baseline_label;
  std::string win_label;
  std::string lose_label;
  std::optional<std::string> societal_reminder;
  std::vector<std::string> changed_fields;
  // Shown only on request: earlier (higher) odds of this gamble and the
  // participant's vignette ratings.
  std::vector<std::size_t> collapsed_previous_rungs;
  std::map<LifeState, int> collapsed_ratings;
};

struct Prompt {
  PromptKind kind = PromptKind::OwnLifeSatisfaction;
  Phase phase = Phase::Profile;
  std::optional<LifeState> state;          // VignetteRating
  std::optional<int> own_ls;               // echoed on the vignette screens
  std::vector<StatePair> violations;       // ReviseOrExplain
  std::optional<GamblePrompt> gamble;      // Gamble
};

// Phase that the next prompt belongs to (resolves the initial Profile phase).
Phase content_phase(const SessionState& state);

Prompt next_prompt(const SessionState& state, const EngineConfig& config = EngineConfig::defaults());

SessionState submit_choice(const SessionState& state, const ChoiceEvent& event);
SessionState rate_vignette(const SessionState& state, LifeState s, int value,
                           std::optional<std::string> explanation = std::nullopt,
                           Timestamp at = {});
SessionState rate_own_life_satisfaction(const SessionState& state, int value, Timestamp at = {});
SessionState apply_input(const SessionState& state, const SessionInput& input);
SessionState go_back(const SessionState& state, Timestamp at = {});

// Rebuilds a session from its creation parameters and transcript.
SessionState replay(const std::string& id, const ParticipantProfile& profile, std::uint64_t seed,
                    std::optional<SessionCondition> condition_override,
                    const std::vector<TranscriptEntry>& transcript);

enum class QualityFlag {
  FastCompletion,
  FailedAttention,
  OrderViolationUnexplained,
  IncompletePersonal,
  IncompleteSocietal,
  DroppedConnection,
};
std::string_view to_string(QualityFlag f) noexcept;

struct QualityConfig {
  double min_completion_seconds = 300.0;
  int max_attention_failures = 0;
  // Accepted wordings of the attention item; agreement (4 or 5) is correct.
  std::vector<std::string> attention_items = {"I am currently completing an online survey",
                                              "I am currently taking an online survey"};
};

// True when `response` (Likert 1..5) passes the attention item `item`.
// Items not listed in the config are not attention checks and always pass.
bool attention_item_passed(const QualityConfig& config, const std::string& item, int response);

std::set<QualityFlag> quality_flags(const SessionState& state, const QualityConfig& thresholds = {});

double completion_seconds(const SessionState& state);

// Unexplained adjacent ordering violations in the stored ratings (empty
// while ratings are incomplete).
std::vector<StatePair> unexplained_violations(const VignetteRatings& ratings);

// Effective personal accept/refuse choices (can't-choose excluded).
std::vector<ChoiceEvent> personal_choice_events(const SessionState& state);

}  // namespace lifesat
