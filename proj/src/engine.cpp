#include "lifesat/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "lifesat/error.hpp"

namespace lifesat {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Portable bounded draw; std::uniform_int_distribution is not specified
// bit-for-bit across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

constexpr std::array<Phase, 4> kGamblesFirstOrder = {Phase::Block1, Phase::Block2,
                                                     Phase::Block3, Phase::Vignettes};
constexpr std::array<Phase, 4> kRatingsFirstOrder = {Phase::Vignettes, Phase::Block1,
                                                     Phase::Block2, Phase::Block3};

const std::array<Phase, 4>& phase_order(SessionCondition c) {
  return c == SessionCondition::GamblesFirst ? kGamblesFirstOrder : kRatingsFirstOrder;
}

bool is_block(Phase p) { return p == Phase::Block1 || p == Phase::Block2 || p == Phase::Block3; }

std::size_t block_start(Phase p) {
  switch (p) {
    case Phase::Block1: return 0;
    case Phase::Block2: return kGamblesPerBlock;
    case Phase::Block3: return 2 * kGamblesPerBlock;
    default: break;
  }
  throw Error(ErrorCode::ContractViolation, "not a gamble block");
}

bool vignettes_complete(const SessionState& s) {
  return s.own_ls.has_value() && s.ratings.complete() && unexplained_violations(s.ratings).empty();
}

bool phase_complete(const SessionState& s, Phase p) {
  if (p == Phase::Vignettes) return vignettes_complete(s);
  const std::size_t start = block_start(p);
  for (std::size_t i = start; i < start + kGamblesPerBlock; ++i) {
    if (!s.brackets[i]) return false;
  }
  return true;
}

Phase compute_phase(const SessionState& s) {
  for (Phase p : phase_order(s.condition)) {
    if (!phase_complete(s, p)) return p;
  }
  return Phase::Done;
}

// Recomputes phase and activates the next gamble when a block is current.
void advance(SessionState& s) {
  const Phase current = compute_phase(s);
  s.phase = s.applied.empty() ? Phase::Profile : current;
  if (!is_block(current)) {
    s.active.reset();
    return;
  }
  if (s.active) return;
  const std::size_t start = block_start(current);
  for (std::size_t i = start; i < start + kGamblesPerBlock; ++i) {
    if (!s.brackets[i]) {
      s.active = ActiveGamble{i, 0, 0, std::nullopt};
      return;
    }
  }
}

void close_active(SessionState& s, IndifferenceBracket bracket) {
  s.brackets[s.active->queue_index] = bracket;
  s.active.reset();
}

void apply_choice(SessionState& s, const ChoiceEvent& e) {
  const Phase phase = content_phase(s);
  if (phase == Phase::Done) throw Error(ErrorCode::SessionComplete, "session is complete");
  if (!is_block(phase) || !s.active) {
    throw Error(ErrorCode::Sequencing, "no gamble is awaiting a response");
  }
  ActiveGamble& a = *s.active;
  if (e.gamble != s.gamble_queue[a.queue_index] || e.ladder_index != a.ladder_index) {
    throw Error(ErrorCode::Sequencing, "choice does not match the active prompt (" +
                                           describe(s.gamble_queue[a.queue_index]) + " at rung " +
                                           std::to_string(a.ladder_index) + ")");
  }
  const auto next = ladder::next(a.ladder_index);
  switch (e.response) {
    case Response::AcceptGamble:
      close_active(s, IndifferenceBracket::resolved(a.ladder_index, a.last_rejected_rung));
      break;
    case Response::RefuseGamble:
      if (!next) {
        close_active(s, IndifferenceBracket::resolved(std::nullopt, a.ladder_index));
      } else {
        a.last_rejected_rung = a.ladder_index;
        a.ladder_index = *next;
        a.consecutive_cant_choose = 0;
      }
      break;
    case Response::CantChoose:
      a.consecutive_cant_choose += 1;
      if (a.consecutive_cant_choose >= 2 || !next) {
        close_active(s, IndifferenceBracket::undecidable());
      } else {
        a.last_rejected_rung = a.ladder_index;
        a.ladder_index = *next;
      }
      break;
  }
}

void check_rating(int value) {
  if (value < 0 || value > 10) {
    throw Error(ErrorCode::Validation, "life satisfaction ratings are integers 0..10");
  }
}

void apply_own(SessionState& s, const OwnRatingInput& in) {
  check_rating(in.value);
  const Phase phase = content_phase(s);
  if (phase == Phase::Done) throw Error(ErrorCode::SessionComplete, "session is complete");
  if (phase != Phase::Vignettes) throw Error(ErrorCode::Sequencing, "not in the vignette phase");
  s.own_ls = in.value;
}

void apply_vignette(SessionState& s, const VignetteInput& in) {
  if (in.state == LifeState::Death) {
    throw Error(ErrorCode::Validation, "only living states A..E are rated");
  }
  check_rating(in.value);
  const Phase phase = content_phase(s);
  if (phase == Phase::Done) throw Error(ErrorCode::SessionComplete, "session is complete");
  if (phase != Phase::Vignettes) throw Error(ErrorCode::Sequencing, "not in the vignette phase");
  if (!s.own_ls) throw Error(ErrorCode::Sequencing, "own life satisfaction is asked first");
  s.ratings.ratings[in.state] = in.value;
  if (in.explanation && !in.explanation->empty()) {
    s.ratings.explanations[in.state] = *in.explanation;
  } else {
    s.ratings.explanations.erase(in.state);
  }
  s.order_violation = s.ratings.complete() && !ordering_violations(s.ratings).empty();
}

void apply_core(SessionState& s, const SessionInput& input) {
  std::visit(Overloaded{[&](const OwnRatingInput& in) { apply_own(s, in); },
                        [&](const VignetteInput& in) { apply_vignette(s, in); },
                        [&](const ChoiceEvent& in) { apply_choice(s, in); }},
             input);
}

SessionState record(const SessionState& state, const SessionInput& input) {
  SessionState s = state;
  apply_core(s, input);
  s.applied.push_back(input);
  s.transcript.push_back(TranscriptEntry{s.transcript.size(), std::visit(
      [](const auto& in) -> decltype(TranscriptEntry::payload) { return in; }, input)});
  advance(s);
  return s;
}

SessionState rebuild(const SessionState& state, std::size_t keep) {
  SessionState s = create_session(state.profile, state.seed, state.condition_override);
  s.id = state.id;
  for (std::size_t i = 0; i < keep; ++i) {
    apply_core(s, state.applied[i]);
    s.applied.push_back(state.applied[i]);
    advance(s);
  }
  s.transcript = state.transcript;
  return s;
}

std::string with_thousands(long n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string label_for(const SessionState& s, LifeState state, Basis basis) {
  if (state == LifeState::Death) return "death";
  if (basis == Basis::LifeSatisfactionScores) {
    if (auto it = s.ratings.ratings.find(state); it != s.ratings.ratings.end()) {
      return std::to_string(it->second);
    }
  }
  return std::string(to_string(state));
}

bool same_input(const SessionInput& a, const SessionInput& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      Overloaded{
          [&](const OwnRatingInput& x) { return x.value == std::get<OwnRatingInput>(b).value; },
          [&](const VignetteInput& x) {
            const auto& y = std::get<VignetteInput>(b);
            return x.state == y.state && x.value == y.value && x.explanation == y.explanation;
          },
          [&](const ChoiceEvent& x) {
            const auto& y = std::get<ChoiceEvent>(b);
            return x.gamble == y.gamble && x.ladder_index == y.ladder_index &&
                   x.response == y.response;
          }},
      a);
}

}  // namespace

std::string_view to_string(SessionCondition c) noexcept {
  return c == SessionCondition::GamblesFirst ? "gambles_first" : "life_satisfaction_first";
}

std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::Profile: return "profile";
    case Phase::Vignettes: return "vignettes";
    case Phase::Block1: return "block1";
    case Phase::Block2: return "block2";
    case Phase::Block3: return "block3";
    case Phase::Done: return "done";
  }
  return "?";
}

std::string_view to_string(Response r) noexcept {
  switch (r) {
    case Response::AcceptGamble: return "accept";
    case Response::RefuseGamble: return "refuse";
    case Response::CantChoose: return "cant_choose";
  }
  return "?";
}

std::string_view to_string(PromptKind k) noexcept {
  switch (k) {
    case PromptKind::OwnLifeSatisfaction: return "own_life_satisfaction";
    case PromptKind::VignetteRating: return "vignette_rating";
    case PromptKind::ReviseOrExplain: return "revise_or_explain";
    case PromptKind::Gamble: return "gamble";
  }
  return "?";
}

std::string_view to_string(QualityFlag f) noexcept {
  switch (f) {
    case QualityFlag::FastCompletion: return "fast_completion";
    case QualityFlag::FailedAttention: return "failed_attention";
    case QualityFlag::OrderViolationUnexplained: return "order_violation_unexplained";
    case QualityFlag::IncompletePersonal: return "incomplete_personal";
    case QualityFlag::IncompleteSocietal: return "incomplete_societal";
    case QualityFlag::DroppedConnection: return "dropped_connection";
  }
  return "?";
}

SessionCondition parse_condition(std::string_view text) {
  if (text == "gambles_first") return SessionCondition::GamblesFirst;
  if (text == "life_satisfaction_first") return SessionCondition::LifeSatisfactionFirst;
  throw Error(ErrorCode::Parse, "unknown condition '" + std::string(text) + "'");
}

Phase parse_phase(std::string_view text) {
  for (auto p : {Phase::Profile, Phase::Vignettes, Phase::Block1, Phase::Block2, Phase::Block3,
                 Phase::Done}) {
    if (to_string(p) == text) return p;
  }
  throw Error(ErrorCode::Parse, "unknown phase '" + std::string(text) + "'");
}

Response parse_response(std::string_view text) {
  for (auto r : {Response::AcceptGamble, Response::RefuseGamble, Response::CantChoose}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::Parse, "unknown response '" + std::string(text) + "'");
}

ValidationResult validate_profile(const ParticipantProfile& p) {
  for (int item : p.bsa_items) {
    if (item < 1 || item > 5) return {false, "political items are Likert 1..5"};
  }
  if (p.attention_checks_failed < 0) return {false, "attention failure count is negative"};
  if (p.completion_seconds < 0) return {false, "completion time is negative"};
  return {};
}

int political_alignment(const ParticipantProfile& p) {
  int sum = 0;
  for (int item : p.bsa_items) sum += item;
  return sum;
}

Timestamp timestamp_of(const TranscriptEntry& entry) {
  return std::visit([](const auto& e) { return e.timestamp; }, entry.payload);
}

bool same_survey_state(const SessionState& a, const SessionState& b) {
  if (a.applied.size() != b.applied.size()) return false;
  for (std::size_t i = 0; i < a.applied.size(); ++i) {
    if (!same_input(a.applied[i], b.applied[i])) return false;
  }
  return a.id == b.id && a.seed == b.seed && a.condition == b.condition &&
         a.condition_override == b.condition_override && a.profile == b.profile &&
         a.phase == b.phase && a.own_ls == b.own_ls && a.ratings == b.ratings &&
         a.order_violation == b.order_violation && a.gamble_queue == b.gamble_queue &&
         a.active == b.active && a.brackets == b.brackets;
}

SessionState create_session(const ParticipantProfile& profile, std::uint64_t seed,
                            std::optional<SessionCondition> condition_override) {
  if (auto v = validate_profile(profile); !v) throw Error(ErrorCode::Validation, v.violation);

  std::mt19937_64 rng(seed);
  SessionState s;
  s.seed = seed;
  s.profile = profile;
  s.condition_override = condition_override;
  char id[24];
  std::snprintf(id, sizeof id, "s%016llx", static_cast<unsigned long long>(rng()));
  s.id = id;
  const bool coin = (rng() >> 63) != 0;
  s.condition = condition_override.value_or(coin ? SessionCondition::LifeSatisfactionFirst
                                                 : SessionCondition::GamblesFirst);
  const Basis basis = s.condition == SessionCondition::GamblesFirst
                          ? Basis::Letters
                          : Basis::LifeSatisfactionScores;

  auto personal = adjacent_triples(Context::Personal, basis);
  auto societal = adjacent_triples(Context::Societal, basis);
  std::vector<GambleSpec> block1(personal.begin(), personal.end());
  std::vector<GambleSpec> block2(societal.begin(), societal.end());
  shuffle(block1, rng);
  shuffle(block2, rng);
  std::vector<GambleSpec> pool = non_adjacent_triples(basis);
  for (std::size_t i = 0; i < kGamblesPerBlock; ++i) {
    std::swap(pool[i], pool[i + uniform_below(rng, pool.size() - i)]);
  }

  s.gamble_queue = block1;
  s.gamble_queue.insert(s.gamble_queue.end(), block2.begin(), block2.end());
  s.gamble_queue.insert(s.gamble_queue.end(), pool.begin(), pool.begin() + kGamblesPerBlock);
  s.brackets.assign(kGambleCount, std::nullopt);
  advance(s);
  return s;
}

EngineConfig EngineConfig::defaults() {
  EngineConfig c;
  for (std::size_t i = 0; i < ladder::kRungs; ++i) {
    c.comparators[i] = "That is a " + odds_text(i) + " chance.";
  }
  c.comparators[3] =
      "For comparison, in everyday life, a UK adult (age 20-49) has a 1 in 100 risk of dying "
      "every 10 years.";
  c.societal_reminder =
      "The policy will affect you as well, though you don't yet know whether you will benefit "
      "or be negatively affected.";
  return c;
}

std::string odds_text(std::size_t rung) {
  return "1 in " + with_thousands(ladder::kDenominators.at(rung));
}

Pictogram pictogram_for(std::size_t rung) {
  Pictogram p;
  p.numerator = 1;
  p.denominator = ladder::kDenominators.at(rung);
  p.icons = static_cast<int>(std::min<long>(p.denominator, 100));
  p.highlighted = 1;
  if (p.denominator > 100) p.caption = odds_text(rung);
  return p;
}

Phase content_phase(const SessionState& s) {
  return s.phase == Phase::Profile ? compute_phase(s) : s.phase;
}

Prompt next_prompt(const SessionState& s, const EngineConfig& config) {
  const Phase phase = content_phase(s);
  if (phase == Phase::Done) throw Error(ErrorCode::SessionComplete, "session is complete");
  Prompt prompt;
  prompt.phase = phase;
  prompt.own_ls = s.own_ls;
  if (phase == Phase::Vignettes) {
    if (!s.own_ls) {
      prompt.kind = PromptKind::OwnLifeSatisfaction;
      return prompt;
    }
    for (auto st : kLivingStates) {
      if (!s.ratings.ratings.contains(st)) {
        prompt.kind = PromptKind::VignetteRating;
        prompt.state = st;
        return prompt;
      }
    }
    prompt.kind = PromptKind::ReviseOrExplain;
    prompt.violations = unexplained_violations(s.ratings);
    return prompt;
  }

  const ActiveGamble& a = s.active.value();
  const GambleSpec& g = s.gamble_queue[a.queue_index];
  GamblePrompt gp;
  gp.queue_index = a.queue_index;
  gp.gamble = g;
  gp.ladder_index = a.ladder_index;
  gp.probability = ladder::probability(a.ladder_index);
  gp.pictogram = pictogram_for(a.ladder_index);
  gp.comparator = config.comparators[a.ladder_index];
  gp.baseline_label = label_for(s, g.baseline, g.basis);
  gp.win_label = label_for(s, g.win, g.basis);
  gp.lose_label = label_for(s, g.lose, g.basis);
  if (g.context == Context::Societal) gp.societal_reminder = config.societal_reminder;
  if (a.ladder_index > 0) {
    gp.changed_fields = {"odds"};
  } else if (a.queue_index == 0) {
    gp.changed_fields = {"baseline", "win", "lose", "context", "odds"};
  } else {
    const GambleSpec& prev = s.gamble_queue[a.queue_index - 1];
    if (prev.baseline != g.baseline) gp.changed_fields.emplace_back("baseline");
    if (prev.win != g.win) gp.changed_fields.emplace_back("win");
    if (prev.lose != g.lose) gp.changed_fields.emplace_back("lose");
    if (prev.context != g.context) gp.changed_fields.emplace_back("context");
    gp.changed_fields.emplace_back("odds");
  }
  for (std::size_t r = 0; r < a.ladder_index; ++r) gp.collapsed_previous_rungs.push_back(r);
  gp.collapsed_ratings = s.ratings.ratings;
  prompt.kind = PromptKind::Gamble;
  prompt.gamble = std::move(gp);
  return prompt;
}

SessionState apply_input(const SessionState& state, const SessionInput& input) {
  return record(state, input);
}

SessionState submit_choice(const SessionState& state, const ChoiceEvent& event) {
  return record(state, event);
}

SessionState rate_vignette(const SessionState& state, LifeState s, int value,
                           std::optional<std::string> explanation, Timestamp at) {
  return record(state, VignetteInput{s, value, std::move(explanation), at});
}

SessionState rate_own_life_satisfaction(const SessionState& state, int value, Timestamp at) {
  return record(state, OwnRatingInput{value, at});
}

SessionState go_back(const SessionState& state, Timestamp at) {
  if (state.applied.empty()) throw Error(ErrorCode::EmptyHistory, "nothing to revert");
  // The reverted entry is the newest transcript input not already reverted.
  std::vector<std::size_t> live;
  for (const auto& e : state.transcript) {
    if (const auto* rev = std::get_if<Revision>(&e.payload)) {
      (void)rev;
      live.pop_back();
    } else {
      live.push_back(e.seq);
    }
  }
  SessionState s = rebuild(state, state.applied.size() - 1);
  s.transcript.push_back(TranscriptEntry{s.transcript.size(), Revision{live.back(), at}});
  return s;
}

SessionState replay(const std::string& id, const ParticipantProfile& profile, std::uint64_t seed,
                    std::optional<SessionCondition> condition_override,
                    const std::vector<TranscriptEntry>& transcript) {
  SessionState s = create_session(profile, seed, condition_override);
  s.id = id;
  for (const auto& entry : transcript) {
    if (std::holds_alternative<Revision>(entry.payload)) {
      s = go_back(s, timestamp_of(entry));
    } else {
      SessionInput input = std::visit(
          Overloaded{[](const Revision&) -> SessionInput { return OwnRatingInput{}; },
                     [](const auto& in) -> SessionInput { return in; }},
          entry.payload);
      s = record(s, input);
    }
  }
  return s;
}

bool attention_item_passed(const QualityConfig& config, const std::string& item, int response) {
  const bool is_check = std::find(config.attention_items.begin(), config.attention_items.end(),
                                  item) != config.attention_items.end();
  return !is_check || response >= 4;
}

double completion_seconds(const SessionState& s) {
  if (s.profile.completion_seconds > 0) return s.profile.completion_seconds;
  if (s.transcript.empty()) return 0.0;
  const auto span = timestamp_of(s.transcript.back()) - timestamp_of(s.transcript.front());
  return std::chrono::duration<double>(span).count();
}

std::vector<StatePair> unexplained_violations(const VignetteRatings& r) {
  if (!r.complete()) return {};
  std::vector<StatePair> out;
  for (const auto& [lo, hi] : ordering_violations(r)) {
    if (!r.explanations.contains(lo) && !r.explanations.contains(hi)) out.emplace_back(lo, hi);
  }
  return out;
}

std::set<QualityFlag> quality_flags(const SessionState& s, const QualityConfig& t) {
  std::set<QualityFlag> flags;
  if (completion_seconds(s) < t.min_completion_seconds) flags.insert(QualityFlag::FastCompletion);
  if (s.profile.attention_checks_failed > t.max_attention_failures) {
    flags.insert(QualityFlag::FailedAttention);
  }
  if (!unexplained_violations(s.ratings).empty()) {
    flags.insert(QualityFlag::OrderViolationUnexplained);
  }
  for (std::size_t i = 0; i < s.gamble_queue.size(); ++i) {
    const auto& b = s.brackets[i];
    if (b && b->is_resolved()) continue;
    flags.insert(s.gamble_queue[i].context == Context::Personal ? QualityFlag::IncompletePersonal
                                                                : QualityFlag::IncompleteSocietal);
  }
  if (s.phase != Phase::Done) flags.insert(QualityFlag::DroppedConnection);
  return flags;
}

std::vector<ChoiceEvent> personal_choice_events(const SessionState& s) {
  std::vector<ChoiceEvent> out;
  for (const auto& in : s.applied) {
    const auto* e = std::get_if<ChoiceEvent>(&in);
    if (e && e->gamble.context == Context::Personal && e->response != Response::CantChoose) {
      out.push_back(*e);
    }
  }
  return out;
}

}  // namespace lifesat
