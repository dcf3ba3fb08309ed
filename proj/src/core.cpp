#include "lifesat/core.hpp"

#include <cmath>
#include <sstream>

#include "lifesat/error.hpp"

namespace lifesat {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ContractViolation: return "contract_violation";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::IncompleteInput: return "incomplete_input";
    case ErrorCode::Sequencing: return "sequencing";
    case ErrorCode::SessionComplete: return "session_complete";
    case ErrorCode::EmptyHistory: return "empty_history";
    case ErrorCode::NotEstimable: return "not_estimable";
    case ErrorCode::EstimationFailure: return "estimation_failure";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Range: return "range";
    case ErrorCode::ZeroVariance: return "zero_variance";
    case ErrorCode::UndefinedStatistic: return "undefined_statistic";
    case ErrorCode::Version: return "version";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

LifeState state_from_rank(int r) {
  if (r < 0 || r > 5) {
    throw Error(ErrorCode::ContractViolation,
                "life state rank out of range: " + std::to_string(r));
  }
  return static_cast<LifeState>(r);
}

std::string_view to_string(LifeState s) noexcept {
  switch (s) {
    case LifeState::Death: return "Death";
    case LifeState::E: return "E";
    case LifeState::D: return "D";
    case LifeState::C: return "C";
    case LifeState::B: return "B";
    case LifeState::A: return "A";
  }
  return "?";
}

LifeState parse_life_state(std::string_view text) {
  for (auto s : kAllStatesAscending) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::Parse, "unknown life state '" + std::string(text) + "'");
}

std::string_view to_string(Context c) noexcept {
  return c == Context::Personal ? "personal" : "societal";
}

std::string_view to_string(Block b) noexcept {
  switch (b) {
    case Block::AdjacentPersonal: return "adjacent_personal";
    case Block::AdjacentSocietal: return "adjacent_societal";
    case Block::NonAdjacentPersonal: return "non_adjacent_personal";
  }
  return "?";
}

std::string_view to_string(Basis b) noexcept {
  return b == Basis::Letters ? "letters" : "ls_scores";
}

Context parse_context(std::string_view text) {
  if (text == "personal") return Context::Personal;
  if (text == "societal") return Context::Societal;
  throw Error(ErrorCode::Parse, "unknown context '" + std::string(text) + "'");
}

Block parse_block(std::string_view text) {
  for (auto b : {Block::AdjacentPersonal, Block::AdjacentSocietal,
                 Block::NonAdjacentPersonal}) {
    if (to_string(b) == text) return b;
  }
  throw Error(ErrorCode::Parse, "unknown block '" + std::string(text) + "'");
}

Basis parse_basis(std::string_view text) {
  if (text == "letters") return Basis::Letters;
  if (text == "ls_scores") return Basis::LifeSatisfactionScores;
  throw Error(ErrorCode::Parse, "unknown basis '" + std::string(text) + "'");
}

namespace ladder {

std::optional<std::size_t> next(std::size_t current) {
  if (current >= kRungs) {
    throw Error(ErrorCode::ContractViolation,
                "ladder index out of range: " + std::to_string(current));
  }
  if (current + 1 == kRungs) return std::nullopt;
  return current + 1;
}

std::optional<std::size_t> rung_of(double p) {
  for (std::size_t i = 0; i < kRungs; ++i) {
    if (std::abs(p - probability(i)) <= 1e-12) return i;
  }
  return std::nullopt;
}

}  // namespace ladder

std::string describe(const GambleSpec& g) {
  std::ostringstream os;
  os << to_string(g.baseline) << " vs " << to_string(g.win) << '/'
     << to_string(g.lose) << " (" << to_string(g.context) << ", "
     << to_string(g.block) << ')';
  return os.str();
}

ValidationResult validate_gamble(const GambleSpec& g) {
  auto fail = [](std::string why) { return ValidationResult{false, std::move(why)}; };
  if (g.baseline == LifeState::Death) return fail("death cannot be a baseline state");
  const int lose_gap = rank(g.baseline) - rank(g.lose);
  const int win_gap = rank(g.win) - rank(g.baseline);
  if (lose_gap <= 0 || win_gap <= 0) {
    return fail("states must satisfy rank(lose) < rank(baseline) < rank(win)");
  }
  const bool societal_block = g.block == Block::AdjacentSocietal;
  if (societal_block != (g.context == Context::Societal)) {
    return fail("block and context disagree");
  }
  switch (g.block) {
    case Block::AdjacentPersonal:
    case Block::AdjacentSocietal:
      if (lose_gap != 1 || win_gap != 1) return fail("adjacent block requires unit gaps");
      break;
    case Block::NonAdjacentPersonal:
      if (lose_gap == 1 && win_gap == 1) return fail("non-adjacent block requires a gap > 1");
      if (lose_gap > 3 || win_gap > 3) return fail("non-adjacent gaps must be <= 3");
      break;
  }
  return {};
}

std::array<GambleSpec, 4> adjacent_triples(Context context, Basis basis) {
  const Block block =
      context == Context::Personal ? Block::AdjacentPersonal : Block::AdjacentSocietal;
  std::array<GambleSpec, 4> out{};
  for (int b = 1; b <= 4; ++b) {
    out[b - 1] = GambleSpec{state_from_rank(b), state_from_rank(b + 1),
                            state_from_rank(b - 1), context, block, basis};
  }
  return out;
}

std::vector<GambleSpec> non_adjacent_triples(Basis basis) {
  std::vector<GambleSpec> out;
  for (int b = 1; b <= 4; ++b) {
    for (int l = 0; l < b; ++l) {
      for (int w = b + 1; w <= 5; ++w) {
        GambleSpec g{state_from_rank(b), state_from_rank(w), state_from_rank(l),
                     Context::Personal, Block::NonAdjacentPersonal, basis};
        if (validate_gamble(g)) out.push_back(g);
      }
    }
  }
  return out;
}

IndifferenceBracket IndifferenceBracket::resolved(std::optional<std::size_t> accepted,
                                                  std::optional<std::size_t> rejected) {
  if ((accepted && *accepted >= ladder::kRungs) || (rejected && *rejected >= ladder::kRungs)) {
    throw Error(ErrorCode::ContractViolation, "bracket rung out of range");
  }
  // Higher rung index = lower probability.
  if (accepted && rejected && *accepted <= *rejected) {
    throw Error(ErrorCode::ContractViolation,
                "bracket requires highest_accepted < lowest_rejected");
  }
  return {BracketStatus::Resolved, accepted, rejected};
}

IndifferenceBracket IndifferenceBracket::undecidable() { return {}; }

IndifferenceBracket IndifferenceBracket::from_probabilities(double highest_accepted,
                                                            double lowest_rejected) {
  std::optional<std::size_t> acc;
  std::optional<std::size_t> rej;
  if (std::abs(highest_accepted) > 1e-12) {
    acc = ladder::rung_of(highest_accepted);
    if (!acc) throw Error(ErrorCode::ContractViolation, "accepted probability is not a rung");
  }
  if (std::abs(lowest_rejected - 1.0) > 1e-12) {
    rej = ladder::rung_of(lowest_rejected);
    if (!rej) throw Error(ErrorCode::ContractViolation, "rejected probability is not a rung");
  }
  if (!acc && !rej) {
    throw Error(ErrorCode::ContractViolation, "bracket (0, 1) is not reachable on the ladder");
  }
  return resolved(acc, rej);
}

double IndifferenceBracket::highest_accepted() const {
  return accepted_rung ? ladder::probability(*accepted_rung) : 0.0;
}

double IndifferenceBracket::lowest_rejected() const {
  return rejected_rung ? ladder::probability(*rejected_rung) : 1.0;
}

bool VignetteRatings::complete() const {
  for (auto s : kLivingStates) {
    if (!ratings.contains(s)) return false;
  }
  return true;
}

std::vector<StatePair> ordering_violations(const VignetteRatings& r) {
  if (!r.complete()) {
    throw Error(ErrorCode::IncompleteInput, "all five vignette ratings are required");
  }
  std::vector<StatePair> out;
  for (int lower = 1; lower <= 4; ++lower) {
    const auto lo = state_from_rank(lower);
    const auto hi = state_from_rank(lower + 1);
    if (r.ratings.at(lo) > r.ratings.at(hi)) out.emplace_back(lo, hi);
  }
  return out;
}

}  // namespace lifesat
