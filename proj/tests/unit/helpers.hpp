#pragma once

#include <functional>

#include "lifesat/engine.hpp"

namespace testing_helpers {

using namespace lifesat;

inline Timestamp at_ms(long long ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

inline ParticipantProfile profile() {
  ParticipantProfile p;
  p.age_band = "25-34";
  p.sex = "f";
  p.party = "green";
  p.completion_seconds = 900;
  return p;
}

// Answers the vignette phase with a monotone table.
inline SessionState answer_vignettes(SessionState s, int own = 7) {
  const std::map<LifeState, int> table = {{LifeState::A, 10}, {LifeState::B, 8}, {LifeState::C, 6},
                                          {LifeState::D, 4},  {LifeState::E, 2}};
  long long t = 1000;
  while (content_phase(s) == Phase::Vignettes) {
    const auto p = next_prompt(s);
    if (p.kind == PromptKind::OwnLifeSatisfaction) {
      s = rate_own_life_satisfaction(s, own, at_ms(t += 10));
    } else {
      s = rate_vignette(s, *p.state, table.at(*p.state), std::nullopt, at_ms(t += 10));
    }
  }
  return s;
}

// Drives the whole session; `choose` picks the response for each gamble prompt.
inline SessionState drive(SessionState s, const std::function<Response(const GamblePrompt&)>& choose) {
  long long t = 100000;
  while (content_phase(s) != Phase::Done) {
    if (content_phase(s) == Phase::Vignettes) {
      s = answer_vignettes(s);
      continue;
    }
    const auto p = next_prompt(s);
    REQUIRE(p.kind == PromptKind::Gamble);
    const auto& g = *p.gamble;
    s = submit_choice(s, ChoiceEvent{g.gamble, g.ladder_index, choose(g), at_ms(t += 10)});
  }
  return s;
}

}  // namespace testing_helpers
