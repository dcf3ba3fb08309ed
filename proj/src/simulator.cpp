#include "lifesat/simulator.hpp"

#include <cmath>

#include "lifesat/error.hpp"

namespace lifesat::sim {

namespace {

// Fixed synthetic clock so transcripts are reproducible.
constexpr Timestamp kEpoch{std::chrono::milliseconds{1'700'000'000'000}};
constexpr std::chrono::milliseconds kStep{4'000};

std::pair<double, double> branch_weights(const AgentSpec& agent, double p) {
  if (!agent.perceptual_weighting) return {p, 1.0 - p};
  return {probability_weight(p, *agent.perceptual_weighting),
          probability_weight(1.0 - p, *agent.perceptual_weighting)};
}

}  // namespace

ParticipantProfile AgentSpec::default_profile() {
  ParticipantProfile p;
  p.age_band = "35-44";
  p.sex = "unspecified";
  p.party = "none";
  p.completion_seconds = 1200.0;
  return p;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ValidationResult validate_agent(const AgentSpec& a) {
  double prev = -1.0;
  double min_gap = INFINITY;
  for (auto s : kAllStatesAscending) {
    auto it = a.true_utilities.find(s);
    if (it == a.true_utilities.end()) return {false, "agent utilities must cover Death..A"};
    if (s == LifeState::Death && it->second != 0.0) return {false, "agent U(Death) must be 0"};
    if (s != LifeState::Death) {
      if (!(it->second > prev)) return {false, "agent utilities must be strictly increasing"};
      min_gap = std::min(min_gap, it->second - prev);
    }
    prev = it->second;
  }
  if (a.sigma && !(*a.sigma > 0)) return {false, "agent sigma must be positive"};
  if (!(a.societal_multiplier >= 1.0)) return {false, "societal multiplier must be >= 1"};
  if (!(a.tie_epsilon > 0) || !(a.tie_epsilon < min_gap)) {
    return {false, "tie_epsilon must be positive and below the smallest utility gap"};
  }
  return validate_profile(a.profile);
}

double decision_margin(const AgentSpec& a, const GambleSpec& g, double p) {
  const auto [w_lose, w_win] = branch_weights(a, p);
  const double m = g.context == Context::Societal ? a.societal_multiplier : 1.0;
  const double ub = a.true_utilities.at(g.baseline);
  return w_win * (a.true_utilities.at(g.win) - ub) - m * w_lose * (ub - a.true_utilities.at(g.lose));
}

double indifference_probability(const AgentSpec& a, const GambleSpec& g) {
  const double uw = a.true_utilities.at(g.win);
  return (uw - a.true_utilities.at(g.baseline)) / (uw - a.true_utilities.at(g.lose));
}

Response decide(const AgentSpec& a, const GambleSpec& g, double p, std::mt19937_64* rng) {
  const double margin = decision_margin(a, g, p);
  if (!a.sigma) {
    if (margin > a.tie_epsilon) return Response::AcceptGamble;
    if (std::abs(margin) <= a.tie_epsilon) return Response::CantChoose;
    return Response::RefuseGamble;
  }
  if (!rng) throw Error(ErrorCode::ContractViolation, "stochastic agent needs a random source");
  const auto [w_lose, w_win] = branch_weights(a, p);
  const double ub = a.true_utilities.at(g.baseline);
  const double ug = ub + margin / (w_lose + w_win);
  const double p_accept = ug <= 0.0 ? 0.0 : choice_probability(ug, ub, *a.sigma);
  return uniform01(*rng) < p_accept ? Response::AcceptGamble : Response::RefuseGamble;
}

SessionState run_session(const AgentSpec& agent) {
  if (auto v = validate_agent(agent); !v) throw Error(ErrorCode::Validation, v.violation);
  std::mt19937_64 rng(agent.seed ^ 0x9e3779b97f4a7c15ULL);
  SessionState s = create_session(agent.profile, agent.seed, agent.condition);
  Timestamp clock = kEpoch;
  while (content_phase(s) != Phase::Done) {
    clock += kStep;
    const Prompt prompt = next_prompt(s);
    switch (prompt.kind) {
      case PromptKind::OwnLifeSatisfaction:
        s = rate_own_life_satisfaction(s, agent.own_ls, clock);
        break;
      case PromptKind::VignetteRating:
        s = rate_vignette(s, *prompt.state, agent.vignette_ratings.at(*prompt.state), std::nullopt,
                          clock);
        break;
      case PromptKind::ReviseOrExplain: {
        const auto [lower, higher] = prompt.violations.front();
        s = rate_vignette(s, lower, agent.vignette_ratings.at(lower),
                          "rated from the agent's fixed table", clock);
        break;
      }
      case PromptKind::Gamble: {
        const auto& gp = *prompt.gamble;
        const Response r = decide(agent, gp.gamble, gp.probability, &rng);
        s = submit_choice(s, ChoiceEvent{gp.gamble, gp.ladder_index, r, clock});
        break;
      }
    }
  }
  return s;
}

std::vector<SessionState> run_cohort(std::span<const AgentSpec> agents) {
  std::vector<SessionState> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(run_session(a));
  return out;
}

std::map<LifeState, double> power_utilities(double exponent) {
  std::map<LifeState, double> u;
  for (auto s : kAllStatesAscending) u[s] = std::pow(static_cast<double>(rank(s)), exponent);
  return u;
}

std::map<LifeState, double> random_concave_utilities(std::mt19937_64& rng, double min_ratio,
                                                     double max_ratio) {
  std::map<LifeState, double> u;
  u[LifeState::Death] = 0.0;
  double step = 1.0;
  double level = 0.0;
  for (int r = 1; r <= 5; ++r) {
    if (r > 1) step *= min_ratio + (max_ratio - min_ratio) * uniform01(rng);
    level += step;
    u[state_from_rank(r)] = level;
  }
  return u;
}

}  // namespace lifesat::sim
