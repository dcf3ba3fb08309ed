#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lifesat/engine.hpp"
#include "lifesat/estimation.hpp"

namespace lifesat::sim {

// A synthetic respondent with known preferences. Deterministic agents
// (no sigma) accept iff the weighted gain beats the weighted loss by more
// than tie_epsilon and answer "can't choose" within it; stochastic agents
// accept with the power-logit probability at their sigma.
struct AgentSpec {
  std::map<LifeState, double> true_utilities;  // Death = 0, strictly increasing
  std::optional<double> sigma;
  std::optional<CptConfig> perceptual_weighting;
  double societal_multiplier = 1.0;  // scales the weighted loss in societal gambles
  double tie_epsilon = 1e-9;
  std::uint64_t seed = 0;
  std::map<LifeState, int> vignette_ratings = {{LifeState::A, 10}, {LifeState::B, 8},
                                               {LifeState::C, 6},  {LifeState::D, 4},
                                               {LifeState::E, 2}};
  int own_ls = 7;
  ParticipantProfile profile = default_profile();
  std::optional<SessionCondition> condition;

  static ParticipantProfile default_profile();
};

ValidationResult validate_agent(const AgentSpec& agent);

// Weighted gain minus weighted loss of taking the gamble.
double decision_margin(const AgentSpec& agent, const GambleSpec& gamble, double p);

// Failure probability at which a deterministic agent is exactly indifferent
// (without probability weighting or societal scaling).
double indifference_probability(const AgentSpec& agent, const GambleSpec& gamble);

// `rng` is required for stochastic agents.
Response decide(const AgentSpec& agent, const GambleSpec& gamble, double p,
                std::mt19937_64* rng = nullptr);

// Drives one agent through a full session using only the public engine API.
SessionState run_session(const AgentSpec& agent);

std::vector<SessionState> run_cohort(std::span<const AgentSpec> agents);

// Utilities rank^exponent (Death = 0, E = 1).
std::map<LifeState, double> power_utilities(double exponent);

// Random strictly concave utilities: unit first step, then each step
// shrinks by a factor drawn from [min_ratio, max_ratio].
std::map<LifeState, double> random_concave_utilities(std::mt19937_64& rng, double min_ratio = 0.3,
                                                     double max_ratio = 0.95);

// Uniform double in [0, 1) that does not depend on the standard library.
double uniform01(std::mt19937_64& rng);

}  // namespace lifesat::sim
