#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lifesat/core.hpp"
#include "lifesat/engine.hpp"

namespace lifesat {

struct IndifferencePoint {
  double p_star = 0.5;
  bool infinite_aversion = false;
};

// Log-scale midpoint of a resolved bracket. Throws NotEstimable when the
// bracket is Undecidable.
IndifferencePoint indifference_point(const IndifferenceBracket& bracket);

// Linear-in-log-odds probability weighting parameters.
struct CptConfig {
  double delta = 1.0;
  double gamma = 1.0;

  static CptConfig median_respondent() { return {0.77, 0.44}; }
  static CptConfig extreme_respondent() { return {1.19, 0.27}; }
  friend bool operator==(const CptConfig&, const CptConfig&) = default;
};

// delta p^gamma / (delta p^gamma + (1-p)^gamma); w(0) = 0, w(1) = 1.
double probability_weight(double p, const CptConfig& cpt);

// Normalized decision weight on the losing branch at indifference: p itself
// without weighting, w(p) / (w(p) + w(1-p)) with it.
double loss_weight(double p_star, const std::optional<CptConfig>& cpt);

struct LossAversion {
  double lambda = 1.0;        // (0, +inf]
  double lambda_prime = 0.0;  // (-1, 1]

  static LossAversion from_lambda(double lambda);
};

double lambda_prime(double lambda);
double lambda_from_prime(double lambda_prime);

LossAversion lambda_from_gamble(const IndifferencePoint& p,
                                const std::optional<CptConfig>& cpt = std::nullopt);

// Estimation scale fixes the two lowest states of the curve at 0 and 1:
// (Death, E) when death is included, (E, D) when it is not. Reporting scale
// fixes the lowest state at 0 and A at 1.
enum class Scale { Estimation, Reporting };
enum class Method { ChainedSG, ChainedSGCpt, DiscreteChoiceMLE };

std::string_view to_string(Scale s) noexcept;
std::string_view to_string(Method m) noexcept;
Scale parse_scale(std::string_view text);
Method parse_method(std::string_view text);

struct UtilityCurve {
  Context context = Context::Personal;
  bool include_death = true;
  std::map<LifeState, double> values;
  Scale scale = Scale::Estimation;
  Method method = Method::ChainedSG;

  double at(LifeState s) const;
  LifeState lowest() const { return include_death ? LifeState::Death : LifeState::E; }
  UtilityCurve to_reporting() const;
  bool strictly_increasing() const;
};

// Indifference points of the four adjacent gambles keyed by baseline state.
using ChainPoints = std::map<LifeState, IndifferencePoint>;

// Chained standard gamble over E -> D -> C -> B -> A on the Estimation scale.
// Throws NotEstimable when the death gamble shows infinite aversion (use
// chained_solve_without_death) and EstimationFailure for any other p* = 0.
UtilityCurve chained_solve(const ChainPoints& points, Context context,
                           const std::optional<CptConfig>& cpt = std::nullopt);

// Same chain with the death gamble dropped, anchored at U_E = 0, U_D = 1.
UtilityCurve chained_solve_without_death(const ChainPoints& points, Context context,
                                         const std::optional<CptConfig>& cpt = std::nullopt);

struct MleOptions {
  double sigma_max = 1e4;
  double sigma_min = 1e-4;
  double step_tolerance = 1e-8;
  double objective_tolerance = 1e-10;
  int max_iterations = 5000;
  std::optional<UtilityCurve> seed_curve;  // chained-SG start, Estimation scale
};

struct MleFit {
  UtilityCurve utilities;  // Estimation scale, include_death
  double sigma = 1.0;
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  double mcfadden_r2 = 0.0;
  double fraction_correct = 0.0;
  std::size_t observations = 0;
  int starts_converged = 0;
  bool boundary_fit = false;
  // (log increments for D, C, B, A above U_E = 1, log sigma)
  std::array<double, 5> parameters{};
};

// P(choose the gamble) under the power-form binomial logit.
double choice_probability(double gamble_utility, double baseline_utility, double sigma);

// Log-likelihood of accept/refuse events (can't-choose ignored) for a curve
// on the Estimation scale with death included.
double log_likelihood(std::span<const ChoiceEvent> events, const UtilityCurve& curve,
                      double sigma);

// Same, in the optimizer's transformed parameters.
double log_likelihood(std::span<const ChoiceEvent> events, std::span<const double> parameters);

double mcfadden_r2(double log_likelihood, double null_log_likelihood);

MleFit mle_fit(std::span<const ChoiceEvent> events, const MleOptions& options = {});

// Loss aversion per adjacent gamble keyed by baseline; nullopt = undecidable.
using GambleLossAversion = std::map<LifeState, std::optional<LossAversion>>;

enum class GambleSubset { Single, All, NoDeath, PhysHealth };
std::string_view to_string(GambleSubset s) noexcept;

// Baselines of the adjacent gambles that make up a subset.
std::vector<LifeState> subset_gambles(GambleSubset subset, LifeState single = LifeState::E);

// Mean lambda' over the subset, absent if any gamble in it is undecidable.
std::optional<double> participant_summary(const GambleLossAversion& las, GambleSubset subset,
                                          LifeState single = LifeState::E);

// Everything estimable from one session.
struct SessionEstimates {
  std::string participant;
  std::map<Context, std::map<LifeState, std::optional<IndifferencePoint>>> points;
  std::map<Context, GambleLossAversion> loss_aversion;
  std::optional<UtilityCurve> personal;
  std::optional<UtilityCurve> personal_no_death;
  std::optional<UtilityCurve> societal;
  std::optional<UtilityCurve> societal_no_death;
  std::optional<MleFit> mle;
  std::vector<std::string> diagnostics;
};

SessionEstimates estimate_session(const SessionState& session,
                                  const std::optional<CptConfig>& cpt = std::nullopt,
                                  bool fit_mle = true);

}  // namespace lifesat
