#include "lifesat/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lifesat/error.hpp"
#include "lifesat/optimize.hpp"

namespace lifesat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::array<LifeState, 4> kChainBaselines = {LifeState::E, LifeState::D, LifeState::C,
                                                      LifeState::B};

bool is_identity(const CptConfig& c) { return c.delta == 1.0 && c.gamma == 1.0; }

const IndifferencePoint& point_for(const ChainPoints& points, LifeState baseline) {
  auto it = points.find(baseline);
  if (it == points.end()) {
    throw Error(ErrorCode::IncompleteInput,
                "missing indifference point for baseline " + std::string(to_string(baseline)));
  }
  return it->second;
}

double solve_win(double u_base, double u_lose, double q) { return (u_base - q * u_lose) / (1.0 - q); }

// log(1 / (1 + exp(-x))), stable for large |x|.
double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Utilities by rank (Death, E, D, C, B, A) from transformed parameters, and
// d U[rank] / d param[j] = exp(param[j]) for rank >= j + 2.
std::array<double, 6> utilities_from(std::span<const double> params) {
  std::array<double, 6> u{0.0, 1.0, 0, 0, 0, 0};
  for (std::size_t j = 0; j < 4; ++j) u[j + 2] = u[j + 1] + std::exp(params[j]);
  return u;
}

double utility_derivative(int rank, std::size_t j, std::span<const double> params) {
  return rank >= static_cast<int>(j) + 2 ? std::exp(params[j]) : 0.0;
}

// Negative log-likelihood and its gradient.
double objective(std::span<const ChoiceEvent> events, std::span<const double> params,
                 std::span<double> grad) {
  const auto u = utilities_from(params);
  const double sigma = std::exp(params[4]);
  std::fill(grad.begin(), grad.end(), 0.0);
  double nll = 0.0;
  for (const auto& e : events) {
    if (e.response == Response::CantChoose) continue;
    const double p = ladder::probability(e.ladder_index);
    const int b = rank(e.gamble.baseline);
    const int w = rank(e.gamble.win);
    const int l = rank(e.gamble.lose);
    const double ug = p * u[l] + (1.0 - p) * u[w];
    const double d = sigma * (std::log(ug) - std::log(u[b]));
    const double sign = e.response == Response::AcceptGamble ? 1.0 : -1.0;
    nll -= log_sigmoid(sign * d);
    if (grad.empty()) continue;
    // d/dd of -log sigmoid(sign d) = -sign * (1 - sigmoid(sign d))
    const double dd = -sign * sigmoid(-sign * d);
    for (std::size_t j = 0; j < 4; ++j) {
      const double dug = p * utility_derivative(l, j, params) + (1.0 - p) * utility_derivative(w, j, params);
      const double dub = utility_derivative(b, j, params);
      grad[j] += dd * sigma * (dug / ug - dub / u[b]);
    }
    grad[4] += dd * d;
  }
  return nll;
}

}  // namespace

IndifferencePoint indifference_point(const IndifferenceBracket& bracket) {
  if (!bracket.is_resolved()) {
    throw Error(ErrorCode::NotEstimable, "undecidable gamble has no indifference point");
  }
  const double lo = bracket.highest_accepted();
  if (lo == 0.0) return {0.0, true};
  return {std::sqrt(lo * bracket.lowest_rejected()), false};
}

double probability_weight(double p, const CptConfig& cpt) {
  if (!(cpt.delta > 0) || !(cpt.gamma > 0)) {
    throw Error(ErrorCode::Domain, "probability weighting needs delta > 0 and gamma > 0");
  }
  if (p < 0.0 || p > 1.0) throw Error(ErrorCode::Domain, "probability outside [0, 1]");
  if (p == 0.0 || p == 1.0 || is_identity(cpt)) return p;
  const double num = cpt.delta * std::pow(p, cpt.gamma);
  return num / (num + std::pow(1.0 - p, cpt.gamma));
}

double loss_weight(double p_star, const std::optional<CptConfig>& cpt) {
  if (!cpt || is_identity(*cpt)) return p_star;
  const double lose = probability_weight(p_star, *cpt);
  const double win = probability_weight(1.0 - p_star, *cpt);
  return lose / (lose + win);
}

LossAversion LossAversion::from_lambda(double lambda) {
  return {lambda, ::lifesat::lambda_prime(lambda)};
}

double lambda_prime(double lambda) {
  if (!(lambda > 0)) throw Error(ErrorCode::Domain, "loss aversion must be positive");
  if (std::isinf(lambda)) return 1.0;
  return (lambda - 1.0) / (lambda + 1.0);
}

double lambda_from_prime(double m) {
  if (!(m > -1.0) || m > 1.0) throw Error(ErrorCode::Domain, "lambda' must lie in (-1, 1]");
  if (m == 1.0) return kInf;
  return (1.0 + m) / (1.0 - m);
}

LossAversion lambda_from_gamble(const IndifferencePoint& p, const std::optional<CptConfig>& cpt) {
  if (p.infinite_aversion || p.p_star == 0.0) return {kInf, 1.0};
  if (!(p.p_star > 0.0 && p.p_star < 1.0)) {
    throw Error(ErrorCode::Domain, "indifference probability must lie in (0, 1)");
  }
  double lambda = 0.0;
  if (!cpt || is_identity(*cpt)) {
    lambda = (1.0 - p.p_star) / p.p_star;
  } else {
    lambda = probability_weight(1.0 - p.p_star, *cpt) / probability_weight(p.p_star, *cpt);
  }
  return LossAversion::from_lambda(lambda);
}

std::string_view to_string(Scale s) noexcept {
  return s == Scale::Estimation ? "estimation" : "reporting";
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::ChainedSG: return "chained_sg";
    case Method::ChainedSGCpt: return "chained_sg_cpt";
    case Method::DiscreteChoiceMLE: return "discrete_choice_mle";
  }
  return "?";
}

Scale parse_scale(std::string_view text) {
  if (text == "estimation") return Scale::Estimation;
  if (text == "reporting") return Scale::Reporting;
  throw Error(ErrorCode::Parse, "unknown scale '" + std::string(text) + "'");
}

Method parse_method(std::string_view text) {
  for (auto m : {Method::ChainedSG, Method::ChainedSGCpt, Method::DiscreteChoiceMLE}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorCode::Parse, "unknown method '" + std::string(text) + "'");
}

double UtilityCurve::at(LifeState s) const {
  auto it = values.find(s);
  if (it == values.end()) {
    throw Error(ErrorCode::NotFound, "curve has no value for " + std::string(to_string(s)));
  }
  return it->second;
}

UtilityCurve UtilityCurve::to_reporting() const {
  if (scale == Scale::Reporting) return *this;
  UtilityCurve out = *this;
  const double floor = at(lowest());
  const double top = at(LifeState::A) - floor;
  for (auto& [state, v] : out.values) v = (v - floor) / top;
  out.values[lowest()] = 0.0;
  out.values[LifeState::A] = 1.0;
  out.scale = Scale::Reporting;
  return out;
}

bool UtilityCurve::strictly_increasing() const {
  double prev = -kInf;
  for (auto s : kAllStatesAscending) {
    auto it = values.find(s);
    if (it == values.end()) continue;
    if (!(it->second > prev)) return false;
    prev = it->second;
  }
  return true;
}

UtilityCurve chained_solve(const ChainPoints& points, Context context,
                           const std::optional<CptConfig>& cpt) {
  for (auto b : kChainBaselines) point_for(points, b);
  if (point_for(points, LifeState::E).infinite_aversion) {
    throw Error(ErrorCode::NotEstimable,
                "infinite aversion on the death gamble; estimate without death");
  }
  UtilityCurve curve;
  curve.context = context;
  curve.include_death = true;
  curve.scale = Scale::Estimation;
  curve.method = cpt ? Method::ChainedSGCpt : Method::ChainedSG;
  curve.values[LifeState::Death] = 0.0;
  curve.values[LifeState::E] = 1.0;
  for (auto b : kChainBaselines) {
    const auto& p = point_for(points, b);
    if (p.infinite_aversion || p.p_star <= 0.0) {
      throw Error(ErrorCode::EstimationFailure,
                  "p* = 0 on gamble with baseline " + std::string(to_string(b)) +
                      ": utilities would not be strictly increasing");
    }
    const double q = loss_weight(p.p_star, cpt);
    const auto lose = state_from_rank(rank(b) - 1);
    const auto win = state_from_rank(rank(b) + 1);
    curve.values[win] = solve_win(curve.values[b], curve.values[lose], q);
  }
  if (!curve.strictly_increasing()) {
    throw Error(ErrorCode::EstimationFailure, "chained utilities are not strictly increasing");
  }
  return curve;
}

UtilityCurve chained_solve_without_death(const ChainPoints& points, Context context,
                                         const std::optional<CptConfig>& cpt) {
  UtilityCurve curve;
  curve.context = context;
  curve.include_death = false;
  curve.scale = Scale::Estimation;
  curve.method = cpt ? Method::ChainedSGCpt : Method::ChainedSG;
  curve.values[LifeState::E] = 0.0;
  curve.values[LifeState::D] = 1.0;
  for (auto b : {LifeState::D, LifeState::C, LifeState::B}) {
    const auto& p = point_for(points, b);
    if (p.infinite_aversion || p.p_star <= 0.0) {
      throw Error(ErrorCode::EstimationFailure,
                  "p* = 0 on gamble with baseline " + std::string(to_string(b)));
    }
    const double q = loss_weight(p.p_star, cpt);
    const auto lose = state_from_rank(rank(b) - 1);
    const auto win = state_from_rank(rank(b) + 1);
    curve.values[win] = solve_win(curve.values[b], curve.values[lose], q);
  }
  if (!curve.strictly_increasing()) {
    throw Error(ErrorCode::EstimationFailure, "chained utilities are not strictly increasing");
  }
  return curve;
}

double choice_probability(double gamble_utility, double baseline_utility, double sigma) {
  return sigmoid(sigma * (std::log(gamble_utility) - std::log(baseline_utility)));
}

double log_likelihood(std::span<const ChoiceEvent> events, std::span<const double> params) {
  return -objective(events, params, {});
}

double log_likelihood(std::span<const ChoiceEvent> events, const UtilityCurve& curve,
                      double sigma) {
  double ll = 0.0;
  for (const auto& e : events) {
    if (e.response == Response::CantChoose) continue;
    const double p = ladder::probability(e.ladder_index);
    const double ug = p * curve.at(e.gamble.lose) + (1.0 - p) * curve.at(e.gamble.win);
    const double d = sigma * (std::log(ug) - std::log(curve.at(e.gamble.baseline)));
    ll += log_sigmoid(e.response == Response::AcceptGamble ? d : -d);
  }
  return ll;
}

double mcfadden_r2(double ll, double null_ll) {
  if (null_ll == 0.0) throw Error(ErrorCode::UndefinedStatistic, "null log-likelihood is zero");
  return 1.0 - ll / null_ll;
}

MleFit mle_fit(std::span<const ChoiceEvent> all_events, const MleOptions& opt) {
  std::vector<ChoiceEvent> events;
  for (const auto& e : all_events) {
    if (e.response != Response::CantChoose) events.push_back(e);
  }
  if (events.empty()) {
    throw Error(ErrorCode::NotEstimable, "no accept/refuse events to fit");
  }

  const double log_sigma_max = std::log(opt.sigma_max);
  optimize::Box box{{-20, -20, -20, -20, std::log(opt.sigma_min)},
                    {15, 15, 15, 15, log_sigma_max}};

  std::vector<std::vector<double>> starts;
  auto start_from = [&](std::array<double, 4> increments, double sigma) {
    std::vector<double> x(5);
    for (std::size_t j = 0; j < 4; ++j) x[j] = std::log(increments[j]);
    x[4] = std::log(sigma);
    starts.push_back(x);
  };
  if (opt.seed_curve && opt.seed_curve->include_death && opt.seed_curve->strictly_increasing()) {
    const auto& c = *opt.seed_curve;
    const double scale = 1.0 / (c.at(LifeState::E) - c.at(LifeState::Death));
    std::array<double, 4> inc{};
    for (int r = 2; r <= 5; ++r) {
      inc[r - 2] = scale * (c.at(state_from_rank(r)) - c.at(state_from_rank(r - 1)));
    }
    start_from(inc, 10.0);
  }
  start_from({1.0, 1.0, 1.0, 1.0}, 1.0);
  start_from({0.5, 0.25, 0.125, 0.0625}, 5.0);
  start_from({0.2, 0.2, 0.2, 0.2}, 20.0);
  start_from({0.1, 0.2, 0.4, 0.8}, 2.0);
  start_from({2.0, 2.0, 2.0, 2.0}, 50.0);

  const auto f = [&](std::span<const double> x, std::span<double> g) {
    return objective(events, x, g);
  };
  optimize::Options oo;
  oo.step_tolerance = opt.step_tolerance;
  oo.objective_tolerance = opt.objective_tolerance;
  oo.max_iterations = opt.max_iterations;

  std::optional<optimize::Result> best;
  int converged = 0;
  for (const auto& x0 : starts) {
    auto r = optimize::minimize(f, x0, box, oo);
    if (!r.converged) continue;
    ++converged;
    r = optimize::polish(f, r.x, box, 1e-10, 500);
    // At large sigma each logit argument carries ~sigma ulps of error, so f is
    // only good to about 1e-12. Starts within that band are the same optimum
    // and are ranked by how stationary they are.
    const double tie = 1e-10 * std::max(1.0, std::abs(r.value));
    const bool better = !best || r.value < best->value - tie ||
                        (r.value <= best->value + tie && r.projected_gradient < best->projected_gradient);
    if (better) best = std::move(r);
  }
  if (!best) {
    throw Error(ErrorCode::EstimationFailure, "no optimizer start converged");
  }

  MleFit fit;
  std::copy(best->x.begin(), best->x.end(), fit.parameters.begin());
  const auto u = utilities_from(best->x);
  fit.utilities.context = Context::Personal;
  fit.utilities.include_death = true;
  fit.utilities.scale = Scale::Estimation;
  fit.utilities.method = Method::DiscreteChoiceMLE;
  for (auto s : kAllStatesAscending) fit.utilities.values[s] = u[rank(s)];
  fit.sigma = std::exp(best->x[4]);
  fit.log_likelihood = -best->value;
  fit.observations = events.size();
  fit.null_log_likelihood = static_cast<double>(events.size()) * std::log(0.5);
  fit.mcfadden_r2 = mcfadden_r2(fit.log_likelihood, fit.null_log_likelihood);
  std::size_t correct = 0;
  for (const auto& e : events) {
    const double p = ladder::probability(e.ladder_index);
    const double ug = p * u[rank(e.gamble.lose)] + (1.0 - p) * u[rank(e.gamble.win)];
    const double pa = choice_probability(ug, u[rank(e.gamble.baseline)], fit.sigma);
    const double observed = e.response == Response::AcceptGamble ? pa : 1.0 - pa;
    if (observed > 0.5) ++correct;
  }
  fit.fraction_correct = static_cast<double>(correct) / static_cast<double>(events.size());
  fit.starts_converged = converged;
  if (correct == events.size()) {
    // Perfectly separated choices: the likelihood keeps rising with sigma,
    // so pin it at the cap and refit the utilities there.
    optimize::Box capped = box;
    capped.lower[4] = log_sigma_max;
    auto x = best->x;
    x[4] = log_sigma_max;
    best = optimize::polish(f, optimize::minimize(f, x, capped, oo).x, capped, 1e-10, 500);
    std::copy(best->x.begin(), best->x.end(), fit.parameters.begin());
    const auto uc = utilities_from(best->x);
    for (auto s : kAllStatesAscending) fit.utilities.values[s] = uc[rank(s)];
    fit.sigma = opt.sigma_max;
    fit.log_likelihood = -best->value;
    fit.mcfadden_r2 = mcfadden_r2(fit.log_likelihood, fit.null_log_likelihood);
  }
  fit.boundary_fit = fit.parameters[4] >= log_sigma_max - 1e-9;
  for (std::size_t j = 0; j < 4; ++j) {
    if (best->x[j] <= box.lower[j] + 1e-9 || best->x[j] >= box.upper[j] - 1e-9) {
      fit.boundary_fit = true;
    }
  }
  return fit;
}

std::string_view to_string(GambleSubset s) noexcept {
  switch (s) {
    case GambleSubset::Single: return "single";
    case GambleSubset::All: return "all";
    case GambleSubset::NoDeath: return "no_death";
    case GambleSubset::PhysHealth: return "phys_health";
  }
  return "?";
}

std::vector<LifeState> subset_gambles(GambleSubset subset, LifeState single) {
  switch (subset) {
    case GambleSubset::Single: return {single};
    case GambleSubset::All: return {LifeState::E, LifeState::D, LifeState::C, LifeState::B};
    case GambleSubset::NoDeath: return {LifeState::D, LifeState::C, LifeState::B};
    // Gambles among A, B, C and D only: none may touch E or Death.
    case GambleSubset::PhysHealth: return {LifeState::C, LifeState::B};
  }
  return {};
}

std::optional<double> participant_summary(const GambleLossAversion& las, GambleSubset subset,
                                          LifeState single) {
  const auto gambles = subset_gambles(subset, single);
  double sum = 0.0;
  for (auto b : gambles) {
    auto it = las.find(b);
    if (it == las.end() || !it->second) return std::nullopt;
    sum += it->second->lambda_prime;
  }
  return sum / static_cast<double>(gambles.size());
}

SessionEstimates estimate_session(const SessionState& session, const std::optional<CptConfig>& cpt,
                                  bool fit_mle) {
  SessionEstimates out;
  out.participant = session.id;
  for (std::size_t i = 0; i < session.gamble_queue.size(); ++i) {
    const auto& g = session.gamble_queue[i];
    if (g.block == Block::NonAdjacentPersonal) continue;
    std::optional<IndifferencePoint> point;
    const auto& bracket = session.brackets[i];
    if (bracket && bracket->is_resolved()) point = indifference_point(*bracket);
    out.points[g.context][g.baseline] = point;
    out.loss_aversion[g.context][g.baseline] =
        point ? std::optional<LossAversion>(lambda_from_gamble(*point, cpt)) : std::nullopt;
  }

  for (auto context : {Context::Personal, Context::Societal}) {
    ChainPoints chain;
    for (const auto& [baseline, point] : out.points[context]) {
      if (point) chain[baseline] = *point;
    }
    std::optional<UtilityCurve> with_death;
    std::optional<UtilityCurve> without_death;
    const std::string tag(to_string(context));
    try {
      with_death = chained_solve(chain, context, cpt);
    } catch (const Error& e) {
      out.diagnostics.push_back(tag + ": " + e.what());
    }
    try {
      without_death = chained_solve_without_death(chain, context, cpt);
    } catch (const Error& e) {
      out.diagnostics.push_back(tag + " (no death): " + e.what());
    }
    if (context == Context::Personal) {
      out.personal = with_death;
      out.personal_no_death = without_death;
    } else {
      out.societal = with_death;
      out.societal_no_death = without_death;
    }
  }

  if (fit_mle) {
    const auto events = personal_choice_events(session);
    if (!events.empty()) {
      MleOptions opt;
      if (out.personal) opt.seed_curve = out.personal;
      try {
        out.mle = mle_fit(events, opt);
      } catch (const Error& e) {
        out.diagnostics.push_back(std::string("mle: ") + e.what());
      }
    }
  }
  return out;
}

}  // namespace lifesat
