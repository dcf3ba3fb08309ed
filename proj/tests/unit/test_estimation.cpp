#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "lifesat/error.hpp"
#include "lifesat/estimation.hpp"
#include "lifesat/optimize.hpp"

using namespace lifesat;
using namespace testing_helpers;

namespace {

// Direct evaluation of the linear-in-log-odds weight, kept apart from the library.
double w_oracle(double p, double delta, double gamma) {
  const double a = delta * std::pow(p, gamma);
  return a / (a + std::pow(1 - p, gamma));
}

// Solves the four chained equations U_b = q U_l + (1-q) U_w with U_Death = 0,
// U_E = 1 as a dense 4x4 system by Gaussian elimination.
std::array<double, 4> chain_oracle(const std::array<double, 4>& q) {
  // unknowns x = (U_D, U_C, U_B, U_A); equation k has baseline rank k+1.
  double m[4][5] = {};
  const double fixed[2] = {0.0, 1.0};  // U_Death, U_E
  for (int k = 0; k < 4; ++k) {
    const int b = k + 1, w = k + 2, l = k;
    auto put = [&](int rank, double coef) {
      if (rank <= 1) {
        m[k][4] -= coef * fixed[rank];
      } else {
        m[k][rank - 2] += coef;
      }
    };
    put(b, 1.0);
    put(l, -q[k]);
    put(w, -(1 - q[k]));
  }
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int r = c + 1; r < 4; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    for (int j = 0; j < 5; ++j) std::swap(m[c][j], m[piv][j]);
    for (int r = 0; r < 4; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int j = 0; j < 5; ++j) m[r][j] -= f * m[c][j];
    }
  }
  std::array<double, 4> x{};
  for (int k = 0; k < 4; ++k) x[k] = m[k][4] / m[k][k];
  return x;
}

ChainPoints uniform_points(double p) {
  ChainPoints pts;
  for (auto b : {LifeState::E, LifeState::D, LifeState::C, LifeState::B}) pts[b] = IndifferencePoint{p, p == 0.0};
  return pts;
}

}  // namespace

TEST_CASE("indifference points") {
  auto p = indifference_point(IndifferenceBracket::from_probabilities(0.5, 1.0));
  CHECK(p.p_star == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK((1 - p.p_star) / p.p_star == doctest::Approx(0.414).epsilon(1e-3));
  p = indifference_point(IndifferenceBracket::from_probabilities(0.2, 0.5));
  CHECK(p.p_star == doctest::Approx(0.3162).epsilon(1e-4));
  p = indifference_point(IndifferenceBracket::from_probabilities(0.0, 1e-6));
  CHECK(p.p_star == 0.0);
  CHECK(p.infinite_aversion);
  CHECK_THROWS_AS(indifference_point(IndifferenceBracket::undecidable()), Error);
}

TEST_CASE("loss aversion from a gamble") {
  const double p1 = std::sqrt(0.1), p2 = std::sqrt(0.001);
  CHECK(lambda_from_gamble({p1, false}).lambda == doctest::Approx(2.16).epsilon(0.002));
  CHECK(lambda_from_gamble({p2, false}).lambda == doctest::Approx(30.6).epsilon(0.002));
  const CptConfig med = CptConfig::median_respondent();
  const double expected = w_oracle(1 - p2, 0.77, 0.44) / w_oracle(p2, 0.77, 0.44);
  const auto la = lambda_from_gamble({p2, false}, med);
  CHECK(la.lambda == doctest::Approx(expected).epsilon(1e-12));
  CHECK(la.lambda == doctest::Approx(5.3).epsilon(0.02));
  CHECK(std::isinf(lambda_from_gamble({0.0, true}).lambda));
  CHECK(lambda_from_gamble({0.0, true}).lambda_prime == 1.0);
}

TEST_CASE("lambda prime transform") {
  CHECK(lambda_prime(1.0) == 0.0);
  CHECK(lambda_prime(3.0) == doctest::Approx(0.5));
  CHECK(lambda_prime(1.0 / 3.0) == doctest::Approx(-0.5));
  CHECK(lambda_prime(INFINITY) == 1.0);
  CHECK_THROWS_AS(lambda_prime(0.0), Error);
  CHECK_THROWS_AS(lambda_prime(-2.0), Error);
  CHECK(lambda_prime(2.2) == doctest::Approx(0.375));

  double prev = -1.0;
  for (double e = -6; e <= 6; e += 0.25) {
    const double l = std::pow(10.0, e);
    CHECK(lambda_prime(l) == doctest::Approx(-lambda_prime(1 / l)).epsilon(1e-12));
    CHECK(lambda_prime(l) > prev);
    prev = lambda_prime(l);
    // Round trip is exact to 1e-12 wherever binary64 can hold 1 - lambda'.
    if (l <= 1e4) CHECK(std::abs(lambda_from_prime(lambda_prime(l)) - l) <= 1e-12 * std::max(1.0, l));
    const double m = lambda_prime(l);
    CHECK(std::abs(lambda_prime(lambda_from_prime(m)) - m) <= 1e-12);
  }
}

TEST_CASE("probability weighting") {
  CHECK(probability_weight(1e-6, CptConfig::median_respondent()) == doctest::Approx(0.002).epsilon(0.25));
  CHECK(std::abs(probability_weight(1e-6, CptConfig::median_respondent()) - 0.002) < 0.0005);
  CHECK(std::abs(probability_weight(1e-6, CptConfig::extreme_respondent()) - 0.03) < 0.005);
  for (double p : {0.0, 1e-6, 0.01, 0.3, 0.5, 0.9, 1.0}) {
    CHECK(probability_weight(p, CptConfig{1.0, 1.0}) == p);
    CHECK(probability_weight(p, CptConfig{0.77, 0.44}) == doctest::Approx(w_oracle(p, 0.77, 0.44)).epsilon(1e-14));
  }
  CHECK(probability_weight(0.0, CptConfig::median_respondent()) == 0.0);
  CHECK(probability_weight(1.0, CptConfig::median_respondent()) == 1.0);
}

TEST_CASE("chained solve") {
  SUBCASE("risk neutral") {
    const auto c = chained_solve(uniform_points(0.5), Context::Personal);
    for (int r = 0; r <= 5; ++r) CHECK(c.at(state_from_rank(r)) == doctest::Approx(r).epsilon(1e-15));
    const auto rep = c.to_reporting();
    for (int r = 0; r <= 5; ++r) CHECK(rep.at(state_from_rank(r)) == doctest::Approx(r / 5.0).epsilon(1e-15));
    CHECK(rep.scale == Scale::Reporting);
  }
  SUBCASE("worked example") {
    const double p = std::sqrt(0.1);
    const auto c = chained_solve(uniform_points(p), Context::Personal);
    const auto oracle = chain_oracle({p, p, p, p});
    for (int k = 0; k < 4; ++k) {
      CHECK(c.at(state_from_rank(k + 2)) == doctest::Approx(oracle[k]).epsilon(1e-12));
    }
    // The four-decimal values come from p* rounded to 0.3162.
    const auto rounded = chained_solve(uniform_points(0.3162), Context::Personal);
    const double printed[] = {1.4624, 1.6762, 1.7751, 1.8209};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(rounded.at(state_from_rank(k + 2)) - printed[k]) < 1e-4);
    CHECK(c.strictly_increasing());
    // Concave truth shows decreasing increments.
    for (int r = 1; r < 5; ++r) {
      CHECK(c.at(state_from_rank(r + 1)) - c.at(state_from_rank(r)) <
            c.at(state_from_rank(r)) - c.at(state_from_rank(r - 1)));
    }
  }
  SUBCASE("CPT uses normalized weights") {
    const CptConfig cpt = CptConfig::median_respondent();
    const double p = std::sqrt(0.01 * 0.1);
    const double q = w_oracle(p, 0.77, 0.44) / (w_oracle(p, 0.77, 0.44) + w_oracle(1 - p, 0.77, 0.44));
    const auto c = chained_solve(uniform_points(p), Context::Personal, cpt);
    const auto oracle = chain_oracle({q, q, q, q});
    for (int k = 0; k < 4; ++k) CHECK(c.at(state_from_rank(k + 2)) == doctest::Approx(oracle[k]).epsilon(1e-12));
    CHECK(c.method == Method::ChainedSGCpt);
    // Identity weighting is bit-identical to EUM.
    const auto a = chained_solve(uniform_points(p), Context::Personal, CptConfig{1, 1});
    const auto b = chained_solve(uniform_points(p), Context::Personal);
    CHECK(a.values == b.values);
  }
  SUBCASE("infinite aversion on the death gamble") {
    auto pts = uniform_points(0.3);
    pts[LifeState::E] = IndifferencePoint{0.0, true};
    try {
      chained_solve(pts, Context::Societal);
      FAIL("expected not-estimable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotEstimable);
    }
    const auto c = chained_solve_without_death(pts, Context::Societal);
    CHECK_FALSE(c.include_death);
    CHECK(c.at(LifeState::E) == 0.0);
    CHECK(c.at(LifeState::D) == 1.0);
    CHECK_FALSE(c.values.contains(LifeState::Death));
    // U_C solves U_D = q U_E + (1-q) U_C.
    CHECK(c.at(LifeState::C) == doctest::Approx(1.0 / 0.7).epsilon(1e-12));
    const auto rep = c.to_reporting();
    CHECK(rep.at(LifeState::A) == 1.0);
    CHECK(rep.at(LifeState::E) == 0.0);
  }
  SUBCASE("zero point above the death gamble") {
    auto pts = uniform_points(0.3);
    pts[LifeState::C] = IndifferencePoint{0.0, true};
    CHECK_THROWS_AS(chained_solve(pts, Context::Personal), Error);
  }
}

TEST_CASE("CPT shrinks loss aversion toward one") {
  // Holds for both published parameter sets and for gamma well below one; it
  // can fail for delta < 1 with gamma near 1 (0.77, 0.95 at p = 0.1).
  CHECK(lambda_from_gamble({0.1, false}, CptConfig{0.77, 0.95}).lambda > 9.0);
  for (double gamma : {0.27, 0.44, 0.7}) {
    for (double delta : {0.5, 0.77, 1.0, 1.19}) {
      for (double p : {1e-6, 1e-4, 0.01, 0.1, 0.3, 0.45}) {
        const double eum = (1 - p) / p;
        const double cpt = lambda_from_gamble({p, false}, CptConfig{delta, gamma}).lambda;
        CHECK(cpt > 1.0);
        CHECK(cpt < eum);
      }
    }
  }
}

TEST_CASE("participant summary") {
  GambleLossAversion las;
  for (auto b : {LifeState::E, LifeState::D, LifeState::C, LifeState::B}) las[b] = LossAversion::from_lambda(2.2);
  CHECK(*participant_summary(las, GambleSubset::Single, LifeState::D) == doctest::Approx(0.375));
  const double m = *participant_summary(las, GambleSubset::PhysHealth);
  CHECK(m == doctest::Approx(0.375));
  CHECK(lambda_from_prime(m) == doctest::Approx(2.2));
  las[LifeState::C] = std::nullopt;
  CHECK_FALSE(participant_summary(las, GambleSubset::All).has_value());
  CHECK_FALSE(participant_summary(las, GambleSubset::PhysHealth).has_value());
  CHECK(participant_summary(las, GambleSubset::Single, LifeState::E).has_value());
  CHECK(subset_gambles(GambleSubset::NoDeath) == std::vector<LifeState>{LifeState::D, LifeState::C, LifeState::B});
}

namespace {

// Deterministic ladder walk for one gamble given true utilities.
void walk(const GambleSpec& g, const std::map<LifeState, double>& u, std::vector<ChoiceEvent>& out) {
  for (std::size_t i = 0; i < ladder::kRungs; ++i) {
    const double p = ladder::probability(i);
    const double eu = p * u.at(g.lose) + (1 - p) * u.at(g.win);
    const bool accept = eu > u.at(g.baseline);
    out.push_back(ChoiceEvent{g, i, accept ? Response::AcceptGamble : Response::RefuseGamble, {}});
    if (accept) return;
  }
}

GambleSpec triple(LifeState b, LifeState w, LifeState l, Block block = Block::AdjacentPersonal) {
  GambleSpec g;
  g.baseline = b;
  g.win = w;
  g.lose = l;
  g.block = block;
  return g;
}

}  // namespace

TEST_CASE("likelihood basics") {
  CHECK(choice_probability(2.0, 2.0, 5.0) == doctest::Approx(0.5));
  CHECK(choice_probability(2.0, 1.0, 1.0) == doctest::Approx(2.0 / 3.0));
  const double u2 = 3.0, u1 = 1.5, s = 7.3;
  CHECK(choice_probability(u2, u1, s) ==
        doctest::Approx(std::pow(u2, s) / (std::pow(u2, s) + std::pow(u1, s))).epsilon(1e-13));

  std::vector<ChoiceEvent> ev;
  walk(triple(LifeState::C, LifeState::B, LifeState::D), {{LifeState::D, 2}, {LifeState::C, 2.6}, {LifeState::B, 3}}, ev);
  UtilityCurve c = chained_solve(uniform_points(0.5), Context::Personal);
  const double near_zero = log_likelihood(ev, c, 1e-12);
  CHECK(near_zero == doctest::Approx(ev.size() * std::log(0.5)).epsilon(1e-9));
  CHECK(mcfadden_r2(near_zero, ev.size() * std::log(0.5)) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(mcfadden_r2(0.0, -3.0) == 1.0);
}

TEST_CASE("MLE on deterministic chained-example data") {
  const double p = std::sqrt(0.1);
  const auto truth = chained_solve(uniform_points(p), Context::Personal).values;
  std::vector<ChoiceEvent> ev;
  std::vector<GambleSpec> gambles;
  for (const auto& g : adjacent_triples(Context::Personal, Basis::Letters)) gambles.push_back(g);
  gambles.push_back(triple(LifeState::D, LifeState::A, LifeState::E, Block::NonAdjacentPersonal));
  gambles.push_back(triple(LifeState::C, LifeState::A, LifeState::E, Block::NonAdjacentPersonal));
  gambles.push_back(triple(LifeState::D, LifeState::B, LifeState::Death, Block::NonAdjacentPersonal));
  gambles.push_back(triple(LifeState::B, LifeState::A, LifeState::D, Block::NonAdjacentPersonal));
  for (const auto& g : gambles) walk(g, truth, ev);

  MleOptions opt;
  opt.seed_curve = chained_solve(uniform_points(p), Context::Personal);
  const auto fit = mle_fit(ev, opt);
  CHECK(fit.fraction_correct == 1.0);
  CHECK(fit.mcfadden_r2 <= 1.0);
  CHECK(fit.mcfadden_r2 > 0.99);
  CHECK(fit.boundary_fit);  // perfectly separable data pushes sigma to its cap
  CHECK(fit.starts_converged >= 1);
  CHECK(fit.utilities.at(LifeState::E) == 1.0);
  CHECK(fit.utilities.at(LifeState::Death) == 0.0);
  CHECK(fit.utilities.strictly_increasing());
  // Each adjacent gamble's fitted indifference point lies inside its bracket.
  for (const auto& g : adjacent_triples(Context::Personal, Basis::Letters)) {
    const double uw = fit.utilities.at(g.win), ub = fit.utilities.at(g.baseline), ul = fit.utilities.at(g.lose);
    const double pf = (uw - ub) / (uw - ul);
    CHECK(pf >= 0.2 - 1e-9);
    CHECK(pf <= 0.5 + 1e-9);
  }
  CHECK_THROWS_AS(mle_fit(std::vector<ChoiceEvent>{}), Error);
}

TEST_CASE("MLE gradient vanishes at an interior optimum") {
  // Stochastic choices from a known curve at moderate sigma.
  const std::map<LifeState, double> truth = {{LifeState::Death, 0}, {LifeState::E, 1}, {LifeState::D, 1.6},
                                             {LifeState::C, 2.0},    {LifeState::B, 2.3}, {LifeState::A, 2.5}};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ChoiceEvent> ev;
  const double sigma = 6.0;
  for (int rep = 0; rep < 6; ++rep) {
    for (const auto& g : adjacent_triples(Context::Personal, Basis::Letters)) {
      for (std::size_t i = 0; i < ladder::kRungs; ++i) {
        const double q = ladder::probability(i);
        const double ug = q * truth.at(g.lose) + (1 - q) * truth.at(g.win);
        const double pa = std::pow(ug, sigma) / (std::pow(ug, sigma) + std::pow(truth.at(g.baseline), sigma));
        const bool accept = unif(rng) < pa;
        ev.push_back(ChoiceEvent{g, i, accept ? Response::AcceptGamble : Response::RefuseGamble, {}});
        if (accept) break;
      }
    }
  }
  const auto fit = mle_fit(ev);
  REQUIRE_FALSE(fit.boundary_fit);
  const std::vector<double> x(fit.parameters.begin(), fit.parameters.end());
  const auto g = optimize::numerical_gradient(
      [&](std::span<const double> y) { return log_likelihood(ev, y); }, x, 1e-5);
  for (double gi : g) CHECK(std::abs(gi) < 1e-4);
  // The likelihood is a proper maximum: nudging any parameter lowers it.
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto y = x;
    y[j] += 1e-3;
    CHECK(log_likelihood(ev, y) <= fit.log_likelihood + 1e-12);
  }
}

TEST_CASE("newton polish") {
  // Rosenbrock in a box; the minimum (1, 1) is inside
  const optimize::Objective rosen = [](std::span<const double> x, std::span<double> g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  const optimize::Box box{{-3, -3}, {3, 3}};
  const auto rough = optimize::minimize(rosen, {-1.2, 1.0}, box, {1e-3, 1e-3, 1e-2, 5000});
  const auto r = optimize::polish(rosen, rough.x, box);
  CHECK(r.converged);
  CHECK(std::abs(r.x[0] - 1) < 1e-9);
  CHECK(std::abs(r.x[1] - 1) < 1e-9);

  // with x[1] capped at 0.5 the constrained minimum sits on the cap
  const optimize::Box capped{{-3, -3}, {3, 0.5}};
  const auto c = optimize::polish(rosen, {0.5, 0.2}, capped);
  CHECK(c.x[1] == 0.5);
  std::vector<double> g(2);
  rosen(c.x, g);
  CHECK(std::abs(g[0]) < 1e-9);
  CHECK(g[1] < 0);
}

TEST_CASE("session estimates") {
  auto s = create_session(profile(), 77, SessionCondition::GamblesFirst);
  s = drive(s, [](const GamblePrompt& g) {
    if (g.gamble.context == Context::Societal && g.gamble.baseline == LifeState::E) return Response::RefuseGamble;
    return g.ladder_index == 1 ? Response::AcceptGamble : Response::RefuseGamble;
  });
  const auto est = estimate_session(s);
  REQUIRE(est.personal);
  CHECK_FALSE(est.societal.has_value());
  REQUIRE(est.societal_no_death);
  CHECK(std::isinf(est.loss_aversion.at(Context::Societal).at(LifeState::E)->lambda));
  CHECK(est.loss_aversion.at(Context::Personal).at(LifeState::D)->lambda ==
        doctest::Approx((1 - std::sqrt(0.1)) / std::sqrt(0.1)));
  REQUIRE(est.mle);
  CHECK(est.mle->observations == 16);
  CHECK_FALSE(est.diagnostics.empty());

  // CPT run with identity weighting equals the EUM run exactly.
  const auto a = estimate_session(s, CptConfig{1, 1});
  CHECK(a.personal->values == est.personal->values);
  CHECK(a.mle->utilities.values == est.mle->utilities.values);
}
