#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "lifesat/error.hpp"
#include "lifesat/stats.hpp"
#include "../common/stats_oracles.hpp"

using namespace lifesat;
using namespace lifesat::stats;
using namespace testing_helpers;

namespace {

const std::vector<double> kX = {2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 6.1, 2.8, 4.9, 3.0};
const std::vector<double> kY = {1.0, 2.2, 1.7, 4.1, 2.9, 3.6, 5.0, 1.4, 3.8, 2.5};

}  // namespace

TEST_CASE("t oracle sanity") {
  // df = 1 is Cauchy: P(|T| > 1) = 1/2; df = 2: P(|T| > t) = 1 - t/sqrt(2 + t^2)
  CHECK(t_two_sided_oracle(1.0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t_two_sided_oracle(1.5, 2) == doctest::Approx(1 - 1.5 / std::sqrt(2 + 2.25)).epsilon(1e-15));
}

TEST_CASE("pearson against the raw-sum oracle") {
  const auto c = pearson(kX, kY);
  const double r = pearson_r_oracle(kX, kY);
  CHECK(std::abs(c.r - r) < 1e-12);
  const double t = r * std::sqrt(8 / (1 - r * r));
  CHECK(std::abs(c.p - t_two_sided_oracle(t, 8)) < 1e-12);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  for (int n : {3, 4, 7, 12, 25}) {
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = z(rng);
      y[i] = 0.4 * x[i] + z(rng);
    }
    const auto got = pearson(x, y);
    const double ro = pearson_r_oracle(x, y);
    CHECK(std::abs(got.r - ro) < 1e-12);
    CHECK(std::abs(got.p - t_two_sided_oracle(ro * std::sqrt((n - 2) / (1 - ro * ro)), n - 2)) < 1e-12);
  }

  const std::vector<double> same = {1, 2, 3, 4};
  CHECK(pearson(same, same).r == 1.0);
  CHECK(pearson(same, same).p == 0.0);
  const std::vector<double> flat = {2, 2, 2, 2};
  CHECK_THROWS_AS(pearson(same, flat), Error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 3}), Error);
}

TEST_CASE("mann-whitney statistic") {
  using V = std::vector<double>;
  CHECK(mann_whitney(V{1, 2}, V{3, 4}).u == 0.0);
  CHECK(mann_whitney(V{1, 3}, V{2, 4}).u == 1.0);
  CHECK(mann_whitney(V{3, 3, 3}, V{3, 3, 3}).u == 4.5);
  const V a = {1.5, 2.0, 2.0, 7.1, 3.3}, b = {2.0, 0.4, 9.9, 3.3, 5.0, 6.1, 2.2};
  CHECK(mann_whitney(a, b).u + mann_whitney(b, a).u == doctest::Approx(35.0));
  CHECK(mann_whitney(a, b).u == u_by_pairs(a, b));
  CHECK(mann_whitney(b, a).u == u_by_pairs(b, a));
}

TEST_CASE("mann-whitney exact p against full enumeration") {
  using V = std::vector<double>;
  const std::vector<std::pair<V, V>> fixtures = {
      {{1, 2}, {3, 4}},
      {{1.5, 2.0, 2.0, 7.1, 3.3}, {2.0, 0.4, 9.9, 3.3, 5.0, 6.1, 2.2}},
      {{0.1, 0.2, 0.2, 0.2, 0.5, 0.9}, {0.2, 0.3, 0.5, 0.5, 0.7, 0.8}},
      {{4, 4, 4, 1}, {4, 4, 2, 2, 2, 9, 9}},
      {{-0.3, 0.25, 0.9}, {0.1, 0.4, 0.6, 1.2, 1.3, 1.8, 2.0}},
  };
  for (const auto& [a, b] : fixtures) {
    const auto r = mann_whitney(a, b);
    CHECK(r.exact);
    CHECK(std::abs(r.p - mwu_p_oracle(a, b)) < 1e-12);
    CHECK(std::abs(mann_whitney(b, a).p - r.p) < 1e-12);
  }
  const V same = {1, 2, 3};
  CHECK(mann_whitney(same, same).p == doctest::Approx(1.0));

  // beyond 400 pairs the normal approximation takes over
  V big_a, big_b;
  for (int i = 0; i < 25; ++i) big_a.push_back(i);
  for (int i = 0; i < 20; ++i) big_b.push_back(i + 10.5);
  const auto n = mann_whitney(big_a, big_b);
  CHECK_FALSE(n.exact);
  CHECK(n.u == u_by_pairs(big_a, big_b));
  CHECK(n.p > 0.0);
  CHECK(n.p < 0.01);
}

TEST_CASE("cronbach alpha") {
  const std::vector<std::vector<double>> rows = {
      {4, 5, 3, 4, 4}, {2, 2, 3, 1, 2}, {5, 4, 5, 5, 4}, {3, 3, 2, 3, 4},
      {1, 2, 1, 2, 1}, {4, 3, 4, 5, 5}, {2, 3, 3, 2, 2}, {5, 5, 4, 4, 5}};
  CHECK(std::abs(cronbach_alpha(rows) - alpha_oracle(rows)) < 1e-12);

  std::vector<std::vector<double>> identical;
  for (double v : {1.0, 4.0, 2.0, 5.0, 3.0}) identical.push_back({v, v, v, v});
  CHECK(cronbach_alpha(identical) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(cronbach_alpha({{1, 2}}), Error);
  CHECK_THROWS_AS(cronbach_alpha({{1, 2}, {1}}), Error);
  CHECK_THROWS_AS(cronbach_alpha({{1, 1}, {1, 1}}), Error);
}

TEST_CASE("tukey hinges") {
  auto q = tukey_quartiles({1, 2, 3, 4, 5});
  CHECK(q.q1 == 2);
  CHECK(q.median == 3);
  CHECK(q.q3 == 4);
  q = tukey_quartiles({1, 2, 3, 4, 5, 6});
  CHECK(q.q1 == 2);
  CHECK(q.median == 3.5);
  CHECK(q.q3 == 5);
  const double inf = std::numeric_limits<double>::infinity();
  q = tukey_quartiles({1, 2, inf, inf});
  CHECK(q.q1 == 1.5);
  CHECK(q.median == inf);
  CHECK(q.q3 == inf);
  CHECK(tukey_quartiles({7}).q1 == 7);
  CHECK_THROWS_AS(tukey_quartiles({}), Error);
  CHECK(median({3, 1, 2}) == 2);
  CHECK(sample_sd(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(std::sqrt(32.0 / 7)));
}

TEST_CASE("summary rows") {
  auto la = [](double lambda) { return std::optional<LossAversion>(LossAversion::from_lambda(lambda)); };
  auto person = [&](std::string id, std::array<double, 4> p, std::array<double, 4> s, double politics,
                    std::string party) {
    CohortParticipant c;
    c.id = std::move(id);
    const LifeState bs[] = {LifeState::E, LifeState::D, LifeState::C, LifeState::B};
    for (int i = 0; i < 4; ++i) {
      c.personal[bs[i]] = la(p[i]);
      c.societal[bs[i]] = la(s[i]);
    }
    c.politics = politics;
    c.party = std::move(party);
    return c;
  };
  std::vector<CohortParticipant> cohort = {
      person("a", {2, 1, 0.5, 4}, {3, 2, 1, 4}, 10, "left"),
      person("b", {9, 1.5, 1, 1}, {9, 2, 2, 2}, 14, "left"),
      person("c", {0.5, 0.8, 2, 3}, {0.4, 0.5, 3, 6}, 20, "right"),
      person("d", {30, 2, 2, 2}, {40, 1, 1, 1}, 18, "right"),
      person("e", {1, 1, 1, 1}, {1, 1, 1, 1}, 12, "")};
  cohort[4].societal[LifeState::C] = std::nullopt;  // undecidable

  const auto rows = table2_report(cohort);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0].label == "E vs D/Death");
  CHECK(rows[0].n_both == 5);
  // E gamble: personal 2, 9, 0.5, 30, 1 ; societal 3, 9, 0.4, 40, 1
  CHECK(rows[0].lambda_p->median == doctest::Approx(2));
  CHECK(rows[0].lambda_p->q1 == doctest::Approx(1));
  CHECK(rows[0].lambda_p->q3 == doctest::Approx(9));
  CHECK(*rows[0].pct_lambda_p_gt1 == doctest::Approx(60));
  CHECK(*rows[0].pct_s_ge_p == doctest::Approx(80));  // c is lower
  CHECK(rows[2].n_s == 4);
  CHECK(rows[2].n_both == 4);
  // "All gambles" needs every gamble, so e drops out of the societal side
  CHECK(rows[6].n_p == 5);
  CHECK(rows[6].n_s == 4);
  REQUIRE(rows[0].r_ps);
  std::vector<double> pp, ss;
  for (double v : {2.0, 9.0, 0.5, 30.0, 1.0}) pp.push_back(lambda_prime(v));
  for (double v : {3.0, 9.0, 0.4, 40.0, 1.0}) ss.push_back(lambda_prime(v));
  CHECK(std::abs(rows[0].r_ps->r - pearson_r_oracle(pp, ss)) < 1e-12);

  const auto tests = party_tests(cohort);
  // "left" and "right" for each context; the empty party is only in "rest"
  CHECK(tests.size() == 4);
  for (const auto& t : tests) {
    CHECK(t.n_party == 2);
    CHECK(t.test.exact);
  }
}
