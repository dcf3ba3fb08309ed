#include "lifesat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "lifesat/error.hpp"

namespace lifesat::stats {

namespace {

constexpr std::size_t kExactPairLimit = 400;

double midpoint(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
  return 0.5 * (a + b);
}

double median_sorted(std::span<const double> x) {
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : midpoint(x[n / 2 - 1], x[n / 2]);
}

// Mid-ranks (1-based), doubled so tied ranks stay integral.
std::vector<long> doubled_midranks(const std::vector<double>& pooled, std::vector<long>& tie_sizes) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return pooled[i] < pooled[j]; });
  std::vector<long> ranks(pooled.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // positions i..j share rank (i+1 + j+1)/2; doubled: i + j + 2
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = static_cast<long>(i + j + 2);
    tie_sizes.push_back(static_cast<long>(j - i + 1));
    i = j + 1;
  }
  return ranks;
}

std::optional<Correlation> try_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  try {
    return pearson(x, y);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double percent(std::size_t count, std::size_t n) {
  return 100.0 * static_cast<double>(count) / static_cast<double>(n);
}

}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::UndefinedStatistic, "mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double median(std::vector<double> x) {
  if (x.empty()) throw Error(ErrorCode::UndefinedStatistic, "median of an empty sample");
  std::sort(x.begin(), x.end());
  return median_sorted(x);
}

Quartiles tukey_quartiles(std::vector<double> x) {
  if (x.empty()) throw Error(ErrorCode::UndefinedStatistic, "quartiles of an empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const std::size_t half = (n + 1) / 2;  // includes the median when n is odd
  std::span<const double> all(x);
  return {median_sorted(all.first(half)), median_sorted(all), median_sorted(all.last(half))};
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ContractViolation, "pearson needs equal lengths");
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorCode::UndefinedStatistic, "pearson needs at least 3 pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::UndefinedStatistic, "correlation undefined for constant input");
  }
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(r) == 1.0) return {r, 0.0};
  const double t = r * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return {r, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)))};
}

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::ContractViolation, "mann_whitney needs data");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (na > nb) {
    // The statistic is computed on the smaller sample; U(a,b) = na nb - U(b,a).
    MannWhitney flipped = mann_whitney(b, a);
    flipped.u = static_cast<double>(na * nb) - flipped.u;
    return flipped;
  }

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<long> ties;
  const auto ranks2 = doubled_midranks(pooled, ties);
  long rank_sum2 = 0;
  for (std::size_t i = 0; i < na; ++i) rank_sum2 += ranks2[i];
  // 2U = 2 R_a - na (na + 1)
  const long u2 = rank_sum2 - static_cast<long>(na * (na + 1));
  const long center2 = static_cast<long>(na * nb);  // 2 * E[U]

  MannWhitney out;
  out.u = 0.5 * static_cast<double>(u2);

  if (na * nb <= kExactPairLimit) {
    // Count subsets of size na by doubled rank sum over the pooled mid-ranks.
    const long total2 = std::accumulate(ranks2.begin(), ranks2.end(), 0L);
    std::vector<std::vector<double>> ways(na + 1, std::vector<double>(total2 + 1, 0.0));
    ways[0][0] = 1.0;
    for (long r : ranks2) {
      for (std::size_t k = na; k >= 1; --k) {
        for (long s = total2; s >= r; --s) ways[k][s] += ways[k - 1][s - r];
      }
    }
    const long observed = std::labs(u2 - center2);
    double extreme = 0.0;
    double all = 0.0;
    const long offset = static_cast<long>(na * (na + 1));
    for (long s = 0; s <= total2; ++s) {
      const double w = ways[na][s];
      if (w == 0.0) continue;
      all += w;
      if (std::labs((s - offset) - center2) >= observed) extreme += w;
    }
    out.p = std::min(1.0, extreme / all);
    out.exact = true;
    return out;
  }

  const double n = static_cast<double>(na + nb);
  double tie_term = 0.0;
  for (long t : ties) tie_term += static_cast<double>(t * t * t - t);
  const double var = static_cast<double>(na * nb) / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    out.p = 1.0;
    return out;
  }
  const double dev = std::max(0.0, std::abs(out.u - 0.5 * static_cast<double>(center2)) - 0.5);
  out.p = std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
  return out;
}

double cronbach_alpha(const std::vector<std::vector<double>>& items) {
  if (items.size() < 2) throw Error(ErrorCode::UndefinedStatistic, "alpha needs at least 2 rows");
  const std::size_t k = items.front().size();
  if (k < 2) throw Error(ErrorCode::ContractViolation, "alpha needs at least 2 items");
  for (const auto& row : items) {
    if (row.size() != k) throw Error(ErrorCode::IncompleteInput, "alpha needs complete rows");
  }
  double item_var_sum = 0.0;
  std::vector<double> column(items.size());
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < items.size(); ++i) column[i] = items[i][j];
    const double sd = sample_sd(column);
    item_var_sum += sd * sd;
  }
  std::vector<double> totals(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    totals[i] = std::accumulate(items[i].begin(), items[i].end(), 0.0);
  }
  const double total_sd = sample_sd(totals);
  const double total_var = total_sd * total_sd;
  if (total_var == 0.0) throw Error(ErrorCode::UndefinedStatistic, "zero total variance");
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_var_sum / total_var);
}

std::string row_label(GambleSubset subset, LifeState single) {
  switch (subset) {
    case GambleSubset::Single: {
      const auto win = state_from_rank(rank(single) + 1);
      const auto lose = state_from_rank(rank(single) - 1);
      return std::string(to_string(single)) + " vs " + std::string(to_string(win)) + "/" +
             std::string(to_string(lose));
    }
    case GambleSubset::PhysHealth: return "All gambles (phys health)";
    case GambleSubset::NoDeath: return "All gambles (no death)";
    case GambleSubset::All: return "All gambles";
  }
  return "?";
}

std::vector<SummaryRow> table2_report(std::span<const CohortParticipant> cohort) {
  struct RowSpec {
    GambleSubset subset;
    LifeState single;
  };
  const std::vector<RowSpec> specs = {
      {GambleSubset::Single, LifeState::E},     {GambleSubset::Single, LifeState::D},
      {GambleSubset::Single, LifeState::C},     {GambleSubset::Single, LifeState::B},
      {GambleSubset::PhysHealth, LifeState::E}, {GambleSubset::NoDeath, LifeState::E},
      {GambleSubset::All, LifeState::E}};

  std::vector<SummaryRow> rows;
  for (const auto& spec : specs) {
    SummaryRow row;
    row.label = row_label(spec.subset, spec.single);
    row.subset = spec.subset;
    std::vector<double> lam_p, lam_s;
    std::vector<double> prime_p, prime_s, politics_p, politics_s;
    std::vector<double> both_p, both_s;
    std::size_t p_gt1 = 0, s_gt1 = 0, s_ge_p = 0;
    for (const auto& person : cohort) {
      const auto mp = participant_summary(person.personal, spec.subset, spec.single);
      const auto ms = participant_summary(person.societal, spec.subset, spec.single);
      if (mp) {
        lam_p.push_back(lambda_from_prime(*mp));
        if (person.politics) {
          prime_p.push_back(*mp);
          politics_p.push_back(*person.politics);
        }
      }
      if (ms) {
        lam_s.push_back(lambda_from_prime(*ms));
        if (person.politics) {
          prime_s.push_back(*ms);
          politics_s.push_back(*person.politics);
        }
      }
      if (mp && ms) {
        both_p.push_back(*mp);
        both_s.push_back(*ms);
        // lambda > 1 iff lambda' > 0; compare on lambda' to keep +inf exact
        if (*mp > 0) ++p_gt1;
        if (*ms > 0) ++s_gt1;
        if (*ms >= *mp) ++s_ge_p;
      }
    }
    row.n_p = lam_p.size();
    row.n_s = lam_s.size();
    row.n_both = both_p.size();
    if (!lam_p.empty()) row.lambda_p = tukey_quartiles(lam_p);
    if (!lam_s.empty()) row.lambda_s = tukey_quartiles(lam_s);
    if (row.n_both > 0) {
      row.pct_lambda_p_gt1 = percent(p_gt1, row.n_both);
      row.pct_lambda_s_gt1 = percent(s_gt1, row.n_both);
      row.pct_s_ge_p = percent(s_ge_p, row.n_both);
    }
    row.r_ps = try_pearson(both_p, both_s);
    row.r_p_politics = try_pearson(prime_p, politics_p);
    row.r_s_politics = try_pearson(prime_s, politics_s);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<PartyTest> party_tests(std::span<const CohortParticipant> cohort, GambleSubset subset) {
  std::map<std::string, int> parties;
  for (const auto& p : cohort) {
    if (!p.party.empty()) parties[p.party] += 1;
  }
  std::vector<PartyTest> out;
  for (auto context : {Context::Personal, Context::Societal}) {
    for (const auto& [party, count] : parties) {
      (void)count;
      std::vector<double> in, rest;
      for (const auto& p : cohort) {
        const auto& las = context == Context::Personal ? p.personal : p.societal;
        const auto m = participant_summary(las, subset);
        if (!m) continue;
        (p.party == party ? in : rest).push_back(*m);
      }
      if (in.empty() || rest.empty()) continue;
      PartyTest t;
      t.party = party;
      t.context = context;
      t.n_party = in.size();
      t.n_rest = rest.size();
      t.mean_party = mean(in);
      t.sd_party = sample_sd(in);
      t.mean_rest = mean(rest);
      t.sd_rest = sample_sd(rest);
      t.test = mann_whitney(in, rest);
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace lifesat::stats
