#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lifesat/estimation.hpp"

namespace lifesat::stats {

struct Correlation {
  double r = 0.0;
  double p = 1.0;
};

// Sample correlation with a two-sided p-value from Student's t on n-2 df.
// Throws UndefinedStatistic for constant input or fewer than 3 pairs.
Correlation pearson(std::span<const double> x, std::span<const double> y);

struct MannWhitney {
  double u = 0.0;  // pairs with a > b, ties counted 1/2
  double p = 1.0;  // two-sided
  bool exact = false;
};

// Exact permutation p-value (tie-aware) when |a|*|b| <= 400, otherwise the
// normal approximation with tie and continuity corrections.
MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b);

// rows = participants, columns = items.
double cronbach_alpha(const std::vector<std::vector<double>>& items);

double mean(std::span<const double> x);
double sample_sd(std::span<const double> x);
double median(std::vector<double> x);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

// Tukey hinges: medians of the lower and upper halves, each half including
// the overall median when n is odd. Infinite values are allowed.
Quartiles tukey_quartiles(std::vector<double> x);

// Per-participant inputs to the cohort summary.
struct CohortParticipant {
  std::string id;
  GambleLossAversion personal;
  GambleLossAversion societal;
  std::optional<double> politics;
  std::string party;
};

struct SummaryRow {
  std::string label;
  GambleSubset subset = GambleSubset::Single;
  std::optional<Quartiles> lambda_p;
  std::optional<Quartiles> lambda_s;
  std::size_t n_p = 0;
  std::size_t n_s = 0;
  std::size_t n_both = 0;
  std::optional<double> pct_lambda_p_gt1;
  std::optional<double> pct_lambda_s_gt1;
  std::optional<double> pct_s_ge_p;
  std::optional<Correlation> r_ps;
  std::optional<Correlation> r_p_politics;
  std::optional<Correlation> r_s_politics;
};

// One row per adjacent gamble (E, D, C, B baselines) then the phys-health,
// no-death and all-gamble subsets. Quartiles are over back-transformed
// lambda; correlations over lambda'.
std::vector<SummaryRow> table2_report(std::span<const CohortParticipant> cohort);

struct PartyTest {
  std::string party;
  Context context = Context::Personal;
  std::size_t n_party = 0;
  std::size_t n_rest = 0;
  double mean_party = 0.0;
  double sd_party = 0.0;
  double mean_rest = 0.0;
  double sd_rest = 0.0;
  MannWhitney test;
};

// Each party's lambda' (mean over `subset`) against everyone else.
std::vector<PartyTest> party_tests(std::span<const CohortParticipant> cohort,
                                   GambleSubset subset = GambleSubset::NoDeath);

std::string row_label(GambleSubset subset, LifeState single = LifeState::E);

}  // namespace lifesat::stats
