#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lifesat/core.hpp"
#include "lifesat/estimation.hpp"

namespace lifesat {

struct Knot {
  double ls = 0.0;
  double u = 0.0;
  friend bool operator==(const Knot&, const Knot&) = default;
};

// Piecewise-linear utility over the 0..10 life-satisfaction axis. Outside
// the knot range the end segments are extended linearly.
struct LsUtilityFunction {
  std::string participant;
  std::vector<Knot> knots;

  double operator()(double ls) const;
  LsUtilityFunction scaled(double factor) const;
};

struct LsBuildOptions {
  double death_ls = 0.0;
  // Death utility for curves estimated without the death state. Absent:
  // the lowest segment is extended linearly down to ls = 0.
  std::optional<double> death_utility;
};

// `anchor_ls` holds the LS coordinate of each living state; it must be
// strictly decreasing from A to E and lie above the death knot.
LsUtilityFunction build_ls_function(const UtilityCurve& curve,
                                    const std::map<LifeState, double>& anchor_ls,
                                    const LsBuildOptions& options = {}, std::string participant = {});

struct Band {
  std::string label;
  int ls_low = 0;
  int ls_high = 10;
  double proportion = 0.0;
  double representative_ls = 0.0;
  friend bool operator==(const Band&, const Band&) = default;
};

struct DistributionSpec {
  std::vector<Band> bands;

  double mean_ls() const;
  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

ValidationResult validate_distribution(const DistributionSpec& dist);

// Throws Validation unless the distribution is valid.
void require_valid(const DistributionSpec& dist);

// Midpoint representative for a band.
double band_midpoint(int ls_low, int ls_high);

// Four-band layout 0-4, 5-6, 7-8, 9-10 with midpoint representatives.
DistributionSpec four_band_distribution(const std::array<double, 4>& proportions);

// Point mass at `ls` (an integer 0..10) inside an otherwise empty 0..10 cover.
DistributionSpec point_mass_distribution(int ls);

// Sum over bands of proportion * f(representative_ls), in band order.
double expected_utility(const LsUtilityFunction& f, const DistributionSpec& dist);
double utility_sd(const LsUtilityFunction& f, const DistributionSpec& dist);

struct NormalizedSet {
  std::vector<LsUtilityFunction> functions;
  std::vector<std::string> dropped;  // "participant: reason"
};

// Scales every function to unit standard deviation under `ref`.
NormalizedSet normalize_curves(std::span<const LsUtilityFunction> fs, const DistributionSpec& ref);

enum class RlsVariant { MeanUtility, MedianUtility };
std::string_view to_string(RlsVariant v) noexcept;
RlsVariant parse_rls_variant(std::string_view text);

struct RlsResult {
  Context basis = Context::Personal;
  RlsVariant variant = RlsVariant::MeanUtility;
  double rls = 0.0;
  double delta_from_mean = 0.0;
  std::optional<CptConfig> cpt;
  std::size_t participants = 0;
  std::size_t dropped = 0;
};

RlsResult rls(std::span<const LsUtilityFunction> fs, const DistributionSpec& dist,
              RlsVariant variant, Context basis = Context::Personal);

// Per-participant inputs to RLS: the curves and the vignette ratings that
// place the states on the LS axis.
struct ParticipantCurves {
  std::string participant;
  std::optional<UtilityCurve> personal;           // death included
  std::optional<UtilityCurve> personal_mle;       // death included
  std::optional<UtilityCurve> societal_no_death;
  std::optional<double> societal_death_lambda;    // +inf when infinitely averse
  std::map<LifeState, int> ratings;
};

ParticipantCurves participant_curves(const SessionState& session, const SessionEstimates& est);

enum class AnchorMode { ParticipantRatings, CohortMean };
enum class PersonalMethod { Chained, Mle };

struct RlsTableOptions {
  AnchorMode anchors = AnchorMode::ParticipantRatings;
  PersonalMethod personal_method = PersonalMethod::Chained;
  double death_ls = 0.0;
  std::optional<CptConfig> cpt;  // recorded on the results only
  // distribution used for the unit-SD normalization; the evaluated
  // distribution when unset
  std::optional<DistributionSpec> reference;
};

struct RlsTable {
  std::vector<RlsResult> results;  // personal mean, personal median, societal mean, societal median
  double mean_ls = 0.0;
  std::map<Context, std::vector<std::string>> dropped;
};

// LS functions for one basis; participants without a usable curve are
// reported in `dropped`.
std::vector<LsUtilityFunction> cohort_functions(std::span<const ParticipantCurves> cohort,
                                                Context basis, const RlsTableOptions& options,
                                                std::vector<std::string>& dropped);

RlsTable rls_table(std::span<const ParticipantCurves> cohort, const DistributionSpec& dist,
                   const RlsTableOptions& options = {});

struct SensitivityRow {
  RlsResult eum;
  RlsResult cpt;
};

// Re-estimates every session with and without probability weighting and
// returns the four RLS variants side by side.
std::vector<SensitivityRow> sensitivity_rerun(std::span<const SessionState> sessions,
                                              const CptConfig& cpt, const DistributionSpec& dist,
                                              const RlsTableOptions& options = {});

}  // namespace lifesat
