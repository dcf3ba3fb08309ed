#include "lifesat/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "lifesat/error.hpp"

namespace lifesat {

namespace {

constexpr double kBisectionWidth = 1e-9;

double interpolate(const Knot& a, const Knot& b, double ls) {
  return a.u + (b.u - a.u) * (ls - a.ls) / (b.ls - a.ls);
}

double slope(const Knot& a, const Knot& b) { return (b.u - a.u) / (b.ls - a.ls); }

std::map<LifeState, double> cohort_mean_anchors(std::span<const ParticipantCurves> cohort) {
  std::map<LifeState, double> sum;
  std::size_t n = 0;
  for (const auto& p : cohort) {
    if (p.ratings.size() != kLivingStates.size()) continue;
    for (const auto& [s, v] : p.ratings) sum[s] += v;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::IncompleteInput, "no participant has complete ratings");
  for (auto& [s, v] : sum) v /= static_cast<double>(n);
  return sum;
}

}  // namespace

double LsUtilityFunction::operator()(double ls) const {
  if (knots.size() < 2) throw Error(ErrorCode::ContractViolation, "utility function needs 2 knots");
  if (ls <= knots.front().ls) return interpolate(knots[0], knots[1], ls);
  if (ls >= knots.back().ls) return interpolate(knots[knots.size() - 2], knots.back(), ls);
  auto it = std::upper_bound(knots.begin(), knots.end(), ls,
                             [](double x, const Knot& k) { return x < k.ls; });
  return interpolate(*(it - 1), *it, ls);
}

LsUtilityFunction LsUtilityFunction::scaled(double factor) const {
  LsUtilityFunction out = *this;
  for (auto& k : out.knots) k.u *= factor;
  return out;
}

LsUtilityFunction build_ls_function(const UtilityCurve& input,
                                    const std::map<LifeState, double>& anchor_ls,
                                    const LsBuildOptions& options, std::string participant) {
  const UtilityCurve curve = input.to_reporting();
  for (auto s : kLivingStates) {
    if (!anchor_ls.contains(s)) {
      throw Error(ErrorCode::Validation, "missing LS anchor for " + std::string(to_string(s)));
    }
  }
  // kLivingStates runs A..E, so anchors must strictly decrease along it.
  for (std::size_t i = 1; i < kLivingStates.size(); ++i) {
    if (!(anchor_ls.at(kLivingStates[i]) < anchor_ls.at(kLivingStates[i - 1]))) {
      throw Error(ErrorCode::Validation, "LS anchors must be strictly decreasing from A to E");
    }
  }
  if (anchor_ls.at(LifeState::A) > 10.0 || anchor_ls.at(LifeState::E) < 0.0) {
    throw Error(ErrorCode::Validation, "LS anchors must lie within 0..10");
  }

  LsUtilityFunction f;
  f.participant = std::move(participant);
  for (auto it = kLivingStates.rbegin(); it != kLivingStates.rend(); ++it) {
    f.knots.push_back({anchor_ls.at(*it), curve.at(*it)});
  }

  std::optional<double> death_u;
  if (curve.include_death) {
    death_u = curve.at(LifeState::Death);
  } else {
    death_u = options.death_utility;
  }
  if (death_u) {
    if (!(options.death_ls < f.knots.front().ls)) {
      throw Error(ErrorCode::Validation, "E must be anchored above the death knot");
    }
    if (!(*death_u < f.knots.front().u)) {
      throw Error(ErrorCode::Validation, "death utility must lie below U_E");
    }
    f.knots.insert(f.knots.begin(), Knot{options.death_ls, *death_u});
  } else if (f.knots.front().ls > 0.0) {
    const double s = slope(f.knots[0], f.knots[1]);
    f.knots.insert(f.knots.begin(), Knot{0.0, f.knots.front().u - s * f.knots.front().ls});
  }

  const Knot& top = f.knots.back();
  if (top.ls < 10.0) {
    const double s = slope(f.knots[f.knots.size() - 2], top);
    f.knots.push_back({10.0, top.u + s * (10.0 - top.ls)});
  }
  return f;
}

double DistributionSpec::mean_ls() const {
  double m = 0.0;
  for (const auto& b : bands) m += b.proportion * b.representative_ls;
  return m;
}

ValidationResult validate_distribution(const DistributionSpec& d) {
  auto fail = [](std::string why) { return ValidationResult{false, std::move(why)}; };
  if (d.bands.empty()) return fail("distribution has no bands");
  double total = 0.0;
  int expected_low = 0;
  for (const auto& b : d.bands) {
    if (b.ls_low != expected_low) return fail("bands must cover 0..10 in order without overlap");
    if (b.ls_high < b.ls_low) return fail("band '" + b.label + "' has ls_high < ls_low");
    if (b.proportion < 0.0) return fail("band '" + b.label + "' has a negative proportion");
    if (b.representative_ls < b.ls_low || b.representative_ls > b.ls_high) {
      return fail("band '" + b.label + "' representative lies outside the band");
    }
    total += b.proportion;
    expected_low = b.ls_high + 1;
  }
  if (expected_low != 11) return fail("bands must end at 10");
  if (std::abs(total - 1.0) > 1e-9) return fail("proportions must sum to 1");
  return {};
}

void require_valid(const DistributionSpec& dist) {
  if (auto v = validate_distribution(dist); !v) throw Error(ErrorCode::Validation, v.violation);
}

double band_midpoint(int lo, int hi) { return 0.5 * (lo + hi); }

DistributionSpec four_band_distribution(const std::array<double, 4>& p) {
  DistributionSpec d;
  const std::array<std::pair<int, int>, 4> ranges = {{{0, 4}, {5, 6}, {7, 8}, {9, 10}}};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto [lo, hi] = ranges[i];
    d.bands.push_back({std::to_string(lo) + "-" + std::to_string(hi), lo, hi, p[i],
                       band_midpoint(lo, hi)});
  }
  return d;
}

DistributionSpec point_mass_distribution(int ls) {
  if (ls < 0 || ls > 10) throw Error(ErrorCode::Validation, "point mass must lie in 0..10");
  DistributionSpec d;
  if (ls > 0) d.bands.push_back({"below", 0, ls - 1, 0.0, band_midpoint(0, ls - 1)});
  d.bands.push_back({std::to_string(ls), ls, ls, 1.0, static_cast<double>(ls)});
  if (ls < 10) d.bands.push_back({"above", ls + 1, 10, 0.0, band_midpoint(ls + 1, 10)});
  return d;
}

double expected_utility(const LsUtilityFunction& f, const DistributionSpec& dist) {
  double e = 0.0;
  for (const auto& b : dist.bands) e += b.proportion * f(b.representative_ls);
  return e;
}

double utility_sd(const LsUtilityFunction& f, const DistributionSpec& dist) {
  const double mean = expected_utility(f, dist);
  double var = 0.0;
  for (const auto& b : dist.bands) {
    const double dev = f(b.representative_ls) - mean;
    var += b.proportion * dev * dev;
  }
  return std::sqrt(var);
}

NormalizedSet normalize_curves(std::span<const LsUtilityFunction> fs, const DistributionSpec& ref) {
  require_valid(ref);
  NormalizedSet out;
  for (const auto& f : fs) {
    const double sd = utility_sd(f, ref);
    if (!(sd > 1e-12)) {
      out.dropped.push_back(f.participant + ": zero variance over the reference distribution");
      continue;
    }
    out.functions.push_back(f.scaled(1.0 / sd));
  }
  return out;
}

std::string_view to_string(RlsVariant v) noexcept {
  return v == RlsVariant::MeanUtility ? "mean" : "median";
}

RlsVariant parse_rls_variant(std::string_view text) {
  if (text == "mean") return RlsVariant::MeanUtility;
  if (text == "median") return RlsVariant::MedianUtility;
  throw Error(ErrorCode::Parse, "unknown RLS variant '" + std::string(text) + "'");
}

RlsResult rls(std::span<const LsUtilityFunction> fs, const DistributionSpec& dist,
              RlsVariant variant, Context basis) {
  require_valid(dist);
  if (fs.empty()) throw Error(ErrorCode::IncompleteInput, "RLS needs at least one curve");
  std::vector<double> targets;
  targets.reserve(fs.size());
  for (const auto& f : fs) targets.push_back(expected_utility(f, dist));

  double lo = 0.0;
  double hi = 10.0;
  if (variant == RlsVariant::MeanUtility) {
    double target = 0.0;
    for (double t : targets) target += t;
    target /= static_cast<double>(fs.size());
    auto level = [&](double c) {
      double sum = 0.0;
      for (const auto& f : fs) sum += f(c);
      return sum / static_cast<double>(fs.size());
    };
    if (level(lo) > target || level(hi) < target) {
      throw Error(ErrorCode::Range, "mean-utility RLS has no solution in [0, 10]");
    }
    while (hi - lo > kBisectionWidth) {
      const double mid = 0.5 * (lo + hi);
      (level(mid) < target ? lo : hi) = mid;
    }
  } else {
    auto satisfied = [&](double c) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i](c) >= targets[i]) ++count;
      }
      return 2 * count >= fs.size();
    };
    if (satisfied(lo)) {
      hi = lo;
    } else {
      if (!satisfied(hi)) throw Error(ErrorCode::Range, "median-utility RLS has no solution in [0, 10]");
      while (hi - lo > kBisectionWidth) {
        const double mid = 0.5 * (lo + hi);
        (satisfied(mid) ? hi : lo) = mid;
      }
    }
    lo = hi;
  }

  RlsResult r;
  r.basis = basis;
  r.variant = variant;
  r.rls = variant == RlsVariant::MeanUtility ? 0.5 * (lo + hi) : hi;
  r.delta_from_mean = r.rls - dist.mean_ls();
  r.participants = fs.size();
  return r;
}

ParticipantCurves participant_curves(const SessionState& session, const SessionEstimates& est) {
  ParticipantCurves p;
  p.participant = session.id;
  p.personal = est.personal;
  if (est.mle) p.personal_mle = est.mle->utilities;
  p.societal_no_death = est.societal_no_death;
  if (auto it = est.loss_aversion.find(Context::Societal); it != est.loss_aversion.end()) {
    if (auto jt = it->second.find(LifeState::E); jt != it->second.end() && jt->second) {
      p.societal_death_lambda = jt->second->lambda;
    }
  }
  p.ratings = session.ratings.ratings;
  return p;
}

std::vector<LsUtilityFunction> cohort_functions(std::span<const ParticipantCurves> cohort,
                                                Context basis, const RlsTableOptions& options,
                                                std::vector<std::string>& dropped) {
  std::optional<std::map<LifeState, double>> shared;
  if (options.anchors == AnchorMode::CohortMean) shared = cohort_mean_anchors(cohort);

  std::vector<LsUtilityFunction> out;
  for (const auto& p : cohort) {
    const std::optional<UtilityCurve>* curve = nullptr;
    if (basis == Context::Societal) {
      curve = &p.societal_no_death;
    } else {
      curve = options.personal_method == PersonalMethod::Mle ? &p.personal_mle : &p.personal;
    }
    if (!curve->has_value()) {
      dropped.push_back(p.participant + ": no complete curve");
      continue;
    }
    std::map<LifeState, double> anchors;
    if (shared) {
      anchors = *shared;
    } else {
      for (const auto& [s, v] : p.ratings) anchors[s] = v;
    }
    LsBuildOptions build;
    build.death_ls = options.death_ls;
    if (basis == Context::Societal && p.societal_death_lambda &&
        std::isfinite(*p.societal_death_lambda)) {
      const auto rep = (*curve)->to_reporting();
      const double ue = rep.at(LifeState::E);
      build.death_utility = ue - *p.societal_death_lambda * (rep.at(LifeState::D) - ue);
    }
    try {
      out.push_back(build_ls_function(**curve, anchors, build, p.participant));
    } catch (const Error& e) {
      dropped.push_back(p.participant + ": " + e.what());
    }
  }
  return out;
}

RlsTable rls_table(std::span<const ParticipantCurves> cohort, const DistributionSpec& dist,
                   const RlsTableOptions& options) {
  require_valid(dist);
  const DistributionSpec& ref = options.reference ? *options.reference : dist;
  RlsTable table;
  table.mean_ls = dist.mean_ls();
  for (auto basis : {Context::Personal, Context::Societal}) {
    auto& dropped = table.dropped[basis];
    const auto fs = cohort_functions(cohort, basis, options, dropped);
    const auto normalized = normalize_curves(fs, ref);
    dropped.insert(dropped.end(), normalized.dropped.begin(), normalized.dropped.end());
    for (auto variant : {RlsVariant::MeanUtility, RlsVariant::MedianUtility}) {
      RlsResult r = rls(normalized.functions, dist, variant, basis);
      r.cpt = options.cpt;
      r.dropped = dropped.size();
      table.results.push_back(r);
    }
  }
  return table;
}

std::vector<SensitivityRow> sensitivity_rerun(std::span<const SessionState> sessions,
                                              const CptConfig& cpt, const DistributionSpec& dist,
                                              const RlsTableOptions& options) {
  std::vector<ParticipantCurves> eum;
  std::vector<ParticipantCurves> weighted;
  for (const auto& s : sessions) {
    eum.push_back(participant_curves(s, estimate_session(s, std::nullopt, false)));
    weighted.push_back(participant_curves(s, estimate_session(s, cpt, false)));
  }
  RlsTableOptions eum_options = options;
  eum_options.cpt.reset();
  eum_options.personal_method = PersonalMethod::Chained;
  RlsTableOptions cpt_options = eum_options;
  cpt_options.cpt = cpt;
  const auto a = rls_table(eum, dist, eum_options);
  const auto b = rls_table(weighted, dist, cpt_options);
  std::vector<SensitivityRow> rows;
  for (std::size_t i = 0; i < a.results.size(); ++i) rows.push_back({a.results[i], b.results[i]});
  return rows;
}

}  // namespace lifesat
