#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lifesat/aggregation.hpp"
#include "lifesat/io.hpp"
#include "lifesat/stats.hpp"

namespace lifesat::batch {

// Quotes a CSV cell when it holds a comma, quote or newline.
std::string csv_cell(const std::string& text);
std::string csv_number(std::optional<double> x);  // empty when absent

struct EstimateOptions {
  std::optional<CptConfig> cpt;
  bool fit_mle = true;
  bool include_flagged = false;  // keep sessions failing attention or speed checks
  QualityConfig quality;
  unsigned jobs = 1;
};

struct EstimateResult {
  io::CurvesFile curves;
  std::vector<std::string> excluded;  // "id: flags"
};

// Per-participant estimation; output order follows the input order.
EstimateResult estimate(std::span<const SessionState> sessions, const EstimateOptions& options);

// File bodies written by `estimate`.
std::string curves_json(const io::CurvesFile& f);
std::string loss_aversion_csv(const io::CurvesFile& f);
std::string mle_csv(const io::CurvesFile& f);

std::vector<ParticipantCurves> cohort_curves(const io::CurvesFile& f);

std::string rls_csv(const RlsTable& table);
io::json rls_metadata(const RlsTable& table, const DistributionSpec& dist, const RlsTableOptions& options,
                      const io::CurvesFile& f);
std::string sensitivity_csv(std::span<const SensitivityRow> rows);

// All report files keyed by file name.
std::map<std::string, std::string> report_files(const io::CurvesFile& f,
                                                std::span<const SessionState> sessions,
                                                GambleSubset scatter_subset = GambleSubset::NoDeath);

std::string table2_csv(std::span<const stats::SummaryRow> rows);
std::string party_tests_csv(std::span<const stats::PartyTest> tests);
// participant,lambda_prime_personal,lambda_prime_societal,politics,party
std::string scatter_csv(const io::CurvesFile& f, GambleSubset subset);
std::string curve_knots_csv(const io::CurvesFile& f);
std::string ratings_histogram_csv(const io::CurvesFile& f);

}  // namespace lifesat::batch
