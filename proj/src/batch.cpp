#include "lifesat/batch.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

#include "lifesat/error.hpp"

namespace lifesat::batch {

using io::format_double;
using io::json;

std::string csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string csv_number(std::optional<double> x) { return x ? format_double(*x) : std::string{}; }

EstimateResult estimate(std::span<const SessionState> sessions, const EstimateOptions& options) {
  EstimateResult out;
  out.curves.cpt = options.cpt;

  std::vector<const SessionState*> kept;
  for (const auto& s : sessions) {
    const auto flags = quality_flags(s, options.quality);
    const bool bad = flags.contains(QualityFlag::FastCompletion) ||
                     flags.contains(QualityFlag::FailedAttention);
    if (bad && !options.include_flagged) {
      std::string why;
      for (auto f : flags) why += (why.empty() ? "" : ";") + std::string(to_string(f));
      out.excluded.push_back(s.id + ": " + why);
      continue;
    }
    kept.push_back(&s);
  }

  std::vector<io::ParticipantRecord> records(kept.size());
  auto work = [&](std::size_t i) {
    const auto& s = *kept[i];
    records[i] = io::make_participant_record(s, estimate_session(s, options.cpt, options.fit_mle),
                                             options.quality);
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(kept.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < kept.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < kept.size(); i += jobs) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  out.curves.participants = std::move(records);
  return out;
}

std::string curves_json(const io::CurvesFile& f) { return io::to_json(f).dump(1) + "\n"; }

std::string loss_aversion_csv(const io::CurvesFile& f) {
  std::ostringstream out;
  out << "participant,context,baseline,p_star,lambda,lambda_prime\n";
  for (const auto& r : f.participants) {
    for (const auto& [ctx, m] : r.estimates.loss_aversion) {
      for (const auto& [baseline, la] : m) {
        std::optional<double> p;
        const auto& pts = r.estimates.points.at(ctx);
        if (auto it = pts.find(baseline); it != pts.end() && it->second) p = it->second->p_star;
        out << csv_cell(r.estimates.participant) << ',' << to_string(ctx) << ',' << to_string(baseline)
            << ',' << csv_number(p) << ',' << csv_number(la ? std::optional(la->lambda) : std::nullopt)
            << ',' << csv_number(la ? std::optional(la->lambda_prime) : std::nullopt) << '\n';
      }
    }
  }
  return out.str();
}

std::string mle_csv(const io::CurvesFile& f) {
  std::ostringstream out;
  out << "participant,observations,sigma,log_likelihood,null_log_likelihood,mcfadden_r2,"
         "fraction_correct,starts_converged,boundary_fit,U_D,U_C,U_B,U_A\n";
  for (const auto& r : f.participants) {
    if (!r.estimates.mle) continue;
    const auto& m = *r.estimates.mle;
    out << csv_cell(r.estimates.participant) << ',' << m.observations << ',' << format_double(m.sigma)
        << ',' << format_double(m.log_likelihood) << ',' << format_double(m.null_log_likelihood) << ','
        << format_double(m.mcfadden_r2) << ',' << format_double(m.fraction_correct) << ','
        << m.starts_converged << ',' << (m.boundary_fit ? "true" : "false");
    for (auto s : {LifeState::D, LifeState::C, LifeState::B, LifeState::A}) {
      out << ',' << format_double(m.utilities.at(s));
    }
    out << '\n';
  }
  return out.str();
}

std::vector<ParticipantCurves> cohort_curves(const io::CurvesFile& f) {
  std::vector<ParticipantCurves> out;
  out.reserve(f.participants.size());
  for (const auto& r : f.participants) out.push_back(r.curves);
  return out;
}

std::string rls_csv(const RlsTable& table) {
  std::ostringstream out;
  out << "basis,variant,rls,delta_from_mean,mean_ls,participants,dropped,mode,delta,gamma\n";
  for (const auto& r : table.results) {
    out << to_string(r.basis) << ',' << to_string(r.variant) << ',' << format_double(r.rls) << ','
        << format_double(r.delta_from_mean) << ',' << format_double(table.mean_ls) << ','
        << r.participants << ',' << r.dropped << ',' << (r.cpt ? "cpt" : "eum") << ','
        << csv_number(r.cpt ? std::optional(r.cpt->delta) : std::nullopt) << ','
        << csv_number(r.cpt ? std::optional(r.cpt->gamma) : std::nullopt) << '\n';
  }
  return out.str();
}

json rls_metadata(const RlsTable& table, const DistributionSpec& dist, const RlsTableOptions& options,
                  const io::CurvesFile& f) {
  json bands = json::array();
  for (const auto& b : dist.bands) {
    bands.push_back({{"label", b.label},
                     {"ls_low", b.ls_low},
                     {"ls_high", b.ls_high},
                     {"proportion", b.proportion},
                     {"representative_ls", b.representative_ls}});
  }
  json dropped = json::object();
  for (const auto& [ctx, list] : table.dropped) dropped[std::string(to_string(ctx))] = list;
  json reference = "input distribution";
  if (options.reference) {
    reference = json::array();
    for (const auto& b : options.reference->bands) {
      reference.push_back({{"label", b.label}, {"proportion", b.proportion}, {"representative_ls", b.representative_ls}});
    }
  }
  return {{"schema_version", io::kSchemaVersion},
          {"mean_ls", table.mean_ls},
          {"bands", bands},
          {"normalization_reference", reference},
          {"anchors", options.anchors == AnchorMode::CohortMean ? "cohort_mean" : "participant_ratings"},
          {"personal_method", options.personal_method == PersonalMethod::Mle ? "mle" : "chained"},
          {"death_ls", options.death_ls},
          {"mode", f.cpt ? "cpt" : "eum"},
          {"cpt", f.cpt ? io::to_json(*f.cpt) : json(nullptr)},
          {"participants", f.participants.size()},
          {"dropped", dropped}};
}

std::string sensitivity_csv(std::span<const SensitivityRow> rows) {
  std::ostringstream out;
  out << "basis,variant,rls_eum,delta_eum,rls_cpt,delta_cpt,delta,gamma\n";
  for (const auto& r : rows) {
    out << to_string(r.eum.basis) << ',' << to_string(r.eum.variant) << ',' << format_double(r.eum.rls)
        << ',' << format_double(r.eum.delta_from_mean) << ',' << format_double(r.cpt.rls) << ','
        << format_double(r.cpt.delta_from_mean) << ','
        << csv_number(r.cpt.cpt ? std::optional(r.cpt.cpt->delta) : std::nullopt) << ','
        << csv_number(r.cpt.cpt ? std::optional(r.cpt.cpt->gamma) : std::nullopt) << '\n';
  }
  return out.str();
}

namespace {

std::optional<double> corr_r(const std::optional<stats::Correlation>& c) {
  return c ? std::optional(c->r) : std::nullopt;
}
std::optional<double> corr_p(const std::optional<stats::Correlation>& c) {
  return c ? std::optional(c->p) : std::nullopt;
}

void quartile_cells(std::ostream& out, const std::optional<stats::Quartiles>& q) {
  out << ',' << csv_number(q ? std::optional(q->q1) : std::nullopt) << ','
      << csv_number(q ? std::optional(q->median) : std::nullopt) << ','
      << csv_number(q ? std::optional(q->q3) : std::nullopt);
}

std::vector<stats::CohortParticipant> cohort_of(const io::CurvesFile& f) {
  std::vector<stats::CohortParticipant> out;
  for (const auto& r : f.participants) out.push_back(io::cohort_participant(r));
  return out;
}

}  // namespace

std::string table2_csv(std::span<const stats::SummaryRow> rows) {
  std::ostringstream out;
  out << "row,subset,n_p,n_s,n_both,lambda_p_q1,lambda_p_median,lambda_p_q3,lambda_s_q1,"
         "lambda_s_median,lambda_s_q3,pct_lambda_p_gt1,pct_lambda_s_gt1,pct_s_ge_p,r_ps,p_ps,"
         "r_p_politics,p_p_politics,r_s_politics,p_s_politics\n";
  for (const auto& r : rows) {
    out << csv_cell(r.label) << ',' << to_string(r.subset) << ',' << r.n_p << ',' << r.n_s << ','
        << r.n_both;
    quartile_cells(out, r.lambda_p);
    quartile_cells(out, r.lambda_s);
    out << ',' << csv_number(r.pct_lambda_p_gt1) << ',' << csv_number(r.pct_lambda_s_gt1) << ','
        << csv_number(r.pct_s_ge_p) << ',' << csv_number(corr_r(r.r_ps)) << ','
        << csv_number(corr_p(r.r_ps)) << ',' << csv_number(corr_r(r.r_p_politics)) << ','
        << csv_number(corr_p(r.r_p_politics)) << ',' << csv_number(corr_r(r.r_s_politics)) << ','
        << csv_number(corr_p(r.r_s_politics)) << '\n';
  }
  return out.str();
}

std::string party_tests_csv(std::span<const stats::PartyTest> tests) {
  std::ostringstream out;
  out << "party,context,n_party,n_rest,mean_party,sd_party,mean_rest,sd_rest,u,p,exact\n";
  for (const auto& t : tests) {
    out << csv_cell(t.party) << ',' << to_string(t.context) << ',' << t.n_party << ',' << t.n_rest << ','
        << format_double(t.mean_party) << ',' << format_double(t.sd_party) << ','
        << format_double(t.mean_rest) << ',' << format_double(t.sd_rest) << ','
        << format_double(t.test.u) << ',' << format_double(t.test.p) << ','
        << (t.test.exact ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string scatter_csv(const io::CurvesFile& f, GambleSubset subset) {
  std::ostringstream out;
  out << "participant,lambda_prime_personal,lambda_prime_societal,above_diagonal,politics,party\n";
  for (const auto& r : f.participants) {
    const auto c = io::cohort_participant(r);
    const auto p = participant_summary(c.personal, subset);
    const auto s = participant_summary(c.societal, subset);
    if (!p || !s) continue;
    out << csv_cell(c.id) << ',' << format_double(*p) << ',' << format_double(*s) << ','
        << (*s > *p ? "true" : "false") << ',' << r.politics << ',' << csv_cell(r.party) << '\n';
  }
  return out.str();
}

std::string curve_knots_csv(const io::CurvesFile& f) {
  std::ostringstream out;
  out << "participant,curve,state,rating,utility\n";
  for (const auto& r : f.participants) {
    const std::pair<const char*, const std::optional<UtilityCurve>*> curves[] = {
        {"personal", &r.curves.personal},
        {"personal_mle", &r.curves.personal_mle},
        {"societal_no_death", &r.curves.societal_no_death}};
    for (const auto& [name, curve] : curves) {
      if (!*curve) continue;
      const auto rep = (*curve)->scale == Scale::Reporting ? **curve : (*curve)->to_reporting();
      for (const auto& [state, u] : rep.values) {
        std::string rating;
        if (auto it = r.curves.ratings.find(state); it != r.curves.ratings.end()) {
          rating = std::to_string(it->second);
        }
        out << csv_cell(r.estimates.participant) << ',' << name << ',' << to_string(state) << ','
            << rating << ',' << format_double(u) << '\n';
      }
    }
  }
  return out.str();
}

std::string ratings_histogram_csv(const io::CurvesFile& f) {
  std::map<LifeState, std::array<int, 11>> counts;
  for (auto s : kLivingStates) counts[s].fill(0);
  for (const auto& r : f.participants) {
    for (const auto& [s, v] : r.curves.ratings) {
      if (v >= 0 && v <= 10) ++counts[s][static_cast<std::size_t>(v)];
    }
  }
  std::ostringstream out;
  out << "state,rating,count\n";
  for (auto s : kLivingStates) {
    for (int v = 0; v <= 10; ++v) out << to_string(s) << ',' << v << ',' << counts[s][v] << '\n';
  }
  return out.str();
}

std::map<std::string, std::string> report_files(const io::CurvesFile& f,
                                                std::span<const SessionState> sessions,
                                                GambleSubset scatter_subset) {
  const auto cohort = cohort_of(f);
  std::map<std::string, std::string> files;
  files["table2.csv"] = table2_csv(stats::table2_report(cohort));
  files["party_tests.csv"] = party_tests_csv(stats::party_tests(cohort));
  files["scatter.csv"] = scatter_csv(f, scatter_subset);
  files["curve_knots.csv"] = curve_knots_csv(f);
  files["ratings_histogram.csv"] = ratings_histogram_csv(f);

  json summary = {{"schema_version", io::kSchemaVersion},
                  {"participants", f.participants.size()},
                  {"mode", f.cpt ? "cpt" : "eum"},
                  {"scatter_subset", to_string(scatter_subset)}};
  json flag_counts = json::object();
  for (const auto& r : f.participants) {
    for (const auto& flag : r.quality_flags) {
      flag_counts[flag] = flag_counts.value(flag, 0) + 1;
    }
  }
  summary["quality_flags"] = flag_counts;
  if (!sessions.empty()) {
    std::size_t violations = 0;
    std::size_t unexplained = 0;
    std::vector<std::vector<double>> items;
    for (const auto& s : sessions) {
      if (s.order_violation) ++violations;
      if (!unexplained_violations(s.ratings).empty()) ++unexplained;
      items.emplace_back(s.profile.bsa_items.begin(), s.profile.bsa_items.end());
    }
    summary["sessions"] = sessions.size();
    summary["order_violations"] = violations;
    summary["order_violations_unexplained"] = unexplained;
    try {
      summary["political_items_alpha"] = stats::cronbach_alpha(items);
    } catch (const Error& e) {
      summary["political_items_alpha"] = nullptr;
      summary["political_items_alpha_note"] = e.what();
    }
  }
  files["summary.json"] = summary.dump(1) + "\n";
  return files;
}

}  // namespace lifesat::batch
