// Command-line front end: serve, simulate, estimate, aggregate, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lifesat/batch.hpp"
#include "lifesat/error.hpp"
#include "lifesat/service.hpp"
#include "lifesat/simulator.hpp"

namespace fs = std::filesystem;
using namespace lifesat;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNoData = 3;
constexpr int kExitAllFailed = 4;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

io::json read_json(const fs::path& p) {
  try {
    return io::json::parse(slurp(p));
  } catch (const io::json::exception& e) {
    throw Error(ErrorCode::Parse, p.string() + ": " + e.what());
  }
}

void write_file(const fs::path& p, const std::string& body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << body;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
}

std::optional<CptConfig> cpt_option(const std::string& mode, double delta, double gamma) {
  if (mode == "eum") return std::nullopt;
  CptConfig c{delta, gamma};
  if (!(c.delta > 0) || !(c.gamma > 0)) throw Error(ErrorCode::Validation, "delta and gamma must be positive");
  return c;
}

struct Sessions {
  std::vector<SessionState> sessions;
  std::vector<std::string> skipped;
  std::size_t nonempty_lines = 0;
};

Sessions load_sessions(const std::vector<std::string>& paths) {
  Sessions out;
  for (const auto& p : paths) {
    const std::string text = p == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {}) : slurp(p);
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) ++out.nonempty_lines;
    }
    std::istringstream in(text);
    auto r = io::read_session_logs(in, p);
    for (auto& s : r.sessions) out.sessions.push_back(std::move(s));
    for (auto& m : r.skipped) out.skipped.push_back(std::move(m));
  }
  return out;
}

void report_skips(const std::vector<std::string>& skipped) {
  for (const auto& m : skipped) std::cerr << "skipped: " << m << '\n';
}

int env_port(int fallback) {
  if (const char* v = std::getenv("LIFESAT_PORT")) return std::atoi(v);
  return fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elicitation service and batch analysis for life-satisfaction utility curves"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP+JSON survey API");
  std::string serve_config;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  std::string token;
  std::string condition;
  std::optional<std::uint64_t> seed_base;
  serve->add_option("--config", serve_config, "Service config JSON");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (env LIFESAT_PORT)")->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Session log directory (env LIFESAT_DATA_DIR)");
  serve->add_option("--token", token, "Require this X-Api-Token header");
  serve->add_option("--condition", condition, "Force every session into one condition")
      ->check(CLI::IsMember({"gambles_first", "life_satisfaction_first"}));
  serve->add_option("--seed-base", seed_base, "Sequential session seeds starting here");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run synthetic agents through the engine");
  std::string cohort_path;
  std::string sim_out = "sessions.jsonl";
  simulate->add_option("--config", cohort_path, "Cohort config JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "Session log to write")->capture_default_str();

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Estimate curves and loss aversion from session logs");
  std::vector<std::string> est_inputs;
  std::string est_out = "estimates";
  std::string mode = "eum";
  double delta = 0.77;
  double gamma = 0.44;
  bool no_mle = false;
  bool include_flagged = false;
  std::string quality_path;
  unsigned jobs = 1;
  estimate->add_option("--sessions", est_inputs, "Session log files ('-' for stdin)")->required();
  estimate->add_option("--out-dir", est_out, "Output directory")->capture_default_str();
  estimate->add_option("--mode", mode, "Probability model")
      ->check(CLI::IsMember({"eum", "cpt"}))
      ->capture_default_str();
  estimate->add_option("--delta", delta, "CPT elevation")->capture_default_str();
  estimate->add_option("--gamma", gamma, "CPT curvature")->capture_default_str();
  estimate->add_flag("--no-mle", no_mle, "Skip the discrete-choice fit");
  estimate->add_flag("--include-flagged", include_flagged, "Keep sessions failing speed or attention checks");
  estimate->add_option("--quality", quality_path, "Quality threshold JSON");
  estimate->add_option("--jobs", jobs, "Worker threads")->capture_default_str();

  // aggregate
  auto* aggregate = app.add_subcommand("aggregate", "Representative life satisfaction from curves");
  std::string agg_curves;
  std::string agg_dist;
  std::string agg_out;
  std::string basis = "all";
  std::string variant = "all";
  std::string personal_method = "chained";
  std::string anchors = "participant";
  double death_ls = 0.0;
  std::string agg_reference;
  std::vector<std::string> sens_sessions;
  aggregate->add_option("--curves", agg_curves, "curves.json from estimate")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--distribution", agg_dist, "Distribution CSV")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--out-dir", agg_out, "Output directory (default: print the table)");
  aggregate->add_option("--basis", basis, "Rows to keep")
      ->check(CLI::IsMember({"all", "personal", "societal"}))
      ->capture_default_str();
  aggregate->add_option("--variant", variant, "Rows to keep")
      ->check(CLI::IsMember({"all", "mean", "median"}))
      ->capture_default_str();
  aggregate->add_option("--personal-method", personal_method, "Personal curve source")
      ->check(CLI::IsMember({"chained", "mle"}))
      ->capture_default_str();
  aggregate->add_option("--anchors", anchors, "LS coordinates of the states")
      ->check(CLI::IsMember({"participant", "cohort"}))
      ->capture_default_str();
  aggregate->add_option("--death-ls", death_ls, "LS coordinate of death")->capture_default_str();
  aggregate->add_option("--reference-distribution", agg_reference,
                        "Distribution CSV for the unit-SD normalization (default: --distribution)")
      ->check(CLI::ExistingFile);
  aggregate->add_option("--sensitivity-sessions", sens_sessions,
                        "Session logs for an EUM vs CPT rerun (uses --delta/--gamma)");
  aggregate->add_option("--delta", delta, "CPT elevation for the rerun")->capture_default_str();
  aggregate->add_option("--gamma", gamma, "CPT curvature for the rerun")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Summary tables and plot-ready data files");
  std::string rep_curves;
  std::vector<std::string> rep_sessions;
  std::string rep_out = "report";
  std::string scatter_subset = "no_death";
  report->add_option("--curves", rep_curves, "curves.json from estimate")->required()->check(CLI::ExistingFile);
  report->add_option("--sessions", rep_sessions, "Session logs (ratings and quality summary)");
  report->add_option("--out-dir", rep_out, "Output directory")->capture_default_str();
  report->add_option("--scatter-subset", scatter_subset, "Gamble subset for the scatter file")
      ->check(CLI::IsMember({"all", "no_death", "phys_health"}))
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (serve->parsed()) {
      service::ServiceConfig cfg;
      if (!serve_config.empty()) cfg = service::config_from_json(read_json(serve_config));
      if (serve->count("--host")) cfg.host = host;
      cfg.port = serve->count("--port") ? port : env_port(cfg.port);
      if (!data_dir.empty()) {
        cfg.data_dir = data_dir;
      } else if (const char* env = std::getenv("LIFESAT_DATA_DIR")) {
        cfg.data_dir = env;
      }
      if (!token.empty()) cfg.token = token;
      if (!condition.empty()) cfg.condition_override = parse_condition(condition);
      if (seed_base) cfg.seed_base = seed_base;
      return service::serve(cfg);
    }

    if (simulate->parsed()) {
      const auto agents = io::cohort_from_json(read_json(cohort_path));
      if (agents.empty()) {
        std::cerr << "cohort config defines no agents\n";
        return kExitNoData;
      }
      std::ostringstream out;
      for (const auto& s : sim::run_cohort(agents)) io::write_session_log(out, s);
      write_file(sim_out, out.str());
      std::cerr << "wrote " << agents.size() << " sessions to " << sim_out << '\n';
      return 0;
    }

    if (estimate->parsed()) {
      batch::EstimateOptions opt;
      opt.cpt = cpt_option(mode, delta, gamma);
      opt.fit_mle = !no_mle;
      opt.include_flagged = include_flagged;
      opt.jobs = jobs;
      if (!quality_path.empty()) opt.quality = io::quality_config_from_json(read_json(quality_path));
      const auto loaded = load_sessions(est_inputs);
      report_skips(loaded.skipped);
      if (loaded.nonempty_lines == 0) {
        std::cerr << "no session data in the input\n";
        return kExitNoData;
      }
      if (loaded.sessions.empty()) {
        std::cerr << "every input record failed to parse\n";
        return kExitAllFailed;
      }
      const auto result = batch::estimate(loaded.sessions, opt);
      for (const auto& m : result.excluded) std::cerr << "excluded: " << m << '\n';
      if (result.curves.participants.empty()) {
        std::cerr << "no session passed the quality checks\n";
        return kExitNoData;
      }
      const fs::path dir(est_out);
      write_file(dir / "curves.json", batch::curves_json(result.curves));
      write_file(dir / "loss_aversion.csv", batch::loss_aversion_csv(result.curves));
      write_file(dir / "mle.csv", batch::mle_csv(result.curves));
      std::string skipped;
      for (const auto& m : loaded.skipped) skipped += m + "\n";
      write_file(dir / "skipped.txt", skipped);
      std::cerr << "estimated " << result.curves.participants.size() << " participants ("
                << loaded.skipped.size() << " skipped, " << result.excluded.size() << " excluded)\n";
      return 0;
    }

    if (aggregate->parsed()) {
      const auto curves = io::curves_file_from_json(read_json(agg_curves));
      std::ifstream din(agg_dist);
      const auto dist = io::parse_distribution(din);
      RlsTableOptions opt;
      opt.anchors = anchors == "cohort" ? AnchorMode::CohortMean : AnchorMode::ParticipantRatings;
      opt.personal_method = personal_method == "mle" ? PersonalMethod::Mle : PersonalMethod::Chained;
      opt.death_ls = death_ls;
      opt.cpt = curves.cpt;
      if (!agg_reference.empty()) {
        std::ifstream rin(agg_reference);
        opt.reference = io::parse_distribution(rin);
      }
      const auto cohort = batch::cohort_curves(curves);
      auto table = rls_table(cohort, dist, opt);
      std::erase_if(table.results, [&](const RlsResult& r) {
        if (basis != "all" && std::string(to_string(r.basis)) != basis) return true;
        if (variant == "mean" && r.variant != RlsVariant::MeanUtility) return true;
        if (variant == "median" && r.variant != RlsVariant::MedianUtility) return true;
        return false;
      });
      const std::string csv = batch::rls_csv(table);
      if (agg_out.empty()) {
        std::cout << csv;
      } else {
        const fs::path dir(agg_out);
        write_file(dir / "rls.csv", csv);
        write_file(dir / "rls_metadata.json", batch::rls_metadata(table, dist, opt, curves).dump(1) + "\n");
      }
      if (!sens_sessions.empty()) {
        const auto loaded = load_sessions(sens_sessions);
        report_skips(loaded.skipped);
        const auto rows = sensitivity_rerun(loaded.sessions, CptConfig{delta, gamma}, dist, opt);
        const std::string s = batch::sensitivity_csv(rows);
        if (agg_out.empty()) {
          std::cout << s;
        } else {
          write_file(fs::path(agg_out) / "sensitivity.csv", s);
        }
      }
      return 0;
    }

    if (report->parsed()) {
      const auto curves = io::curves_file_from_json(read_json(rep_curves));
      std::vector<SessionState> sessions;
      if (!rep_sessions.empty()) {
        auto loaded = load_sessions(rep_sessions);
        report_skips(loaded.skipped);
        sessions = std::move(loaded.sessions);
      }
      GambleSubset subset = GambleSubset::NoDeath;
      if (scatter_subset == "all") subset = GambleSubset::All;
      if (scatter_subset == "phys_health") subset = GambleSubset::PhysHealth;
      for (const auto& [name, body] : batch::report_files(curves, sessions, subset)) {
        write_file(fs::path(rep_out) / name, body);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
