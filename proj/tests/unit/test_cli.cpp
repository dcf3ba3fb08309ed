#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lifesat/io.hpp"

namespace fs = std::filesystem;
using lifesat::io::json;

namespace {

struct Workdir {
  fs::path path;
  Workdir() {
    path = fs::temp_directory_path() /
           ("lifesat-cli-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

int run(const std::string& args) {
  const std::string cmd = std::string(LIFESAT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const char* kCohort = R"({"schema_version": 1,
  "generate": [{"count": 12, "kind": "concave", "seed": 77, "societal_multiplier": 2.0}]})";

const char* kDistribution =
    "band_label,ls_low,ls_high,proportion\n0-4,0,4,0.08\n5-6,5,6,0.17\n7-8,7,8,0.45\n9-10,9,10,0.3\n";

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("simulate is deterministic") {
  Workdir w;
  spit(w / "cohort.json", kCohort);
  REQUIRE(run("simulate --config " + q(w / "cohort.json") + " --out " + q(w / "a.jsonl")) == 0);
  REQUIRE(run("simulate --config " + q(w / "cohort.json") + " --out " + q(w / "b.jsonl")) == 0);
  const auto a = slurp(w / "a.jsonl");
  CHECK(!a.empty());
  CHECK(a == slurp(w / "b.jsonl"));
}

TEST_CASE("estimate, aggregate and report end to end") {
  Workdir w;
  spit(w / "cohort.json", kCohort);
  spit(w / "dist.csv", kDistribution);
  REQUIRE(run("simulate --config " + q(w / "cohort.json") + " --out " + q(w / "s.jsonl")) == 0);

  REQUIRE(run("estimate --sessions " + q(w / "s.jsonl") + " --out-dir " + q(w / "eum")) == 0);
  for (auto f : {"curves.json", "loss_aversion.csv", "mle.csv"}) CHECK(fs::exists(w / "eum" / f));
  const auto curves = json::parse(slurp(w / "eum" / "curves.json"));
  CHECK(curves.at("schema_version") == 1);
  CHECK(curves.at("participants").size() == 12);

  // parallel workers give the same files
  REQUIRE(run("estimate --jobs 4 --sessions " + q(w / "s.jsonl") + " --out-dir " + q(w / "par")) == 0);
  CHECK(slurp(w / "par" / "curves.json") == slurp(w / "eum" / "curves.json"));

  // identity weighting reproduces the unweighted numbers
  REQUIRE(run("estimate --mode cpt --delta 1 --gamma 1 --sessions " + q(w / "s.jsonl") + " --out-dir " +
              q(w / "id")) == 0);
  CHECK(slurp(w / "id" / "mle.csv") == slurp(w / "eum" / "mle.csv"));
  auto strip_mode = [](std::string csv) {
    std::string out;
    std::istringstream in(csv);
    for (std::string l; std::getline(in, l);) {
      for (const char* m : {"cpt", "eum"}) {
        for (auto pos = l.find(m); pos != std::string::npos; pos = l.find(m)) l.replace(pos, 3, "*");
      }
      out += l + "\n";
    }
    return out;
  };
  CHECK(strip_mode(slurp(w / "id" / "loss_aversion.csv")) == strip_mode(slurp(w / "eum" / "loss_aversion.csv")));

  REQUIRE(run("aggregate --curves " + q(w / "eum" / "curves.json") + " --distribution " + q(w / "dist.csv") +
              " --out-dir " + q(w / "agg")) == 0);
  const auto rls = slurp(w / "agg" / "rls.csv");
  CHECK(lines(rls) == 5);  // header + four variants
  CHECK(fs::exists(w / "agg" / "rls_metadata.json"));

  REQUIRE(run("aggregate --curves " + q(w / "eum" / "curves.json") + " --distribution " + q(w / "dist.csv") +
              " --out-dir " + q(w / "sens") + " --sensitivity-sessions " + q(w / "s.jsonl")) == 0);
  CHECK(lines(slurp(w / "sens" / "sensitivity.csv")) == 5);

  REQUIRE(run("report --curves " + q(w / "eum" / "curves.json") + " --sessions " + q(w / "s.jsonl") +
              " --out-dir " + q(w / "rep")) == 0);
  for (auto f : {"table2.csv", "party_tests.csv", "scatter.csv", "curve_knots.csv", "ratings_histogram.csv",
                 "summary.json"}) {
    CHECK(fs::exists(w / "rep" / f));
  }
  CHECK(lines(slurp(w / "rep" / "table2.csv")) == 8);
  CHECK(lines(slurp(w / "rep" / "scatter.csv")) == 13);
}

TEST_CASE("exit codes") {
  Workdir w;
  spit(w / "empty.jsonl", "");
  CHECK(run("estimate --sessions " + q(w / "empty.jsonl") + " --out-dir " + q(w / "o")) == 3);
  CHECK_FALSE(fs::exists(w / "o" / "curves.json"));
  spit(w / "junk.jsonl", "garbage\n{\"half\":\n");
  CHECK(run("estimate --sessions " + q(w / "junk.jsonl") + " --out-dir " + q(w / "o")) == 4);  // every record failed
  CHECK(run("estimate --sessions " + q(w / "missing.jsonl")) != 0);
  CHECK(run("frobnicate") != 0);
  CHECK(run("estimate --mode bayes --sessions x") != 0);

  spit(w / "bad_dist.csv", "band_label,ls_low,ls_high,proportion\n0-10,0,10,0.9\n");
  spit(w / "cohort.json", kCohort);
  REQUIRE(run("simulate --config " + q(w / "cohort.json") + " --out " + q(w / "s.jsonl")) == 0);
  REQUIRE(run("estimate --no-mle --sessions " + q(w / "s.jsonl") + " --out-dir " + q(w / "e")) == 0);
  CHECK(run("aggregate --curves " + q(w / "e" / "curves.json") + " --distribution " + q(w / "bad_dist.csv")) == 1);

  spit(w / "v2.json", R"({"schema_version": 2, "agents": []})");
  CHECK(run("simulate --config " + q(w / "v2.json") + " --out " + q(w / "x.jsonl")) == 1);
}
