#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lifesat/aggregation.hpp"
#include "lifesat/batch.hpp"
#include "lifesat/error.hpp"
#include "lifesat/estimation.hpp"
#include "lifesat/io.hpp"
#include "lifesat/service.hpp"
#include "lifesat/simulator.hpp"
#include "lifesat/stats.hpp"

namespace py = pybind11;
using namespace lifesat;
using io::json;

namespace {

// Python objects cross over as JSON text; nothing here is hot.
json to_cpp(const py::handle& obj) {
  const auto dumps = py::module_::import("json").attr("dumps");
  return json::parse(dumps(obj).cast<std::string>());
}

py::object to_py(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::optional<CptConfig> cpt_of(std::optional<double> delta, std::optional<double> gamma) {
  if (!delta && !gamma) return std::nullopt;
  return CptConfig{delta.value_or(1.0), gamma.value_or(1.0)};
}

std::vector<SessionState> sessions_of(const py::list& records) {
  std::vector<SessionState> out;
  for (const auto& r : records) out.push_back(io::session_from_json(to_cpp(r)));
  return out;
}

py::dict reply(const service::Reply& r) {
  py::dict d;
  d["status"] = r.status;
  d["body"] = to_py(r.body);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Survey engine, estimation and aggregation core";

  static py::exception<Error> error_type(m, "LifesatError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::handle(error_type.ptr())(std::string(to_string(e.code())) + ": " + e.what());
      err.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), err.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
  m.attr("SCHEMA_VERSION") = io::kSchemaVersion;

  m.def("ladder", [] {
    std::vector<double> p;
    for (std::size_t i = 0; i < ladder::kRungs; ++i) p.push_back(ladder::probability(i));
    return p;
  });

  m.def("probability_weight", [](double p, double delta, double gamma) {
    return probability_weight(p, CptConfig{delta, gamma});
  }, py::arg("p"), py::arg("delta") = 0.77, py::arg("gamma") = 0.44);

  m.def("lambda_prime", &lambda_prime, py::arg("lam"));
  m.def("lambda_from_prime", &lambda_from_prime, py::arg("lambda_prime"));

  m.def("lambda_from_bracket",
        [](double lo, double hi, std::optional<double> delta, std::optional<double> gamma) {
          const auto pt = indifference_point(IndifferenceBracket::from_probabilities(lo, hi));
          const auto la = lambda_from_gamble(pt, cpt_of(delta, gamma));
          py::dict d;
          d["p_star"] = pt.p_star;
          d["lambda"] = la.lambda;
          d["lambda_prime"] = la.lambda_prime;
          return d;
        },
        py::arg("lo"), py::arg("hi"), py::arg("delta") = py::none(), py::arg("gamma") = py::none());

  m.def("chained_solve",
        [](const std::map<std::string, double>& p_star, bool include_death, std::optional<double> delta,
           std::optional<double> gamma, bool reporting) {
          ChainPoints pts;
          for (const auto& [state, p] : p_star) pts[parse_life_state(state)] = IndifferencePoint{p, p == 0.0};
          const auto cpt = cpt_of(delta, gamma);
          auto c = include_death ? chained_solve(pts, Context::Personal, cpt)
                                 : chained_solve_without_death(pts, Context::Personal, cpt);
          if (reporting) c = c.to_reporting();
          std::map<std::string, double> out;
          for (const auto& [s, u] : c.values) out[std::string(to_string(s))] = u;
          return out;
        },
        py::arg("p_star"), py::arg("include_death") = true, py::arg("delta") = py::none(),
        py::arg("gamma") = py::none(), py::arg("reporting") = false);

  m.def("simulate", [](const py::object& config) {
    py::list out;
    for (const auto& s : sim::run_cohort(io::cohort_from_json(to_cpp(config)))) out.append(to_py(io::to_json(s)));
    return out;
  }, py::arg("config"), "Session records for a cohort config.");

  m.def("estimate",
        [](const py::list& sessions, std::string mode, double delta, double gamma, bool mle, bool include_flagged) {
          batch::EstimateOptions opt;
          if (mode == "cpt") {
            opt.cpt = CptConfig{delta, gamma};
          } else if (mode != "eum") {
            throw Error(ErrorCode::Validation, "mode must be eum or cpt");
          }
          opt.fit_mle = mle;
          opt.include_flagged = include_flagged;
          const auto states = sessions_of(sessions);
          batch::EstimateResult r;
          {
            py::gil_scoped_release unlock;
            r = batch::estimate(states, opt);
          }
          py::dict d;
          d["curves"] = to_py(io::to_json(r.curves));
          d["excluded"] = r.excluded;
          return d;
        },
        py::arg("sessions"), py::arg("mode") = "eum", py::arg("delta") = 0.77, py::arg("gamma") = 0.44,
        py::arg("mle") = true, py::arg("include_flagged") = false);

  m.def("aggregate",
        [](const py::object& curves, const std::string& distribution_csv, std::optional<std::string> reference_csv,
           const std::string& anchors, const std::string& personal_method, double death_ls) {
          const auto file = io::curves_file_from_json(to_cpp(curves));
          std::istringstream din(distribution_csv);
          const auto dist = io::parse_distribution(din);
          RlsTableOptions opt;
          opt.anchors = anchors == "cohort" ? AnchorMode::CohortMean : AnchorMode::ParticipantRatings;
          opt.personal_method = personal_method == "mle" ? PersonalMethod::Mle : PersonalMethod::Chained;
          opt.death_ls = death_ls;
          opt.cpt = file.cpt;
          if (reference_csv) {
            std::istringstream rin(*reference_csv);
            opt.reference = io::parse_distribution(rin);
          }
          const auto table = rls_table(batch::cohort_curves(file), dist, opt);
          py::list rows;
          for (const auto& r : table.results) {
            py::dict d;
            d["basis"] = std::string(to_string(r.basis));
            d["variant"] = std::string(to_string(r.variant));
            d["rls"] = r.rls;
            d["delta_from_mean"] = r.delta_from_mean;
            d["participants"] = r.participants;
            d["dropped"] = r.dropped;
            rows.append(d);
          }
          py::dict out;
          out["mean_ls"] = table.mean_ls;
          out["results"] = rows;
          return out;
        },
        py::arg("curves"), py::arg("distribution_csv"), py::arg("reference_csv") = py::none(),
        py::arg("anchors") = "participant", py::arg("personal_method") = "chained", py::arg("death_ls") = 0.0);

  m.def("report",
        [](const py::object& curves, const py::list& sessions) {
          return batch::report_files(io::curves_file_from_json(to_cpp(curves)), sessions_of(sessions));
        },
        py::arg("curves"), py::arg("sessions") = py::list(), "Report file bodies keyed by file name.");

  m.def("pearson", [](std::vector<double> x, std::vector<double> y) {
    const auto c = stats::pearson(x, y);
    return std::make_pair(c.r, c.p);
  });
  m.def("mann_whitney", [](std::vector<double> a, std::vector<double> b) {
    const auto t = stats::mann_whitney(a, b);
    py::dict d;
    d["u"] = t.u;
    d["p"] = t.p;
    d["exact"] = t.exact;
    return d;
  });
  m.def("cronbach_alpha", &stats::cronbach_alpha, py::arg("rows"));

  // In-process version of the HTTP API; replies are {"status", "body"}.
  py::class_<service::SurveyService>(m, "SurveyService")
      .def(py::init([](std::optional<std::string> data_dir, std::optional<std::uint64_t> seed_base) {
             service::ServiceConfig cfg;
             if (data_dir) cfg.data_dir = *data_dir;
             cfg.seed_base = seed_base;
             return std::make_unique<service::SurveyService>(cfg);
           }),
           py::arg("data_dir") = py::none(), py::arg("seed_base") = py::none())
      .def("create", [](service::SurveyService& s, const py::object& body) { return reply(s.create(to_cpp(body))); },
           py::arg("body") = py::dict())
      .def("prompt", [](service::SurveyService& s, const std::string& id) { return reply(s.prompt(id)); })
      .def("respond", [](service::SurveyService& s, const std::string& id, const py::object& body) {
        return reply(s.respond(id, to_cpp(body)));
      })
      .def("back", [](service::SurveyService& s, const std::string& id) { return reply(s.back(id)); })
      .def("record", [](service::SurveyService& s, const std::string& id) { return reply(s.record(id)); })
      .def_property_readonly("session_count", &service::SurveyService::session_count);
}
