#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hrcplan/error.hpp"
#include "hrcplan/planner.hpp"
#include "hrcplan/scenario.hpp"
#include "hrcplan/session.hpp"
#include "hrcplan/simulator.hpp"

namespace py = pybind11;
using namespace hrcplan;

namespace {

// Structured results cross the boundary as JSON text; the Python package
// decodes them.
struct Model {
  Scenario scenario;
  std::shared_ptr<const ExecutionModel> exec;

  explicit Model(Scenario s) : scenario(std::move(s)), exec(std::make_shared<const ExecutionModel>(expand(scenario))) {}

  SimConfig config(std::optional<std::uint64_t> seed, bool noise, std::optional<double> max_time) const {
    SimConfig c = sim_config(scenario);
    if (seed) c.seed = *seed;
    if (max_time) c.max_time = *max_time;
    c.noise = noise;
    return c;
  }
};

std::string plan_json(const Model& m) {
  const auto state = init_model_state(m.exec->model, m.exec->initially_met);
  Json out = Json::object();
  for (std::size_t gi = 0; gi < m.exec->model.graph_count(); ++gi) {
    const auto paths = enumerate_paths(state.episodes[gi], model_arc_cost(m.exec->model, state, gi));
    Json gj = nullptr;
    if (!paths.empty()) {
      gj = Json::object();
      gj["cost"] = paths.front().total_cost;
      gj["arcs"] = Json::array();
      for (const auto& h : paths.front().arcs) gj["arcs"].push_back(h.str());
    }
    out[m.exec->model.graph(gi).id().str()] = gj;
  }
  return out.dump();
}

Json trace_json(const ExecutionTrace& t) {
  Json j;
  j["status"] = t.status;
  j["makespan"] = t.makespan;
  Json order = Json::object();
  for (const auto& [group, items] : t.visit_order) {
    order[group] = Json::array();
    for (const auto& i : items) order[group].push_back(i.str());
  }
  j["visit_order"] = std::move(order);
  j["events"] = Json::array();
  for (const auto& e : t.events) j["events"].push_back(to_json(e));
  return j;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AND/OR-graph planning engine";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NotFound>(m, "NotFound", base.ptr());
  py::register_exception<ProtocolViolation>(m, "ProtocolViolation", base.ptr());

  py::class_<Model>(m, "Model")
      .def_static("bundled", [] { return Model(bundled_scenario()); })
      .def_static("from_yaml", [](const std::string& text) { return Model(load_scenario(text)); })
      .def_static("from_file", [](const std::string& path) { return Model(load_scenario_file(path)); })
      .def_property_readonly("name", [](const Model& self) { return self.scenario.name; })
      .def_property_readonly("warnings", [](const Model& self) { return self.scenario.warnings; })
      .def("graph_ids",
           [](const Model& self) {
             std::vector<std::string> out;
             for (std::size_t i = 0; i < self.exec->model.graph_count(); ++i)
               out.push_back(self.exec->model.graph(i).id().str());
             return out;
           })
      .def("to_yaml", [](const Model& self) { return serialize(self.scenario); })
      .def("export_dot", [](const Model& self, const std::string& g) { return export_graph(self.exec->model, GraphId{g}); })
      .def("plan_json", &plan_json)
      .def(
          "simulate_json",
          [](const Model& self, std::optional<std::uint64_t> seed, bool noise, std::optional<double> max_time) {
            ExecutionTrace t;
            {
              py::gil_scoped_release release;
              t = run(*self.exec, self.config(seed, noise, max_time));
            }
            return trace_json(t).dump();
          },
          py::arg("seed") = py::none(), py::arg("noise") = true, py::arg("max_time") = py::none())
      .def(
          "compare_json",
          [](const Model& self, std::optional<std::uint64_t> seed, bool noise) {
            Comparison c;
            {
              py::gil_scoped_release release;
              c = compare_concurrent_sequential(*self.exec, self.config(seed, noise, std::nullopt));
            }
            Json j{{"concurrent", c.concurrent}, {"sequential", c.sequential}, {"ratio", c.ratio},
                   {"status", {c.concurrent_trace.status, c.sequential_trace.status}}};
            return j.dump();
          },
          py::arg("seed") = py::none(), py::arg("noise") = true)
      .def(
          "report_text",
          [](const Model& self, std::optional<std::uint64_t> seed, bool noise) {
            std::ostringstream os;
            write_report(os, report(run(*self.exec, self.config(seed, noise, std::nullopt))));
            return os.str();
          },
          py::arg("seed") = py::none(), py::arg("noise") = true);

  py::class_<Session>(m, "Session")
      .def(py::init([](const Model& model, const std::string& id, std::optional<std::uint64_t> seed, bool noise,
                       bool simulate_operator) {
             SessionConfig c;
             c.sim = model.config(seed, noise, std::nullopt);
             c.simulate_operator = simulate_operator;
             return std::make_unique<Session>(id, model.exec, c);
           }),
           py::arg("model"), py::arg("id") = "py", py::arg("seed") = py::none(), py::arg("noise") = true,
           py::arg("simulate_operator") = false)
      .def_property_readonly("id", &Session::id)
      .def("snapshot_json", [](const Session& s) { return s.snapshot().dump(); })
      .def("state_hash", &Session::state_hash)
      .def("submit_json",
           [](Session& s, const std::string& event) {
             Json ev;
             try {
               ev = Json::parse(event);
             } catch (const Json::parse_error& e) {
               throw ParseError(e.what());
             }
             const auto r = s.submit(ev);
             return Json{{"accepted", r.accepted}, {"error", r.error}, {"reason", r.reason}, {"snapshot", r.snapshot}}.dump();
           })
      .def("advance_json",
           [](Session& s, double by) {
             const auto r = s.advance(by);
             Json fired = Json::array();
             for (const auto& e : r.fired) fired.push_back(to_json(e));
             return Json{{"fired", fired}, {"snapshot", r.snapshot}}.dump();
           })
      .def("log_json", [](const Session& s) {
        Json out = Json::array();
        for (const auto& e : s.log()) out.push_back(to_json(e));
        return out.dump();
      });
}
