#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "hrcplan/error.hpp"
#include "hrcplan/planner.hpp"
#include "hrcplan/scenario.hpp"
#include "hrcplan/server.hpp"
#include "hrcplan/simulator.hpp"

using namespace hrcplan;

namespace {

enum Exit { ok = 0, usage = 1, parse = 2, validation = 3, runtime = 4 };

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::parse:
    case ErrorKind::not_found: return parse;
    case ErrorKind::validation: return validation;
    default: return runtime;
  }
}

struct SimFlags {
  std::optional<std::uint64_t> seed;
  bool no_noise = false;
  std::optional<double> max_time;
  std::vector<std::string> failures;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--seed", f.seed, "Random seed (default: the scenario's)");
  cmd->add_flag("--no-noise", f.no_noise, "Mean durations, no failures, no missed gestures");
  cmd->add_option("--max-time", f.max_time, "Abort after this many simulated seconds");
  cmd->add_option("--fail", f.failures, "Failure probability override ACTION=P (repeatable)");
}

SimConfig make_config(const Scenario& s, const SimFlags& f) {
  SimConfig c = sim_config(s);
  if (f.seed) c.seed = *f.seed;
  if (f.max_time) c.max_time = *f.max_time;
  c.noise = !f.no_noise;
  for (const auto& spec : f.failures) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ValidationError("--fail expects ACTION=P, got '" + spec + "'");
    double p = 0.0;
    try {
      p = std::stod(spec.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("--fail: bad probability in '" + spec + "'");
    }
    if (p < 0.0 || p >= 1.0) throw ValidationError("--fail: probability must be in [0,1) in '" + spec + "'");
    c.failure_overrides[ActionId{spec.substr(0, eq)}] = p;
  }
  return c;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::runtime, "cannot write '" + path + "'");
  out << text;
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AND/OR-graph planner and simulator for human-robot cooperation"};
  app.require_subcommand(1);
  std::string scenario_path = "bundled";

  auto scenario_arg = [&](CLI::App* cmd) {
    cmd->add_option("scenario,--scenario", scenario_path, "Scenario file, or 'bundled'")->capture_default_str();
  };

  auto* validate = app.add_subcommand("validate", "Check a scenario and report problems");
  scenario_arg(validate);

  auto* plan = app.add_subcommand("plan", "Print the initial best path and cost of every graph");
  scenario_arg(plan);

  SimFlags sim_flags;
  std::string trace_path = "trace.jsonl";
  std::string report_path = "report.txt";
  int runs = 1;
  auto* simulate = app.add_subcommand("simulate", "Run the scenario and write a trace and a timing report");
  scenario_arg(simulate);
  add_sim_flags(simulate, sim_flags);
  simulate->add_option("--trace", trace_path, "Trace output (JSON lines)")->capture_default_str();
  simulate->add_option("--report", report_path, "Timing report output")->capture_default_str();
  simulate->add_option("--runs", runs, "Average the report over this many consecutive seeds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Concurrent versus sequential makespan");
  scenario_arg(compare);
  add_sim_flags(compare, sim_flags);

  std::string graph_id;
  std::string dot_path;
  auto* exp = app.add_subcommand("export", "Graphviz DOT of one graph");
  scenario_arg(exp);
  exp->add_option("--graph", graph_id, "Graph id (template or instance)")->required();
  exp->add_option("-o,--output", dot_path, "Output file (default: stdout)");

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string mode = "stepped";
  double speed = 1.0;
  bool simulate_operator = false;
  auto* serve = app.add_subcommand("serve", "Start the session service");
  scenario_arg(serve);
  add_sim_flags(serve, sim_flags);
  serve->add_option("--port", port, "TCP port (0 picks one)")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--mode", mode, "stepped or live")->check(CLI::IsMember({"stepped", "live"}))->capture_default_str();
  serve->add_option("--speed", speed, "Live mode: simulated seconds per wall-clock second")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_flag("--simulate-operator", simulate_operator, "Simulate the operator instead of waiting for gestures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }

  Scenario scenario;
  try {
    scenario = load_scenario_file(scenario_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }

  try {
    if (validate->parsed()) {
      const auto exec = expand(scenario);
      std::cout << "ok: " << scenario.name << ": " << scenario.model.graph_count() << " graph templates, "
                << exec.model.graph_count() << " instances, " << scenario.agents.size() << " agents, "
                << scenario.items.size() << " work items\n";
      for (const auto& w : scenario.warnings) std::cout << "warning: " << w << '\n';
      return ok;
    }

    if (plan->parsed()) {
      const auto exec = expand(scenario);
      const auto state = init_model_state(exec.model, exec.initially_met);
      Json out = Json::object();
      for (std::size_t gi = 0; gi < exec.model.graph_count(); ++gi) {
        const auto& g = exec.model.graph(gi);
        const auto paths = enumerate_paths(state.episodes[gi], model_arc_cost(exec.model, state, gi));
        Json gj;
        if (paths.empty()) {
          gj = nullptr;
        } else {
          gj["cost"] = paths.front().total_cost;
          gj["arcs"] = Json::array();
          for (const auto& h : paths.front().arcs) gj["arcs"].push_back(h.str());
          gj["alternatives"] = paths.size();
        }
        out[g.id().str()] = gj;
      }
      std::cout << out.dump(2) << '\n';
      return ok;
    }

    if (simulate->parsed()) {
      const auto exec = expand(scenario);
      auto config = make_config(scenario, sim_flags);
      std::vector<ExecutionTrace> traces;
      for (int i = 0; i < runs; ++i) {
        SimConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(i);
        traces.push_back(run(exec, c));
      }
      std::ostringstream trace_text;
      write_trace(trace_text, traces.front());
      write_file(trace_path, trace_text.str());
      std::ostringstream report_text;
      write_report(report_text, report(traces));
      write_file(report_path, report_text.str());
      const auto& t = traces.front();
      std::cout << "status " << t.status << "\nmakespan " << std::fixed << std::setprecision(2) << t.makespan
                << "\ntrace " << trace_path << "\nreport " << report_path << '\n';
      return t.status == "solved" ? ok : runtime;
    }

    if (compare->parsed()) {
      const auto exec = expand(scenario);
      const auto c = compare_concurrent_sequential(exec, make_config(scenario, sim_flags));
      std::cout << std::fixed << std::setprecision(2) << "concurrent " << c.concurrent << "\nsequential "
                << c.sequential << '\n'
                << std::setprecision(4) << "ratio " << c.ratio << '\n';
      if (c.concurrent_trace.status != "solved" || c.sequential_trace.status != "solved") {
        std::cerr << "error: runs ended " << c.concurrent_trace.status << " / " << c.sequential_trace.status << '\n';
        return runtime;
      }
      return ok;
    }

    if (exp->parsed()) {
      std::string dot;
      try {
        dot = export_graph(scenario.model, GraphId{graph_id});
      } catch (const NotFound&) {
        dot = export_graph(expand(scenario).model, GraphId{graph_id});
      }
      if (dot_path.empty()) std::cout << dot;
      else write_file(dot_path, dot);
      return ok;
    }

    if (serve->parsed()) {
      ServerConfig sc;
      sc.host = host;
      sc.port = port;
      sc.default_scenario = serialize(scenario);
      sc.mode = session_mode_from_string(mode);
      sc.speed = speed;
      sc.simulate_operator = simulate_operator;
      const auto config = make_config(scenario, sim_flags);
      sc.seed = config.seed;
      sc.max_time = config.max_time;
      sc.noise = config.noise;
      sc.failure_overrides = config.failure_overrides;
      Server server(sc);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int bound = server.start();
      std::cout << "listening on http://" << host << ':' << bound << std::endl;
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return ok;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return runtime;
  }
  return ok;
}
