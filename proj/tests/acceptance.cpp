// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// line fails. Usage: hrcplan_acceptance <path to hrcplan cli>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "hrcplan/planner.hpp"
#include "hrcplan/scenario.hpp"
#include "hrcplan/simulator.hpp"
#include "support/oracles.hpp"

using namespace hrcplan;

namespace {

using Clock = std::chrono::steady_clock;

struct Result {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Result flag_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240611);
  std::size_t steps = 0, mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto g = oracle::random_graph(rng, "g" + std::to_string(trial));
    auto s = init_episode(g);
    std::vector<oracle::Step> log;
    if (!(s == oracle::recompute(g, log))) ++mismatches;
    while (oracle::random_legal_step(rng, s, log)) {
      ++steps;
      if (!(s == oracle::recompute(g, log))) ++mismatches;
    }
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0, fmt("500 graphs, %zu events, %zu mismatches, %.2f s", steps, mismatches, t)};
}

Result path_optimality() {
  std::mt19937_64 rng(20240611);
  std::size_t states = 0, mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto g = oracle::random_graph(rng, "g" + std::to_string(trial));
    auto s = init_episode(g);
    std::vector<oracle::Step> log;
    do {
      ++states;
      double truth = INFINITY;
      for (const auto& p : oracle::brute_force_paths(s)) truth = std::min(truth, p.cost);
      const auto paths = enumerate_paths(s);
      const double got = paths.empty() ? INFINITY : best_path(s).total_cost;
      if (got != truth) ++mismatches;
    } while (oracle::random_legal_step(rng, s, log));
  }
  return {mismatches == 0, fmt("%zu states, %zu mismatches", states, mismatches)};
}

Result entanglement() {
  std::mt19937_64 rng(4242);
  std::size_t transactions = 0, violations = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto m = oracle::random_entangled_model(rng);
    auto s = init_model_state(m);
    violations += oracle::entanglement_violations(m, s);
    while (oracle::random_model_step(rng, m, s)) {
      ++transactions;
      violations += oracle::entanglement_violations(m, s);
    }
  }
  return {violations == 0, fmt("150 models, %zu transactions, %zu violations", transactions, violations)};
}

Result hierarchy() {
  std::mt19937_64 rng(99);
  std::size_t transactions = 0, violations = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = oracle::random_layered_model(rng);
    auto s = init_model_state(m);
    violations += oracle::hierarchy_violations(m, s);
    while (oracle::random_model_step(rng, m, s)) {
      ++transactions;
      violations += oracle::hierarchy_violations(m, s);
    }
  }
  return {violations == 0, fmt("300 models, %zu transactions, %zu violations", transactions, violations)};
}

Result makespans(const Scenario& sc, const ExecutionModel& exec) {
  const auto t0 = Clock::now();
  auto cfg = sim_config(sc);
  cfg.noise = false;
  const auto c = compare_concurrent_sequential(exec, cfg);
  const double t = seconds_since(t0);
  const bool ok = std::abs(c.concurrent - 310.19) <= 0.01 && std::abs(c.sequential - 556.94) <= 0.01 && t < 1.0;
  return {ok, fmt("concurrent %.2f s, sequential %.2f s, %.3f s wall", c.concurrent, c.sequential, t)};
}

Result concurrency_bound(const Scenario& sc, const ExecutionModel& exec) {
  std::size_t held = 0, solved = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto cfg = sim_config(sc);
    cfg.seed = seed;
    const auto c = compare_concurrent_sequential(exec, cfg);
    held += c.concurrent <= c.sequential;
    solved += c.concurrent_trace.status == "solved" && c.sequential_trace.status == "solved";
    worst = std::max(worst, c.ratio);
  }
  return {held == 100 && solved == 100, fmt("%zu/100 runs bounded, %zu solved, worst ratio %.3f", held, solved, worst)};
}

Result overhead_share(const Scenario& sc, const ExecutionModel& exec) {
  const auto r = report(run(exec, sim_config(sc)));
  double worst = 0.0;
  std::string parts;
  for (const auto& b : r.branches) {
    double share = 0.0;
    for (const auto& c : b.categories)
      if (c.name == category::representation || c.name == category::planning) share += c.share;
    worst = std::max(worst, share);
    parts += fmt(" %s %.3f%%", b.branch.c_str(), share);
  }
  return {!r.branches.empty() && worst < 1.0, "representation+planning:" + parts};
}

// Every agent is external and a script plays them all: wrong-outcome branches
// are overridden onto the item's real outcome, the first three grasps fail.
Result replanning(const Scenario& sc, const ExecutionModel& exec) {
  auto cfg = sim_config(sc);
  cfg.noise = false;
  for (const auto& a : exec.agents) cfg.external_agents.insert(a.id);
  Engine e(std::make_shared<ExecutionModel>(exec), cfg);
  e.start();

  const auto& model = exec.model;
  int grasp_failures = 0, overrides = 0;
  std::size_t suppressed_refs = 0, submitted = 0;
  std::set<std::string> outcomes_taken;
  auto agent_for = [&](const Action& a) -> AgentId {
    for (const auto& ag : exec.agents)
      if (is_eligible(ag, a.eligible_agents)) return ag.id;
    return {};
  };

  while (!e.finished() && e.now() < 5000.0) {
    const auto& state = e.state();
    for (const auto& s : e.pending_suggestions()) {
      const auto& ep = state.at(model, s.graph);
      if (ep.suppressed[ep.graph->arc_index(s.arc)]) ++suppressed_refs;
    }
    if (e.pending_suggestions().empty()) {
      e.advance(1.0);
      continue;
    }
    const Suggestion s = e.pending_suggestions().front();
    const auto& g = *state.at(model, s.graph).graph;
    const auto& h = g.arc(g.arc_index(s.arc));
    const auto oc = exec.outcomes.find(s.graph);
    if (!h.outcome.empty() && oc != exec.outcomes.end() && h.outcome != oc->second) {
      for (const auto& alt : g.arcs()) {
        if (alt.outcome != oc->second) continue;
        e.submit(Event::override_by(agent_for(alt.actions.front()), s.graph, alt.id, alt.actions.front().id));
        ++overrides;
        outcomes_taken.insert(alt.outcome);
        break;
      }
      continue;
    }
    if (!h.outcome.empty() && state.at(model, s.graph).done_actions[g.arc_index(s.arc)] == 0)
      outcomes_taken.insert(h.outcome);
    if (s.action == ActionId{"yb_arm_grasp"} && grasp_failures < 3) {
      e.submit(Event::failed(s.graph, s.arc, s.action, s.agent));
      ++grasp_failures;
    } else {
      e.submit(Event::done(s.graph, s.arc, s.action, s.agent));
    }
    ++submitted;
  }
  const auto status = e.trace().status;
  const bool ok = status == "solved" && suppressed_refs == 0 && grasp_failures == 3 && outcomes_taken.size() == 3;
  return {ok, fmt("status %s, %zu events, %d overrides, %d grasp failures, %zu branches, %zu suppressed references",
                  status.c_str(), submitted, overrides, grasp_failures, outcomes_taken.size(), suppressed_refs)};
}

Result determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / ("hrcplan-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string traces[2];
  for (int i = 0; i < 2; ++i) {
    const auto trace = dir / ("trace" + std::to_string(i) + ".jsonl");
    const auto cmd = "\"" + cli + "\" simulate --seed 7 --trace \"" + trace.string() + "\" --report \"" +
                     (dir / "report.txt").string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) {
      fs::remove_all(dir);
      return {false, "simulate exited with an error"};
    }
    std::ifstream in(trace, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    traces[i] = ss.str();
  }
  fs::remove_all(dir);
  const bool ok = !traces[0].empty() && traces[0] == traces[1];
  return {ok, fmt("%zu bytes, %s", traces[0].size(), ok ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: hrcplan_acceptance <hrcplan cli>\n";
    return 2;
  }
  const auto sc = bundled_scenario();
  const auto exec = expand(sc);

  const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
      {"feasibility flags equal recomputation", flag_equivalence},
      {"best path cost equals exhaustive minimum", path_optimality},
      {"entangled nodes agree after every transaction", entanglement},
      {"backed arcs equivalent to their subgraph", hierarchy},
      {"desk-scale makespans", [&] { return makespans(sc, exec); }},
      {"concurrent never slower than sequential", [&] { return concurrency_bound(sc, exec); }},
      {"planning overhead under 1%", [&] { return overhead_share(sc, exec); }},
      {"replanning under overrides and failures", [&] { return replanning(sc, exec); }},
      {"seeded traces are byte-identical", [&] { return determinism(argv[1]); }},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Result r;
    try {
      r = check();
    } catch (const std::exception& ex) {
      r = {false, std::string("threw: ") + ex.what()};
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
