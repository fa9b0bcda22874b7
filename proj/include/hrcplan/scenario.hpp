#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hrcplan/execution.hpp"
#include "hrcplan/simulator.hpp"

namespace hrcplan {

inline constexpr const char* kScenarioSchema = "hrcplan-scenario/1";

struct GraphOptions {
  /// Instantiate the graph once per work item ("<graph>@<item>").
  bool per_item = false;
  Selection selection = Selection::fifo;
  Overheads overheads;
  std::vector<NodeId> initially_met;
  bool operator==(const GraphOptions&) const = default;
};

/// A parameterised object to process, with its configured perception outcome.
struct WorkItem {
  ItemId id;
  std::string outcome;
  /// Action or process id -> duration used for this item.
  std::map<std::string, DurationModel> durations;
  bool operator==(const WorkItem&) const = default;
};

struct SimParams {
  std::uint64_t seed = 0;
  double max_time = 100000.0;
  double retry_delay = 1.0;
  double repeat_delay = 2.0;
  int rehearsal_samples = 20;
  bool operator==(const SimParams&) const = default;
};

/// A loaded scenario document. `model` holds the graph templates; expand()
/// instantiates them per work item.
struct Scenario {
  std::string name;
  std::string description;
  std::vector<AgentSpec> agents;
  ConcurrentModel model;
  std::map<GraphId, GraphOptions> options;
  /// Arcs whose cost was written explicitly; the rest cost their expected duration.
  std::set<ArcRef> explicit_costs;
  std::vector<WorkItem> items;
  std::map<std::string, std::vector<ActionId>> gestures;
  SimParams sim;
  /// Non-fatal findings such as transition label mismatches.
  std::vector<std::string> warnings;

  bool operator==(const Scenario& o) const;
};

/// Parses and validates a scenario (YAML; JSON is accepted as a subset).
/// Throws ParseError for malformed text and ValidationError for unknown
/// references or structural violations; both name the line.
Scenario load_scenario(const std::string& text);
/// Reads the file; "bundled" (or "bundled-scenario") loads the built-in defect-inspection scenario.
Scenario load_scenario_file(const std::string& path);

/// Canonical YAML. load_scenario(serialize(s)) == s.
std::string serialize(const Scenario& s);

/// Instantiates per-item graphs, transitions and links into an executable model.
ExecutionModel expand(const Scenario& s);

/// Simulation settings from the scenario's sim block.
SimConfig sim_config(const Scenario& s);

/// Graphviz DOT: states as ellipses, hyper-arcs as point junctions fanning in
/// from their children, entangled nodes in red. Throws NotFound.
std::string export_graph(const ConcurrentModel& model, const GraphId& graph);

/// The defect-inspection scenario: youBot delivery graph, Baxter inspection
/// graph, termination graph, five agents, four objects.
const std::string& bundled_scenario_text();
Scenario bundled_scenario();

}  // namespace hrcplan
