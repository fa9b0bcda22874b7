#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hrcplan/agents.hpp"
#include "hrcplan/hierarchy.hpp"

namespace hrcplan {

/// Modelled per-activation latency of the software modules, seconds.
struct Overheads {
  double representation = 0.0;
  double planning = 0.0;
  double simulation = 0.0;

  double total() const noexcept { return representation + planning + simulation; }
  bool operator==(const Overheads&) const = default;
};

/// How a planner group picks its next instance.
enum class Selection { fifo, rehearsal };

const char* to_string(Selection s) noexcept;
/// Throws ValidationError on an unknown name.
Selection selection_from_string(const std::string& s);

/// One planner and the graph instances it works through, one at a time.
struct PlannerGroup {
  std::string name;
  Selection selection = Selection::fifo;
  Overheads overheads;
  std::vector<std::size_t> instances;  // graph indices into the model
  std::vector<ItemId> items;           // parallel to instances; empty ids for singleton graphs
  bool operator==(const PlannerGroup&) const = default;
};

/// Everything the simulator and the session need: the instantiated concurrent
/// model plus agents, planner groups and per-instance perception outcomes.
struct ExecutionModel {
  ConcurrentModel model;
  std::vector<AgentSpec> agents;
  std::vector<PlannerGroup> groups;
  std::map<GraphId, std::vector<NodeId>> initially_met;
  /// Perception outcome of the work item each instance handles.
  std::map<GraphId, std::string> outcomes;
  /// Gesture name -> actions it can announce.
  std::map<std::string, std::vector<ActionId>> gestures;

  const AgentSpec* find_agent(const AgentId& id) const;
  bool is_gesture_action(const ActionId& action) const;
  /// Leaves the execution layer meets when the instance starts: neither
  /// entangled nor mirrored from a lower graph.
  std::vector<NodeId> free_leaves(std::size_t graph_index) const;
  /// Group owning the graph, or npos.
  std::size_t group_of(std::size_t graph_index) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// The instance alone, as its own model: no transitions, no links, every
/// leaf free. Used for standalone rehearsal.
ExecutionModel standalone(const ExecutionModel& exec, std::size_t graph_index);

/// Structural problems of the execution model beyond validate_model: agents
/// without eligible actions, unknown gesture actions, groups referencing
/// unknown graphs. Empty when clean.
std::vector<Violation> validate_execution(const ExecutionModel& exec);

}  // namespace hrcplan
