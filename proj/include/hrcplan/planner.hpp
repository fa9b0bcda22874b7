#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hrcplan/agents.hpp"
#include "hrcplan/hierarchy.hpp"

namespace hrcplan {

/// Alternative-free sub-hypergraph leading to the root. `arcs` is sorted by id.
struct CooperationPath {
  GraphId graph;
  std::vector<HyperArcId> arcs;
  double total_cost = 0.0;

  bool contains(const HyperArcId& arc) const;
  bool operator==(const CooperationPath&) const = default;
};

/// Cost of arc i of the graph being searched.
using ArcCost = std::function<double(std::size_t arc)>;

/// Every way of reaching the root from the current flags, cheapest first,
/// ties by arc-id sequence. Suppressed arcs never appear; neither do arcs
/// pre-empted by a rival that already has actions done (a rival shares a
/// child or the parent). No two arcs of a path share a child, since solving
/// one would suppress the other. Empty when the episode is solved or failed.
/// Without `cost`, HyperArc::cost is used.
std::vector<CooperationPath> enumerate_paths(const EpisodeState& state, const ArcCost& cost = {});

/// Throws Error(runtime) "no-path" when enumerate_paths is empty.
CooperationPath best_path(const EpisodeState& state, const ArcCost& cost = {});

/// Arc costs for graph `graph_index`, where a subgraph-backed arc costs the
/// subgraph's current best-path cost (0 once solved, +inf without a path).
ArcCost model_arc_cost(const ConcurrentModel& model, const ModelState& state, std::size_t graph_index);

struct Suggestion {
  AgentId agent;
  GraphId graph;
  HyperArcId arc;
  ActionId action;
  std::string rationale;
  double estimated_duration = 0.0;

  bool operator==(const Suggestion&) const = default;
};

/// Estimated seconds for `agent` to carry out `action`.
using DurationEstimate = std::function<double(const AgentSpec& agent, const Action& action)>;

/// Eligible idle agent with the smallest estimate; ties by agent id.
/// nullopt when no idle agent is eligible (the caller queues the action).
std::optional<AgentId> allocate_action(const Action& action, const std::vector<AgentSpec>& idle_agents,
                                       const DurationEstimate& estimate = {});

struct PlannerContext {
  std::vector<AgentSpec> agents;
  std::set<AgentId> busy;
  /// Arcs whose next action is already being executed.
  std::set<ArcRef> in_flight;
  /// Per graph, whether its planner may issue suggestions. Empty: all.
  std::vector<bool> enabled;
  DurationEstimate estimate;
};

/// Next undone action of each feasible arc on each enabled graph's best path,
/// at most one per agent, allocated in graph order then arc-id order.
std::vector<Suggestion> next_suggestions(const ConcurrentModel& model, const ModelState& state,
                                         const PlannerContext& ctx);

/// Candidate with the smallest rehearsed duration; ties by id.
/// Throws std::invalid_argument on an empty candidate list.
ItemId select_target(const std::vector<ItemId>& candidates, const std::function<double(const ItemId&)>& rehearse);

struct Event {
  enum class Kind { node_met, action_done, action_failed, override_action, arc_solved };
  Kind kind = Kind::node_met;
  GraphId graph;
  NodeId node;
  HyperArcId arc;
  ActionId action;
  AgentId agent;  // required for overrides, optional otherwise

  static Event met(GraphId g, NodeId n) { return {Kind::node_met, std::move(g), std::move(n), {}, {}, {}}; }
  static Event done(GraphId g, HyperArcId h, ActionId a, AgentId who = {}) {
    return {Kind::action_done, std::move(g), {}, std::move(h), std::move(a), std::move(who)};
  }
  static Event failed(GraphId g, HyperArcId h, ActionId a, AgentId who = {}) {
    return {Kind::action_failed, std::move(g), {}, std::move(h), std::move(a), std::move(who)};
  }
  static Event override_by(AgentId who, GraphId g, HyperArcId h, ActionId a) {
    return {Kind::override_action, std::move(g), {}, std::move(h), std::move(a), std::move(who)};
  }
  /// Internal: solves an action-free arc.
  static Event solve(GraphId g, HyperArcId h) { return {Kind::arc_solved, std::move(g), {}, std::move(h), {}, {}}; }
  bool operator==(const Event&) const = default;
};

const char* to_string(Event::Kind k) noexcept;

struct EventOutcome {
  std::vector<Change> changes;
  std::vector<Suggestion> suggestions;
  /// Graphs whose best path changed because the event left it.
  std::vector<GraphId> replanned;
};

/// Tracks the best path followed by each graph and replans when events move
/// an episode off it.
class Planner {
public:
  explicit Planner(const ConcurrentModel& model) : model_(&model) {}

  /// Applies the event transactionally. Throws ProtocolViolation for events on
  /// suppressed or non-feasible arcs and for ineligible agents, NotFound for
  /// unknown agents or ids. action_failed leaves every flag unchanged.
  EventOutcome handle_event(ModelState& state, const Event& event, const PlannerContext& ctx);

  /// Recomputes the followed paths from `state` (e.g. after internal events).
  void refresh(const ModelState& state);
  const std::map<GraphId, CooperationPath>& current_paths() const noexcept { return paths_; }

private:
  const ConcurrentModel* model_;
  std::map<GraphId, CooperationPath> paths_;
};

/// Internal follow-up events the execution layer issues after a transaction:
/// confirming parents of solved arcs and solving action-free arcs on the best
/// path. Applies them to `state` and returns them in order; the cascades they
/// caused are appended to `changes` when given.
std::vector<Event> settle(const ConcurrentModel& model, ModelState& state, std::vector<Change>* changes = nullptr);

}  // namespace hrcplan
