#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hrcplan/graph.hpp"

namespace hrcplan {

enum class EpisodeStatus { in_progress, solved, failed };

const char* to_string(EpisodeStatus s) noexcept;

/// Mutable per-run flags over an immutable graph.
///
/// met and solved only ever go false -> true. A suppressed arc stays
/// infeasible and unsolved for the rest of the episode. Arcs flagged as
/// backed have their feasible/solved bits driven by a lower-layer graph
/// (see hierarchy.hpp) instead of by their own children and actions.
struct EpisodeState {
  std::shared_ptr<const GraphStructure> graph;
  std::vector<bool> met;
  std::vector<bool> node_feasible;
  std::vector<bool> solved;
  std::vector<bool> suppressed;
  std::vector<bool> arc_feasible;
  std::vector<bool> backed;
  std::vector<std::size_t> done_actions;
  EpisodeStatus status = EpisodeStatus::in_progress;

  const GraphStructure& structure() const { return *graph; }
  bool operator==(const EpisodeState& other) const;
};

struct FeasibleSets {
  std::vector<NodeId> nodes;
  std::vector<HyperArcId> arcs;

  bool empty() const noexcept { return nodes.empty() && arcs.empty(); }
  bool operator==(const FeasibleSets&) const = default;
};

struct MeetResult {
  std::vector<HyperArcId> newly_feasible;
};

struct SolveResult {
  std::optional<NodeId> feasible_parent;
  std::vector<HyperArcId> suppressed;
};

struct ActionResult {
  bool solved = false;
  SolveResult effects;
};

/// Fresh episode: unmet leaves feasible, everything else clear.
/// Throws ValidationError when the structure is invalid or a listed node is
/// not a leaf, NotFound for unknown ids.
EpisodeState init_episode(std::shared_ptr<const GraphStructure> graph, const std::vector<NodeId>& initially_met = {});

/// Throws ProtocolViolation when the node is not currently feasible.
MeetResult meet_node(EpisodeState& s, const NodeId& node);

/// Marks the next action of the arc done. Throws ProtocolViolation for an
/// out-of-order action or a non-feasible arc, NotFound for unknown ids.
ActionResult record_action_done(EpisodeState& s, const HyperArcId& arc, const ActionId& action);

/// Solves the arc, enables its parent and suppresses every other arc sharing
/// a child with it. `external` is set when a lower-layer graph solved it.
SolveResult solve_hyper_arc(EpisodeState& s, const HyperArcId& arc, bool external = false);

FeasibleSets feasible_sets(const EpisodeState& s);

// Index-level primitives shared with the hierarchy layer.
namespace detail {

/// Sets met without the feasibility precondition (mirrored updates).
/// Returns arcs that became feasible.
std::vector<std::size_t> mark_met(EpisodeState& s, std::size_t node);
SolveResult solve_arc(EpisodeState& s, std::size_t arc);
void refresh_arc(EpisodeState& s, std::size_t arc);
void refresh_status(EpisodeState& s);

}  // namespace detail

}  // namespace hrcplan
