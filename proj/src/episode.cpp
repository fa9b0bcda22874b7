#include "hrcplan/episode.hpp"

#include <algorithm>

#include "hrcplan/error.hpp"

namespace hrcplan {

const char* to_string(EpisodeStatus s) noexcept {
  switch (s) {
    case EpisodeStatus::in_progress: return "in-progress";
    case EpisodeStatus::solved: return "solved";
    case EpisodeStatus::failed: return "failed";
  }
  return "in-progress";
}

bool EpisodeState::operator==(const EpisodeState& other) const {
  return graph == other.graph && met == other.met && node_feasible == other.node_feasible &&
         solved == other.solved && suppressed == other.suppressed && arc_feasible == other.arc_feasible &&
         backed == other.backed && done_actions == other.done_actions && status == other.status;
}

namespace detail {

void refresh_arc(EpisodeState& s, std::size_t a) {
  if (s.backed[a]) return;
  if (s.solved[a] || s.suppressed[a]) {
    s.arc_feasible[a] = false;
    return;
  }
  const auto& children = s.graph->arc_children(a);
  s.arc_feasible[a] = std::all_of(children.begin(), children.end(), [&](std::size_t c) { return s.met[c]; });
}

void refresh_status(EpisodeState& s) {
  const auto& g = *s.graph;
  if (s.met[g.root_index()]) {
    s.status = EpisodeStatus::solved;
    return;
  }
  const bool any_node = std::find(s.node_feasible.begin(), s.node_feasible.end(), true) != s.node_feasible.end();
  const bool any_arc = std::find(s.arc_feasible.begin(), s.arc_feasible.end(), true) != s.arc_feasible.end();
  s.status = (any_node || any_arc) ? EpisodeStatus::in_progress : EpisodeStatus::failed;
}

std::vector<std::size_t> mark_met(EpisodeState& s, std::size_t node) {
  std::vector<std::size_t> newly;
  if (s.met[node]) return newly;
  s.met[node] = true;
  s.node_feasible[node] = false;
  for (std::size_t a : s.graph->arcs_with_child(node)) {
    const bool before = s.arc_feasible[a];
    refresh_arc(s, a);
    if (!before && s.arc_feasible[a]) newly.push_back(a);
  }
  refresh_status(s);
  return newly;
}

SolveResult solve_arc(EpisodeState& s, std::size_t a) {
  const auto& g = *s.graph;
  SolveResult result;
  s.solved[a] = true;
  s.arc_feasible[a] = false;
  const std::size_t parent = g.arc_parent(a);
  if (!s.met[parent]) {
    s.node_feasible[parent] = true;
    result.feasible_parent = g.node(parent).id;
  }
  for (std::size_t c : g.arc_children(a)) {
    for (std::size_t other : g.arcs_with_child(c)) {
      if (other == a || s.suppressed[other] || s.solved[other]) continue;
      s.suppressed[other] = true;
      s.arc_feasible[other] = false;
      result.suppressed.push_back(g.arc(other).id);
    }
  }
  std::sort(result.suppressed.begin(), result.suppressed.end());
  refresh_status(s);
  return result;
}

}  // namespace detail

EpisodeState init_episode(std::shared_ptr<const GraphStructure> graph, const std::vector<NodeId>& initially_met) {
  if (!graph) throw ValidationError("init_episode: null graph");
  if (auto violations = validate_structure(*graph); !violations.empty())
    throw ValidationError("graph '" + graph->id().str() + "' invalid: " + violations.front().element + ": " +
                          violations.front().rule);
  const auto& g = *graph;
  EpisodeState s;
  s.graph = graph;
  s.met.assign(g.node_count(), false);
  s.node_feasible.assign(g.node_count(), false);
  s.solved.assign(g.arc_count(), false);
  s.suppressed.assign(g.arc_count(), false);
  s.arc_feasible.assign(g.arc_count(), false);
  s.backed.assign(g.arc_count(), false);
  s.done_actions.assign(g.arc_count(), 0);

  for (std::size_t n = 0; n < g.node_count(); ++n)
    if (g.is_leaf(n)) s.node_feasible[n] = true;
  for (const auto& id : initially_met) {
    const std::size_t n = g.node_index(id);
    if (!g.is_leaf(n)) throw ValidationError("node '" + id.str() + "' is not a leaf and cannot be initially met");
    s.met[n] = true;
    s.node_feasible[n] = false;
  }
  for (std::size_t a = 0; a < g.arc_count(); ++a) detail::refresh_arc(s, a);
  detail::refresh_status(s);
  return s;
}

MeetResult meet_node(EpisodeState& s, const NodeId& node) {
  const auto& g = *s.graph;
  const std::size_t n = g.node_index(node);
  if (s.status != EpisodeStatus::in_progress)
    throw ProtocolViolation("graph '" + g.id().str() + "' is " + to_string(s.status) + "; cannot meet '" +
                            node.str() + "'");
  if (!s.node_feasible[n])
    throw ProtocolViolation("node '" + node.str() + "' in graph '" + g.id().str() + "' is not feasible");
  MeetResult result;
  for (std::size_t a : detail::mark_met(s, n)) result.newly_feasible.push_back(g.arc(a).id);
  return result;
}

SolveResult solve_hyper_arc(EpisodeState& s, const HyperArcId& arc, bool external) {
  const auto& g = *s.graph;
  const std::size_t a = g.arc_index(arc);
  if (s.solved[a]) throw ProtocolViolation("hyper-arc '" + arc.str() + "' is already solved");
  if (s.suppressed[a]) throw ProtocolViolation("hyper-arc '" + arc.str() + "' is suppressed");
  if (!external) {
    if (s.backed[a]) throw ProtocolViolation("hyper-arc '" + arc.str() + "' is solved by its subgraph");
    if (s.done_actions[a] != g.arc(a).actions.size())
      throw ProtocolViolation("hyper-arc '" + arc.str() + "' has unfinished actions");
    if (!s.arc_feasible[a]) throw ProtocolViolation("hyper-arc '" + arc.str() + "' is not feasible");
  }
  return detail::solve_arc(s, a);
}

ActionResult record_action_done(EpisodeState& s, const HyperArcId& arc, const ActionId& action) {
  const auto& g = *s.graph;
  const std::size_t a = g.arc_index(arc);
  const auto& actions = g.arc(a).actions;
  const auto it = std::find_if(actions.begin(), actions.end(), [&](const Action& x) { return x.id == action; });
  if (it == actions.end())
    throw NotFound("hyper-arc '" + arc.str() + "' has no action '" + action.str() + "'");
  if (s.backed[a]) throw ProtocolViolation("hyper-arc '" + arc.str() + "' is solved by its subgraph");
  if (s.suppressed[a]) throw ProtocolViolation("hyper-arc '" + arc.str() + "' is suppressed");
  if (!s.arc_feasible[a]) throw ProtocolViolation("hyper-arc '" + arc.str() + "' is not feasible");
  const auto position = static_cast<std::size_t>(it - actions.begin());
  if (position != s.done_actions[a])
    throw ProtocolViolation("action '" + action.str() + "' is out of order on hyper-arc '" + arc.str() +
                            "' (next is '" + actions[s.done_actions[a]].id.str() + "')");
  ++s.done_actions[a];
  ActionResult result;
  if (s.done_actions[a] == actions.size()) {
    result.solved = true;
    result.effects = detail::solve_arc(s, a);
  }
  return result;
}

FeasibleSets feasible_sets(const EpisodeState& s) {
  const auto& g = *s.graph;
  FeasibleSets out;
  for (std::size_t n = 0; n < g.node_count(); ++n)
    if (s.node_feasible[n]) out.nodes.push_back(g.node(n).id);
  for (std::size_t a = 0; a < g.arc_count(); ++a)
    if (s.arc_feasible[a]) out.arcs.push_back(g.arc(a).id);
  return out;
}

}  // namespace hrcplan
