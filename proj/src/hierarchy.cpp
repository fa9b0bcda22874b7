#include "hrcplan/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "hrcplan/error.hpp"

namespace hrcplan {

const char* to_string(Change::Kind k) noexcept {
  switch (k) {
    case Change::Kind::node_met: return "node-met";
    case Change::Kind::entangled_met: return "entangled-met";
    case Change::Kind::entangled_idempotent: return "entangled-idempotent";
    case Change::Kind::arc_feasible: return "arc-feasible";
    case Change::Kind::arc_infeasible: return "arc-infeasible";
    case Change::Kind::arc_solved: return "arc-solved";
    case Change::Kind::arc_suppressed: return "arc-suppressed";
  }
  return "node-met";
}

void ConcurrentModel::add_graph(std::shared_ptr<const GraphStructure> graph) {
  if (!graph) throw ValidationError("add_graph: null graph");
  if (find_graph(graph->id())) throw ValidationError("duplicate graph id '" + graph->id().str() + "'");
  graphs_.push_back(std::move(graph));
}

void ConcurrentModel::set_termination(const GraphId& id) {
  graph_index(id);
  termination_ = id;
}

std::optional<std::size_t> ConcurrentModel::find_graph(const GraphId& id) const {
  for (std::size_t i = 0; i < graphs_.size(); ++i)
    if (graphs_[i]->id() == id) return i;
  return std::nullopt;
}

std::size_t ConcurrentModel::graph_index(const GraphId& id) const {
  if (auto i = find_graph(id)) return *i;
  throw NotFound("unknown graph '" + id.str() + "'");
}

const LayerTransition* ConcurrentModel::transition_for(const ArcRef& arc) const {
  for (const auto& t : transitions_)
    if (t.arc == arc) return &t;
  return nullptr;
}

const LayerTransition* ConcurrentModel::transition_into(const GraphId& subgraph) const {
  for (const auto& t : transitions_)
    if (t.subgraph == subgraph) return &t;
  return nullptr;
}

const EntanglementLink* ConcurrentModel::link_into(const NodeRef& dependent) const {
  for (const auto& l : links_)
    if (l.dependent == dependent) return &l;
  return nullptr;
}

bool ConcurrentModel::operator==(const ConcurrentModel& other) const {
  if (graphs_.size() != other.graphs_.size()) return false;
  for (std::size_t i = 0; i < graphs_.size(); ++i)
    if (!(*graphs_[i] == *other.graphs_[i])) return false;
  return transitions_ == other.transitions_ && links_ == other.links_ && termination_ == other.termination_;
}

std::vector<std::string> attach_subgraph(ConcurrentModel& model, const ArcRef& arc, const GraphId& subgraph,
                                         const std::map<NodeId, NodeId>& child_map,
                                         const std::map<NodeId, NodeId>& parent_map) {
  const auto& upper = model.graph(model.graph_index(arc.graph));
  const auto& lower = model.graph(model.graph_index(subgraph));
  const auto a = upper.find_arc(arc.arc);
  if (!a) throw NotFound("graph '" + arc.graph.str() + "': unknown hyper-arc '" + arc.arc.str() + "'");
  const auto& h = upper.arc(*a);
  const std::string where = "transition " + arc.graph.str() + "/" + arc.arc.str() + " -> " + subgraph.str();

  if (arc.graph == subgraph) throw ValidationError(where + ": a graph cannot back its own hyper-arc");
  if (lower.layer() >= upper.layer())
    throw ValidationError(where + ": layer violation (subgraph layer " + std::to_string(lower.layer()) +
                          " is not below " + std::to_string(upper.layer()) + ")");
  if (model.transition_for(arc)) throw ValidationError(where + ": hyper-arc already backed");
  if (model.transition_into(subgraph)) throw ValidationError(where + ": subgraph already targeted");

  std::set<NodeId> targets;
  for (const auto& child : h.children) {
    auto it = child_map.find(child);
    if (it == child_map.end()) throw ValidationError(where + ": child-map misses child '" + child.str() + "'");
    const auto leaf = lower.find_node(it->second);
    if (!leaf || !lower.is_leaf(*leaf))
      throw ValidationError(where + ": child-map target '" + it->second.str() + "' is not a subgraph leaf");
    if (!targets.insert(it->second).second)
      throw ValidationError(where + ": child-map is not injective at '" + it->second.str() + "'");
  }
  if (child_map.size() != h.children.size())
    throw ValidationError(where + ": child-map has entries for nodes that are not children");
  if (parent_map.size() != 1 || parent_map.begin()->first != h.parent)
    throw ValidationError(where + ": parent-map must map exactly the parent '" + h.parent.str() + "'");
  if (parent_map.begin()->second != lower.root())
    throw ValidationError(where + ": parent-map target must be the subgraph root '" + lower.root().str() + "'");

  std::vector<std::string> warnings;
  auto label_check = [&](const NodeId& up, const NodeId& low) {
    const auto& ul = upper.node(upper.node_index(up)).label;
    const auto& ll = lower.node(lower.node_index(low)).label;
    if (ul != ll) warnings.push_back(where + ": label mismatch '" + ul + "' vs '" + ll + "'");
  };
  for (const auto& [up, low] : child_map) label_check(up, low);
  label_check(parent_map.begin()->first, parent_map.begin()->second);

  model.transitions_.push_back({arc, subgraph, child_map, parent_map});
  return warnings;
}

void link_entangled(ConcurrentModel& model, const NodeRef& source, const NodeRef& dependent) {
  const std::string where = "link " + source.graph.str() + "/" + source.node.str() + " -> " +
                            dependent.graph.str() + "/" + dependent.node.str();
  const auto& sg = model.graph(model.graph_index(source.graph));
  const auto& dg = model.graph(model.graph_index(dependent.graph));
  sg.node_index(source.node);
  const std::size_t d = dg.node_index(dependent.node);
  if (source.graph == dependent.graph) throw ValidationError(where + ": source and dependent share a graph");
  if (!dg.is_leaf(d)) throw ValidationError(where + ": dependent node is not a leaf");
  if (model.link_into(dependent)) throw ValidationError(where + ": dependent already entangled");

  // Adding source.graph -> dependent.graph must not close a cycle.
  std::deque<GraphId> frontier{dependent.graph};
  std::set<GraphId> seen{dependent.graph};
  while (!frontier.empty()) {
    const GraphId g = frontier.front();
    frontier.pop_front();
    if (g == source.graph) throw ValidationError(where + ": dependency cycle between graphs");
    for (const auto& l : model.links_)
      if (l.source.graph == g && seen.insert(l.dependent.graph).second) frontier.push_back(l.dependent.graph);
  }
  model.links_.push_back({source, dependent});
}

std::vector<Violation> validate_model(const ConcurrentModel& model) {
  std::vector<Violation> out;
  int previous_layer = -1;
  int top_layer = -1;
  for (const auto& g : model.graphs()) {
    auto v = validate_structure(*g);
    out.insert(out.end(), v.begin(), v.end());
    if (g->layer() < previous_layer)
      out.push_back({"graph '" + g->id().str() + "'", "graphs not ordered by layer"});
    previous_layer = g->layer();
    top_layer = std::max(top_layer, g->layer());
  }
  if (const auto& t = model.termination()) {
    const auto& tg = model.graph(model.graph_index(*t));
    int at_top = 0;
    for (const auto& g : model.graphs()) at_top += g->layer() == top_layer;
    if (tg.layer() != top_layer || at_top != 1)
      out.push_back({"graph '" + t->str() + "'", "termination graph is not the unique highest-layer graph"});
  }
  return out;
}

bool graph_feasible(const EpisodeState& s) {
  if (s.status != EpisodeStatus::in_progress) return false;
  return std::find(s.node_feasible.begin(), s.node_feasible.end(), true) != s.node_feasible.end() ||
         std::find(s.arc_feasible.begin(), s.arc_feasible.end(), true) != s.arc_feasible.end();
}

namespace {

void check_state(const ConcurrentModel& model, const ModelState& state) {
  if (state.episodes.size() != model.graph_count())
    throw ValidationError("model state holds " + std::to_string(state.episodes.size()) + " episodes for " +
                          std::to_string(model.graph_count()) + " graphs");
  for (std::size_t i = 0; i < model.graph_count(); ++i)
    if (!state.episodes[i].graph || state.episodes[i].graph->id() != model.graph(i).id())
      throw ValidationError("missing episode state for graph '" + model.graph(i).id().str() + "'");
}

void record_arc_changes(const EpisodeState& before, const EpisodeState& after, std::vector<Change>& out) {
  const auto& g = *after.graph;
  for (std::size_t a = 0; a < g.arc_count(); ++a) {
    if (!before.solved[a] && after.solved[a]) out.push_back({Change::Kind::arc_solved, g.id(), g.arc(a).id.str()});
    if (!before.suppressed[a] && after.suppressed[a])
      out.push_back({Change::Kind::arc_suppressed, g.id(), g.arc(a).id.str()});
    if (!before.arc_feasible[a] && after.arc_feasible[a])
      out.push_back({Change::Kind::arc_feasible, g.id(), g.arc(a).id.str()});
    if (before.arc_feasible[a] && !after.arc_feasible[a] && !after.solved[a] && !after.suppressed[a])
      out.push_back({Change::Kind::arc_infeasible, g.id(), g.arc(a).id.str()});
  }
}

}  // namespace

ModelState init_model_state(const ConcurrentModel& model,
                            const std::map<GraphId, std::vector<NodeId>>& initially_met) {
  ModelState state;
  for (const auto& g : model.graphs()) {
    auto it = initially_met.find(g->id());
    static const std::vector<NodeId> none;
    const auto& met = it == initially_met.end() ? none : it->second;
    for (const auto& n : met)
      if (model.link_into({g->id(), n}))
        throw ValidationError("entangled node '" + g->id().str() + "/" + n.str() + "' cannot be initially met");
    state.episodes.push_back(init_episode(g, met));
  }
  for (const auto& t : model.transitions()) {
    auto& up = state.at(model, t.arc.graph);
    const std::size_t a = up.graph->arc_index(t.arc.arc);
    up.backed[a] = true;
    up.arc_feasible[a] = false;
  }
  sync_hierarchy(model, state);
  return state;
}

std::vector<Change> propagate_entanglement(const ConcurrentModel& model, ModelState& state, const NodeRef& changed) {
  check_state(model, state);
  std::vector<Change> cascade;
  std::deque<NodeRef> frontier{changed};
  while (!frontier.empty()) {
    const NodeRef current = frontier.front();
    frontier.pop_front();
    for (const auto& link : model.entanglements()) {
      if (link.source != current) continue;
      auto& dep = state.at(model, link.dependent.graph);
      const std::size_t d = dep.graph->node_index(link.dependent.node);
      if (dep.met[d]) {
        cascade.push_back({Change::Kind::entangled_idempotent, link.dependent.graph, link.dependent.node.str()});
        continue;
      }
      const EpisodeState before = dep;
      detail::mark_met(dep, d);
      cascade.push_back({Change::Kind::entangled_met, link.dependent.graph, link.dependent.node.str()});
      record_arc_changes(before, dep, cascade);
      frontier.push_back(link.dependent);
    }
  }
  return cascade;
}

std::vector<Change> sync_hierarchy(const ConcurrentModel& model, ModelState& state) {
  check_state(model, state);
  std::vector<Change> changes;
  // Every pass either flips a monotone flag or terminates.
  std::size_t bound = 1;
  for (const auto& g : model.graphs()) bound += g->node_count() + 2 * g->arc_count();
  bound *= model.graph_count() + 1;

  for (std::size_t pass = 0; pass < bound; ++pass) {
    bool changed = false;

    for (const auto& link : model.entanglements()) {
      const auto& src = state.at(model, link.source.graph);
      if (!src.met[src.graph->node_index(link.source.node)]) continue;
      auto& dep = state.at(model, link.dependent.graph);
      const std::size_t d = dep.graph->node_index(link.dependent.node);
      if (dep.met[d]) continue;
      const EpisodeState before = dep;
      detail::mark_met(dep, d);
      changes.push_back({Change::Kind::entangled_met, link.dependent.graph, link.dependent.node.str()});
      record_arc_changes(before, dep, changes);
      changed = true;
    }

    for (const auto& t : model.transitions()) {
      const auto& sub = state.at(model, t.subgraph);
      auto& up = state.at(model, t.arc.graph);
      const EpisodeState before = up;
      const auto& ug = *up.graph;
      const std::size_t a = ug.arc_index(t.arc.arc);

      for (const auto& [child, leaf] : t.child_map) {
        const std::size_t c = ug.node_index(child);
        if (sub.met[sub.graph->node_index(leaf)] && !up.met[c]) {
          detail::mark_met(up, c);
          changes.push_back({Change::Kind::node_met, ug.id(), child.str()});
        }
      }
      if (sub.status == EpisodeStatus::solved && !up.solved[a] && !up.suppressed[a]) detail::solve_arc(up, a);
      const bool feasible = !up.solved[a] && !up.suppressed[a] && graph_feasible(sub);
      if (up.arc_feasible[a] != feasible) {
        up.arc_feasible[a] = feasible;
        detail::refresh_status(up);
      }
      const std::size_t parent = ug.arc_parent(a);
      if (up.solved[a] && sub.met[sub.graph->root_index()] && !up.met[parent]) {
        detail::mark_met(up, parent);
        changes.push_back({Change::Kind::node_met, ug.id(), ug.node(parent).id.str()});
      }
      if (!(before == up)) {
        record_arc_changes(before, up, changes);
        changed = true;
      }
    }
    if (!changed) return changes;
  }
  throw Error(ErrorKind::runtime, "sync_hierarchy did not reach a fixed point");
}

namespace {

template <class F>
std::vector<Change> transact(const ConcurrentModel& model, ModelState& state, F&& event) {
  check_state(model, state);
  ModelState working = state;
  std::vector<Change> changes = event(working);
  auto more = sync_hierarchy(model, working);
  changes.insert(changes.end(), more.begin(), more.end());
  state = std::move(working);
  return changes;
}

}  // namespace

std::vector<Change> apply_meet(const ConcurrentModel& model, ModelState& state, const NodeRef& node) {
  if (model.link_into(node))
    throw ProtocolViolation("node '" + node.graph.str() + "/" + node.node.str() +
                            "' is entangled; it is met only through its source");
  return transact(model, state, [&](ModelState& w) {
    auto& ep = w.at(model, node.graph);
    const EpisodeState before = ep;
    meet_node(ep, node.node);
    std::vector<Change> changes{{Change::Kind::node_met, node.graph, node.node.str()}};
    record_arc_changes(before, ep, changes);
    auto cascade = propagate_entanglement(model, w, node);
    changes.insert(changes.end(), cascade.begin(), cascade.end());
    return changes;
  });
}

std::vector<Change> apply_action_done(const ConcurrentModel& model, ModelState& state, const ArcRef& arc,
                                      const ActionId& action) {
  return transact(model, state, [&](ModelState& w) {
    auto& ep = w.at(model, arc.graph);
    const EpisodeState before = ep;
    record_action_done(ep, arc.arc, action);
    std::vector<Change> changes;
    record_arc_changes(before, ep, changes);
    return changes;
  });
}

std::vector<Change> apply_solve(const ConcurrentModel& model, ModelState& state, const ArcRef& arc) {
  return transact(model, state, [&](ModelState& w) {
    auto& ep = w.at(model, arc.graph);
    const EpisodeState before = ep;
    solve_hyper_arc(ep, arc.arc);
    std::vector<Change> changes;
    record_arc_changes(before, ep, changes);
    return changes;
  });
}

bool model_solved(const ConcurrentModel& model, const ModelState& state) {
  if (const auto& t = model.termination()) return state.at(model, *t).status == EpisodeStatus::solved;
  return std::all_of(state.episodes.begin(), state.episodes.end(),
                     [](const EpisodeState& e) { return e.status == EpisodeStatus::solved; });
}

}  // namespace hrcplan
