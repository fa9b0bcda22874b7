#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hrcplan/episode.hpp"
#include "hrcplan/graph.hpp"

namespace hrcplan {

struct NodeRef {
  GraphId graph;
  NodeId node;
  auto operator<=>(const NodeRef&) const = default;
};

struct ArcRef {
  GraphId graph;
  HyperArcId arc;
  auto operator<=>(const ArcRef&) const = default;
};

/// A hyper-arc expanded into a whole lower-layer graph.
struct LayerTransition {
  ArcRef arc;
  GraphId subgraph;
  std::map<NodeId, NodeId> child_map;   // arc child -> subgraph leaf
  std::map<NodeId, NodeId> parent_map;  // arc parent -> subgraph root
  bool operator==(const LayerTransition&) const = default;
};

/// met(dependent) mirrors met(source). The dependent is a leaf of another graph.
struct EntanglementLink {
  NodeRef source;
  NodeRef dependent;
  bool operator==(const EntanglementLink&) const = default;
};

/// Layered set of graphs plus the transitions and entanglements between them.
/// Graphs are kept in insertion order, which must be non-decreasing in layer.
class ConcurrentModel {
public:
  /// Throws ValidationError on a duplicate graph id.
  void add_graph(std::shared_ptr<const GraphStructure> graph);
  void set_termination(const GraphId& id);

  const std::vector<std::shared_ptr<const GraphStructure>>& graphs() const noexcept { return graphs_; }
  std::size_t graph_count() const noexcept { return graphs_.size(); }
  const GraphStructure& graph(std::size_t i) const { return *graphs_.at(i); }
  std::optional<std::size_t> find_graph(const GraphId& id) const;
  /// Throws NotFound.
  std::size_t graph_index(const GraphId& id) const;

  const std::vector<LayerTransition>& transitions() const noexcept { return transitions_; }
  const std::vector<EntanglementLink>& entanglements() const noexcept { return links_; }
  const std::optional<GraphId>& termination() const noexcept { return termination_; }

  const LayerTransition* transition_for(const ArcRef& arc) const;
  const LayerTransition* transition_into(const GraphId& subgraph) const;
  /// Non-null when the node is the dependent end of a link.
  const EntanglementLink* link_into(const NodeRef& dependent) const;

  bool operator==(const ConcurrentModel&) const;

private:
  friend std::vector<std::string> attach_subgraph(ConcurrentModel&, const ArcRef&, const GraphId&,
                                                  const std::map<NodeId, NodeId>&,
                                                  const std::map<NodeId, NodeId>&);
  friend void link_entangled(ConcurrentModel&, const NodeRef&, const NodeRef&);

  std::vector<std::shared_ptr<const GraphStructure>> graphs_;
  std::vector<LayerTransition> transitions_;
  std::vector<EntanglementLink> links_;
  std::optional<GraphId> termination_;
};

/// Registers a transition. Returns label-mismatch warnings (mapped nodes whose
/// labels differ); structural problems throw ValidationError.
std::vector<std::string> attach_subgraph(ConcurrentModel& model, const ArcRef& arc, const GraphId& subgraph,
                                         const std::map<NodeId, NodeId>& child_map,
                                         const std::map<NodeId, NodeId>& parent_map);

/// Throws ValidationError for same-graph links, non-leaf dependents, doubly
/// entangled dependents and graph-level dependency cycles.
void link_entangled(ConcurrentModel& model, const NodeRef& source, const NodeRef& dependent);

/// Whole-model structural report: per-graph violations, layer ordering,
/// termination uniqueness.
std::vector<Violation> validate_model(const ConcurrentModel& model);

/// One episode per registered graph, same order as ConcurrentModel::graphs().
struct ModelState {
  std::vector<EpisodeState> episodes;

  EpisodeState& at(const ConcurrentModel& m, const GraphId& id) { return episodes.at(m.graph_index(id)); }
  const EpisodeState& at(const ConcurrentModel& m, const GraphId& id) const {
    return episodes.at(m.graph_index(id));
  }
  bool operator==(const ModelState&) const = default;
};

struct Change {
  enum class Kind { node_met, entangled_met, entangled_idempotent, arc_feasible, arc_infeasible, arc_solved, arc_suppressed };
  Kind kind;
  GraphId graph;
  std::string element;
  bool operator==(const Change&) const = default;
};

const char* to_string(Change::Kind k) noexcept;

/// Non-empty when the graph is in progress and has a feasible node or arc.
bool graph_feasible(const EpisodeState& s);

/// Fresh episodes for every graph, backed arcs flagged, synced to a fixed point.
ModelState init_model_state(const ConcurrentModel& model,
                            const std::map<GraphId, std::vector<NodeId>>& initially_met = {});

/// Slaves every backed arc to its subgraph and mirrors mapped and entangled
/// nodes until nothing changes. Throws ValidationError when `state` does not
/// hold one episode per graph.
std::vector<Change> sync_hierarchy(const ConcurrentModel& model, ModelState& state);

/// Mirrors a just-met node into its entangled dependents, following chains.
std::vector<Change> propagate_entanglement(const ConcurrentModel& model, ModelState& state, const NodeRef& changed);

/// Transactions: apply one event plus every cascade, or nothing on error.
std::vector<Change> apply_meet(const ConcurrentModel& model, ModelState& state, const NodeRef& node);
std::vector<Change> apply_action_done(const ConcurrentModel& model, ModelState& state, const ArcRef& arc,
                                      const ActionId& action);
/// For arcs with no actions.
std::vector<Change> apply_solve(const ConcurrentModel& model, ModelState& state, const ArcRef& arc);

/// True when the termination graph (or, without one, every graph) is solved.
bool model_solved(const ConcurrentModel& model, const ModelState& state);

}  // namespace hrcplan
