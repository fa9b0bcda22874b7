#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hrcplan/ids.hpp"

namespace hrcplan {

/// Normal duration model, truncated at zero when sampled. Seconds.
struct DurationModel {
  double mean = 0.0;
  double std_dev = 0.0;

  bool operator==(const DurationModel&) const = default;
};

/// A behaviour active while a node holds. Never causes a transition.
struct ProcessSpec {
  std::string id;
  std::string label;
  std::vector<std::string> eligible_agents;  // agent ids or agent-class tags
  DurationModel duration;

  bool operator==(const ProcessSpec&) const = default;
};

struct Action {
  ActionId id;
  std::string label;
  std::vector<std::string> eligible_agents;  // agent ids or agent-class tags
  DurationModel duration;
  double failure_probability = 0.0;

  bool operator==(const Action&) const = default;
};

struct Node {
  NodeId id;
  std::string label;
  std::vector<ProcessSpec> processes;

  bool operator==(const Node&) const = default;
};

/// Many-to-one transition: all children jointly required, actions run in list order.
struct HyperArc {
  HyperArcId id;
  std::vector<NodeId> children;
  NodeId parent;
  std::vector<Action> actions;
  double cost = 0.0;
  /// Optional perception outcome this arc stands for ("faulty", ...). Empty when
  /// the arc is an ordinary planner choice.
  std::string outcome;

  bool operator==(const HyperArc&) const = default;
};

struct Violation {
  std::string element;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

/// Immutable 1-layer AND/OR graph. Nodes and hyper-arcs are kept sorted by id,
/// so index order is also the lexicographic tie-break order.
class GraphStructure {
public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  GraphStructure(GraphId id, std::vector<Node> nodes, std::vector<HyperArc> arcs, NodeId root, int layer = 1);

  const GraphId& id() const noexcept { return id_; }
  int layer() const noexcept { return layer_; }
  const NodeId& root() const noexcept { return root_; }
  std::size_t root_index() const noexcept { return root_index_; }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<HyperArc>& arcs() const noexcept { return arcs_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t arc_count() const noexcept { return arcs_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const HyperArc& arc(std::size_t i) const { return arcs_.at(i); }

  std::optional<std::size_t> find_node(const NodeId& id) const;
  std::optional<std::size_t> find_arc(const HyperArcId& id) const;
  /// Throws NotFound.
  std::size_t node_index(const NodeId& id) const;
  std::size_t arc_index(const HyperArcId& id) const;

  /// Child indices of arc i; entries are npos for dangling references.
  const std::vector<std::size_t>& arc_children(std::size_t i) const { return arc_children_.at(i); }
  std::size_t arc_parent(std::size_t i) const { return arc_parent_.at(i); }
  const std::vector<std::size_t>& arcs_with_child(std::size_t node) const { return arcs_by_child_.at(node); }
  const std::vector<std::size_t>& arcs_with_parent(std::size_t node) const { return arcs_by_parent_.at(node); }
  bool is_leaf(std::size_t node) const { return arcs_by_parent_.at(node).empty(); }
  std::vector<std::size_t> leaves() const;

  bool operator==(const GraphStructure& other) const;

private:
  GraphId id_;
  std::vector<Node> nodes_;
  std::vector<HyperArc> arcs_;
  NodeId root_;
  int layer_;
  std::size_t root_index_ = npos;
  std::unordered_map<NodeId, std::size_t> node_lookup_;
  std::unordered_map<HyperArcId, std::size_t> arc_lookup_;
  std::vector<std::vector<std::size_t>> arc_children_;
  std::vector<std::size_t> arc_parent_;
  std::vector<std::vector<std::size_t>> arcs_by_child_;
  std::vector<std::vector<std::size_t>> arcs_by_parent_;
};

/// Structural check. Empty result iff every graph invariant holds.
std::vector<Violation> validate_structure(const GraphStructure& graph);

/// Sum of action means; the default cost of an arc when none is given.
double expected_duration(const HyperArc& arc);

}  // namespace hrcplan
