#include "hrcplan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hrcplan/error.hpp"

namespace hrcplan {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::not_found: return "not-found";
    case ErrorKind::protocol_violation: return "protocol-violation";
    case ErrorKind::runtime: return "runtime";
  }
  return "runtime";
}

GraphStructure::GraphStructure(GraphId id, std::vector<Node> nodes, std::vector<HyperArc> arcs, NodeId root,
                               int layer)
    : id_(std::move(id)), nodes_(std::move(nodes)), arcs_(std::move(arcs)), root_(std::move(root)), layer_(layer) {
  std::stable_sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  std::stable_sort(arcs_.begin(), arcs_.end(), [](const HyperArc& a, const HyperArc& b) { return a.id < b.id; });

  for (std::size_t i = 0; i < nodes_.size(); ++i) node_lookup_.emplace(nodes_[i].id, i);
  for (std::size_t i = 0; i < arcs_.size(); ++i) arc_lookup_.emplace(arcs_[i].id, i);

  if (auto it = node_lookup_.find(root_); it != node_lookup_.end()) root_index_ = it->second;

  arcs_by_child_.assign(nodes_.size(), {});
  arcs_by_parent_.assign(nodes_.size(), {});
  arc_children_.resize(arcs_.size());
  arc_parent_.assign(arcs_.size(), npos);
  for (std::size_t a = 0; a < arcs_.size(); ++a) {
    for (const auto& child : arcs_[a].children) {
      auto it = node_lookup_.find(child);
      const std::size_t c = it == node_lookup_.end() ? npos : it->second;
      arc_children_[a].push_back(c);
      if (c != npos && std::find(arcs_by_child_[c].begin(), arcs_by_child_[c].end(), a) == arcs_by_child_[c].end())
        arcs_by_child_[c].push_back(a);
    }
    if (auto it = node_lookup_.find(arcs_[a].parent); it != node_lookup_.end()) {
      arc_parent_[a] = it->second;
      arcs_by_parent_[it->second].push_back(a);
    }
  }
}

std::optional<std::size_t> GraphStructure::find_node(const NodeId& id) const {
  if (auto it = node_lookup_.find(id); it != node_lookup_.end()) return it->second;
  return std::nullopt;
}

std::optional<std::size_t> GraphStructure::find_arc(const HyperArcId& id) const {
  if (auto it = arc_lookup_.find(id); it != arc_lookup_.end()) return it->second;
  return std::nullopt;
}

std::size_t GraphStructure::node_index(const NodeId& id) const {
  if (auto i = find_node(id)) return *i;
  throw NotFound("graph '" + id_.str() + "': unknown node '" + id.str() + "'");
}

std::size_t GraphStructure::arc_index(const HyperArcId& id) const {
  if (auto i = find_arc(id)) return *i;
  throw NotFound("graph '" + id_.str() + "': unknown hyper-arc '" + id.str() + "'");
}

std::vector<std::size_t> GraphStructure::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < nodes_.size(); ++n)
    if (is_leaf(n)) out.push_back(n);
  return out;
}

bool GraphStructure::operator==(const GraphStructure& other) const {
  return id_ == other.id_ && layer_ == other.layer_ && root_ == other.root_ && nodes_ == other.nodes_ &&
         arcs_ == other.arcs_;
}

double expected_duration(const HyperArc& arc) {
  return std::accumulate(arc.actions.begin(), arc.actions.end(), 0.0,
                         [](double acc, const Action& a) { return acc + a.duration.mean; });
}

namespace {

bool non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

void check_action(const HyperArc& arc, const Action& action, std::vector<Violation>& out) {
  const std::string where = "hyper-arc '" + arc.id.str() + "' action '" + action.id.str() + "'";
  if (action.id.empty()) out.push_back({where, "action id empty"});
  if (action.eligible_agents.empty()) out.push_back({where, "eligible-agents empty"});
  if (!non_negative(action.duration.mean)) out.push_back({where, "duration mean < 0"});
  if (!non_negative(action.duration.std_dev)) out.push_back({where, "duration std-dev < 0"});
  if (!(action.failure_probability >= 0.0 && action.failure_probability <= 1.0))
    out.push_back({where, "failure-probability outside [0,1]"});
}

}  // namespace

std::vector<Violation> validate_structure(const GraphStructure& g) {
  std::vector<Violation> out;
  const std::string gname = "graph '" + g.id().str() + "'";
  if (g.id().empty()) out.push_back({gname, "graph id empty"});

  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto& n = g.node(i);
    if (n.id.empty()) out.push_back({gname, "node id empty"});
    if (i > 0 && g.node(i - 1).id == n.id) out.push_back({"node '" + n.id.str() + "'", "duplicate node id"});
  }
  for (std::size_t a = 0; a < g.arc_count(); ++a) {
    const auto& arc = g.arc(a);
    const std::string where = "hyper-arc '" + arc.id.str() + "'";
    if (arc.id.empty()) out.push_back({gname, "hyper-arc id empty"});
    if (a > 0 && g.arc(a - 1).id == arc.id) out.push_back({where, "duplicate hyper-arc id"});
    if (arc.children.empty()) out.push_back({where, "children empty"});
    for (std::size_t k = 0; k < arc.children.size(); ++k)
      if (g.arc_children(a)[k] == GraphStructure::npos)
        out.push_back({where, "unknown child node '" + arc.children[k].str() + "'"});
    if (g.arc_parent(a) == GraphStructure::npos)
      out.push_back({where, "unknown parent node '" + arc.parent.str() + "'"});
    if (std::find(arc.children.begin(), arc.children.end(), arc.parent) != arc.children.end())
      out.push_back({where, "parent ∈ children"});
    if (!non_negative(arc.cost)) out.push_back({where, "cost < 0"});
    std::set<ActionId> seen;
    for (const auto& action : arc.actions) {
      check_action(arc, action, out);
      if (!seen.insert(action.id).second)
        out.push_back({where, "duplicate action id '" + action.id.str() + "'"});
    }
  }

  if (g.root_index() == GraphStructure::npos) {
    out.push_back({gname, "root '" + g.root().str() + "' is not a node"});
    return out;
  }
  if (!g.arcs_with_child(g.root_index()).empty())
    out.push_back({"node '" + g.root().str() + "'", "root is a child of a hyper-arc"});

  // Reachability from the root along child edges.
  std::vector<char> reached(g.node_count(), 0);
  std::vector<std::size_t> stack{g.root_index()};
  reached[g.root_index()] = 1;
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    for (std::size_t a : g.arcs_with_parent(n))
      for (std::size_t c : g.arc_children(a))
        if (c != GraphStructure::npos && !reached[c]) {
          reached[c] = 1;
          stack.push_back(c);
        }
  }
  for (std::size_t n = 0; n < g.node_count(); ++n)
    if (!reached[n]) out.push_back({"node '" + g.node(n).id.str() + "'", "not reachable from root"});

  // Cycle detection: colour DFS over parent -> child edges.
  std::vector<int> colour(g.node_count(), 0);
  bool cyclic = false;
  auto visit = [&](auto&& self, std::size_t n) -> void {
    colour[n] = 1;
    for (std::size_t a : g.arcs_with_parent(n))
      for (std::size_t c : g.arc_children(a)) {
        if (c == GraphStructure::npos || cyclic) continue;
        if (colour[c] == 1) {
          cyclic = true;
          out.push_back({"node '" + g.node(c).id.str() + "'", "cycle through hyper-arc '" + g.arc(a).id.str() + "'"});
        } else if (colour[c] == 0) {
          self(self, c);
        }
      }
    colour[n] = 2;
  };
  for (std::size_t n = 0; n < g.node_count() && !cyclic; ++n)
    if (colour[n] == 0) visit(visit, n);

  return out;
}

}  // namespace hrcplan
