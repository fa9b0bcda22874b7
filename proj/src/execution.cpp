#include "hrcplan/execution.hpp"

#include <algorithm>

#include "hrcplan/error.hpp"

namespace hrcplan {

const char* to_string(Selection s) noexcept {
  return s == Selection::rehearsal ? "rehearsal" : "fifo";
}

Selection selection_from_string(const std::string& s) {
  if (s == "fifo") return Selection::fifo;
  if (s == "rehearsal") return Selection::rehearsal;
  throw ValidationError("unknown selection policy '" + s + "' (expected fifo or rehearsal)");
}

const AgentSpec* ExecutionModel::find_agent(const AgentId& id) const {
  for (const auto& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

bool ExecutionModel::is_gesture_action(const ActionId& action) const {
  for (const auto& [name, actions] : gestures)
    if (std::find(actions.begin(), actions.end(), action) != actions.end()) return true;
  return false;
}

std::vector<NodeId> ExecutionModel::free_leaves(std::size_t graph_index) const {
  const auto& g = model.graph(graph_index);
  std::set<NodeId> mirrored;
  for (const auto& t : model.transitions())
    if (t.arc.graph == g.id())
      for (const auto& [child, leaf] : t.child_map) mirrored.insert(child);
  std::vector<NodeId> out;
  for (std::size_t n : g.leaves()) {
    const auto& id = g.node(n).id;
    if (mirrored.count(id) || model.link_into({g.id(), id})) continue;
    out.push_back(id);
  }
  if (auto it = initially_met.find(g.id()); it != initially_met.end())
    std::erase_if(out, [&](const NodeId& n) {
      return std::find(it->second.begin(), it->second.end(), n) != it->second.end();
    });
  return out;
}

std::size_t ExecutionModel::group_of(std::size_t graph_index) const {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& inst = groups[i].instances;
    if (std::find(inst.begin(), inst.end(), graph_index) != inst.end()) return i;
  }
  return npos;
}

ExecutionModel standalone(const ExecutionModel& exec, std::size_t graph_index) {
  const auto& g = exec.model.graph(graph_index);
  ExecutionModel out;
  out.model.add_graph(std::make_shared<GraphStructure>(g.id(), g.nodes(), g.arcs(), g.root(), 1));
  out.agents = exec.agents;
  PlannerGroup group;
  group.name = g.id().str();
  group.instances = {0};
  group.items = {ItemId{}};
  out.groups.push_back(group);
  if (auto it = exec.initially_met.find(g.id()); it != exec.initially_met.end()) out.initially_met[g.id()] = it->second;
  if (auto it = exec.outcomes.find(g.id()); it != exec.outcomes.end()) out.outcomes[g.id()] = it->second;
  for (const auto& [name, actions] : exec.gestures)
    for (const auto& a : actions)
      for (const auto& h : g.arcs())
        if (std::any_of(h.actions.begin(), h.actions.end(), [&](const Action& x) { return x.id == a; }))
          out.gestures[name].push_back(a);
  return out;
}

std::vector<Violation> validate_execution(const ExecutionModel& exec) {
  std::vector<Violation> out = validate_model(exec.model);
  std::set<AgentId> ids;
  for (const auto& a : exec.agents) {
    if (a.id.empty()) out.push_back({"agent", "empty agent id"});
    if (!ids.insert(a.id).second) out.push_back({"agent '" + a.id.str() + "'", "duplicate agent id"});
    if (a.gesture_miss_probability < 0.0 || a.gesture_miss_probability > 1.0)
      out.push_back({"agent '" + a.id.str() + "'", "gesture-miss probability outside [0,1]"});
  }
  std::set<ActionId> known;
  for (const auto& g : exec.model.graphs()) {
    for (const auto& h : g->arcs())
      for (const auto& a : h.actions) {
        known.insert(a.id);
        const bool someone = std::any_of(exec.agents.begin(), exec.agents.end(),
                                         [&](const AgentSpec& s) { return is_eligible(s, a.eligible_agents); });
        if (!someone)
          out.push_back({"action '" + g->id().str() + "/" + h.id.str() + "/" + a.id.str() + "'",
                         "no agent is eligible"});
      }
    for (const auto& n : g->nodes())
      for (const auto& p : n.processes) {
        const bool someone = std::any_of(exec.agents.begin(), exec.agents.end(),
                                         [&](const AgentSpec& s) { return is_eligible(s, p.eligible_agents); });
        if (!someone)
          out.push_back({"process '" + g->id().str() + "/" + n.id.str() + "/" + p.id + "'", "no agent is eligible"});
      }
  }
  for (const auto& [name, actions] : exec.gestures)
    for (const auto& a : actions)
      if (!known.count(a)) out.push_back({"gesture '" + name + "'", "unknown action '" + a.str() + "'"});
  std::set<std::size_t> owned;
  for (const auto& grp : exec.groups) {
    if (grp.instances.size() != grp.items.size())
      out.push_back({"group '" + grp.name + "'", "instances and items differ in length"});
    for (std::size_t i : grp.instances) {
      if (i >= exec.model.graph_count()) out.push_back({"group '" + grp.name + "'", "unknown graph index"});
      else if (!owned.insert(i).second) out.push_back({"group '" + grp.name + "'", "graph owned by two groups"});
    }
  }
  return out;
}

}  // namespace hrcplan
