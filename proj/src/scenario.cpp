#include "hrcplan/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "hrcplan/error.hpp"

namespace hrcplan {

bool Scenario::operator==(const Scenario& o) const {
  return name == o.name && description == o.description && agents == o.agents && model == o.model &&
         options == o.options && explicit_costs == o.explicit_costs && items == o.items && gestures == o.gestures &&
         sim == o.sim;
}

namespace {

int line_of(const YAML::Node& n) {
  return n.Mark().line >= 0 ? n.Mark().line + 1 : 0;
}

std::string at_line(const YAML::Node& n) {
  const int line = line_of(n);
  return line > 0 ? " (line " + std::to_string(line) + ")" : std::string{};
}

[[noreturn]] void invalid(const YAML::Node& n, const std::string& msg) {
  throw ValidationError(msg + at_line(n));
}

[[noreturn]] void malformed(const YAML::Node& n, const std::string& msg) {
  throw ParseError(msg, line_of(n));
}

void expect_map(const YAML::Node& n, const std::string& what, std::initializer_list<const char*> keys) {
  if (!n.IsMap()) malformed(n, what + " must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
      malformed(kv.first, what + ": unknown key '" + key + "'");
  }
}

const YAML::Node& expect_seq(const YAML::Node& n, const std::string& what) {
  if (n && !n.IsSequence()) malformed(n, what + " must be a list");
  return n;
}

template <class T>
T get(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    malformed(n, what + " has the wrong type");
  }
}

template <class T>
T required(const YAML::Node& map, const char* key, const std::string& what) {
  const YAML::Node v = map[key];
  if (!v) malformed(map, what + ": missing '" + key + "'");
  return get<T>(v, what + "." + key);
}

template <class T>
T optional_value(const YAML::Node& map, const char* key, const std::string& what, T fallback) {
  const YAML::Node v = map[key];
  return v ? get<T>(v, what + "." + key) : fallback;
}

std::vector<std::string> string_list(const YAML::Node& n, const std::string& what) {
  std::vector<std::string> out;
  if (!n) return out;
  expect_seq(n, what);
  for (const auto& x : n) out.push_back(get<std::string>(x, what));
  return out;
}

double non_negative(const YAML::Node& map, const char* key, const std::string& what, double fallback) {
  const double v = optional_value<double>(map, key, what, fallback);
  if (!(v >= 0.0) || !std::isfinite(v)) invalid(map[key] ? map[key] : map, what + "." + key + " must be a finite number >= 0");
  return v;
}

/// Checks that every tag names an agent id or an agent class.
void check_tags(const Scenario& s, const std::vector<std::string>& tags, const YAML::Node& where, const std::string& what) {
  if (tags.empty()) invalid(where, what + ": eligible agents must not be empty");
  for (const auto& t : tags) {
    const bool known = std::any_of(s.agents.begin(), s.agents.end(),
                                   [&](const AgentSpec& a) { return a.id.str() == t || a.agent_class == t; });
    if (!known) invalid(where, what + ": unknown agent or agent class '" + t + "'");
  }
}

std::shared_ptr<const GraphStructure> parse_graph(Scenario& s, const YAML::Node& g) {
  expect_map(g, "graph", {"id", "layer", "root", "per_item", "selection", "overheads", "initially_met", "nodes", "hyper_arcs"});
  const GraphId id(required<std::string>(g, "id", "graph"));
  const std::string where = "graph '" + id.str() + "'";
  if (id.empty()) invalid(g, "graph id must not be empty");
  const int layer = optional_value<int>(g, "layer", where, 1);
  if (layer < 0) invalid(g["layer"], where + ": layer must be >= 0");

  GraphOptions opt;
  opt.per_item = optional_value<bool>(g, "per_item", where, false);
  if (g["selection"]) {
    try {
      opt.selection = selection_from_string(get<std::string>(g["selection"], where + ".selection"));
    } catch (const ValidationError& e) {
      invalid(g["selection"], e.what());
    }
  }
  if (const auto& o = g["overheads"]) {
    expect_map(o, where + ".overheads", {"representation", "planning", "simulation"});
    opt.overheads.representation = non_negative(o, "representation", where, 0.0);
    opt.overheads.planning = non_negative(o, "planning", where, 0.0);
    opt.overheads.simulation = non_negative(o, "simulation", where, 0.0);
  }

  std::vector<Node> nodes;
  std::map<NodeId, YAML::Node> node_at;
  for (const auto& n : expect_seq(g["nodes"], where + ".nodes")) {
    expect_map(n, where + " node", {"id", "label", "processes"});
    Node node;
    node.id = NodeId(required<std::string>(n, "id", where + " node"));
    if (node.id.empty()) invalid(n, where + ": node id must not be empty");
    node.label = optional_value<std::string>(n, "label", where, node.id.str());
    for (const auto& p : expect_seq(n["processes"], where + " processes")) {
      expect_map(p, where + " process", {"id", "label", "agents", "mean", "std_dev"});
      ProcessSpec spec;
      spec.id = required<std::string>(p, "id", where + " process");
      spec.label = optional_value<std::string>(p, "label", where, spec.id);
      spec.eligible_agents = string_list(p["agents"], where + " process agents");
      check_tags(s, spec.eligible_agents, p, where + " process '" + spec.id + "'");
      spec.duration = {non_negative(p, "mean", where, 0.0), non_negative(p, "std_dev", where, 0.0)};
      node.processes.push_back(std::move(spec));
    }
    if (!node_at.emplace(node.id, static_cast<const YAML::Node&>(n)).second) invalid(n, where + ": duplicate node id '" + node.id.str() + "'");
    nodes.push_back(std::move(node));
  }
  if (nodes.empty()) invalid(g, where + ": graph has no nodes");

  std::vector<HyperArc> arcs;
  std::map<HyperArcId, YAML::Node> arc_at;
  std::set<HyperArcId> arc_ids;
  std::set<ActionId> action_ids;
  for (const auto& h : expect_seq(g["hyper_arcs"], where + ".hyper_arcs")) {
    expect_map(h, where + " hyper-arc", {"id", "children", "parent", "cost", "outcome", "actions"});
    HyperArc arc;
    arc.id = HyperArcId(required<std::string>(h, "id", where + " hyper-arc"));
    const std::string aw = where + " hyper-arc '" + arc.id.str() + "'";
    if (arc.id.empty()) invalid(h, where + ": hyper-arc id must not be empty");
    if (!arc_ids.insert(arc.id).second) invalid(h, where + ": duplicate hyper-arc id '" + arc.id.str() + "'");
    for (const auto& c : string_list(h["children"], aw + " children")) {
      if (!node_at.count(NodeId(c))) invalid(h["children"], aw + ": unknown child node '" + c + "'");
      arc.children.emplace_back(c);
    }
    arc.parent = NodeId(required<std::string>(h, "parent", aw));
    if (!node_at.count(arc.parent)) invalid(h["parent"], aw + ": unknown parent node '" + arc.parent.str() + "'");
    arc.outcome = optional_value<std::string>(h, "outcome", aw, "");
    for (const auto& a : expect_seq(h["actions"], aw + " actions")) {
      expect_map(a, aw + " action", {"id", "label", "agents", "mean", "std_dev", "failure_probability"});
      Action action;
      action.id = ActionId(required<std::string>(a, "id", aw + " action"));
      if (action.id.empty()) invalid(a, aw + ": action id must not be empty");
      if (!action_ids.insert(action.id).second) invalid(a, where + ": duplicate action id '" + action.id.str() + "'");
      action.label = optional_value<std::string>(a, "label", aw, action.id.str());
      action.eligible_agents = string_list(a["agents"], aw + " action agents");
      check_tags(s, action.eligible_agents, a, aw + " action '" + action.id.str() + "'");
      action.duration = {non_negative(a, "mean", aw, 0.0), non_negative(a, "std_dev", aw, 0.0)};
      action.failure_probability = non_negative(a, "failure_probability", aw, 0.0);
      if (action.failure_probability > 1.0) invalid(a["failure_probability"], aw + ": failure_probability must be <= 1");
      arc.actions.push_back(std::move(action));
    }
    if (h["cost"]) {
      arc.cost = non_negative(h, "cost", aw, 0.0);
      s.explicit_costs.insert({id, arc.id});
    } else {
      arc.cost = expected_duration(arc);
    }
    arc_at.emplace(arc.id, static_cast<const YAML::Node&>(h));
    arcs.push_back(std::move(arc));
  }

  const NodeId root(required<std::string>(g, "root", where));
  if (!node_at.count(root)) invalid(g["root"], where + ": unknown root node '" + root.str() + "'");
  auto graph = std::make_shared<GraphStructure>(id, std::move(nodes), std::move(arcs), root, layer);
  if (auto v = validate_structure(*graph); !v.empty()) {
    std::string msg = where + " is invalid:";
    for (const auto& x : v) msg += " [" + x.element + ": " + x.rule + "]";
    // Point at the first offending element when it can be located.
    const std::string& e = v.front().element;
    auto quoted = [&](const char* prefix) -> std::optional<std::string> {
      const std::string p = std::string(prefix) + "'";
      if (e.rfind(p, 0) != 0 || e.size() < p.size() + 1) return std::nullopt;
      return e.substr(p.size(), e.size() - p.size() - 1);
    };
    if (auto a = quoted("hyper-arc "); a && arc_at.count(HyperArcId(*a))) invalid(arc_at.at(HyperArcId(*a)), msg);
    if (auto n = quoted("node "); n && node_at.count(NodeId(*n))) invalid(node_at.at(NodeId(*n)), msg);
    invalid(g, msg);
  }
  for (const auto& n : string_list(g["initially_met"], where + ".initially_met")) {
    const auto i = graph->find_node(NodeId(n));
    if (!i) invalid(g["initially_met"], where + ": unknown initially met node '" + n + "'");
    if (!graph->is_leaf(*i)) invalid(g["initially_met"], where + ": initially met node '" + n + "' is not a leaf");
    opt.initially_met.emplace_back(n);
  }
  s.options[id] = opt;
  return graph;
}

NodeRef parse_ref(const YAML::Node& n, const std::string& what) {
  expect_map(n, what, {"graph", "node"});
  return {GraphId(required<std::string>(n, "graph", what)), NodeId(required<std::string>(n, "node", what))};
}

std::map<NodeId, NodeId> node_map(const YAML::Node& n, const std::string& what) {
  std::map<NodeId, NodeId> out;
  if (!n) return out;
  if (!n.IsMap()) malformed(n, what + " must be a mapping");
  for (const auto& kv : n) out[NodeId(get<std::string>(kv.first, what))] = NodeId(get<std::string>(kv.second, what));
  return out;
}

bool is_per_item(const Scenario& s, const GraphId& g) {
  auto it = s.options.find(g);
  return it != s.options.end() && it->second.per_item;
}

}  // namespace

Scenario load_scenario(const std::string& text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError("malformed document: " + e.msg, e.mark.line + 1);
  }
  if (!doc || !doc.IsMap()) throw ParseError("scenario must be a mapping at the top level", 1);
  expect_map(doc, "scenario", {"schema", "name", "description", "agents", "graphs", "transitions", "entanglements",
                               "termination", "work_items", "gestures", "sim"});
  const auto schema = required<std::string>(doc, "schema", "scenario");
  if (schema != kScenarioSchema)
    invalid(doc["schema"], "unsupported schema '" + schema + "' (expected " + kScenarioSchema + ")");

  Scenario s;
  s.name = optional_value<std::string>(doc, "name", "scenario", "");
  s.description = optional_value<std::string>(doc, "description", "scenario", "");

  for (const auto& a : expect_seq(doc["agents"], "agents")) {
    expect_map(a, "agent", {"id", "class", "gesture_miss_probability"});
    AgentSpec agent;
    agent.id = AgentId(required<std::string>(a, "id", "agent"));
    if (agent.id.empty()) invalid(a, "agent id must not be empty");
    agent.agent_class = required<std::string>(a, "class", "agent '" + agent.id.str() + "'");
    agent.gesture_miss_probability = non_negative(a, "gesture_miss_probability", "agent", 0.0);
    if (agent.gesture_miss_probability > 1.0) invalid(a, "agent '" + agent.id.str() + "': gesture_miss_probability must be <= 1");
    if (std::any_of(s.agents.begin(), s.agents.end(), [&](const AgentSpec& x) { return x.id == agent.id; }))
      invalid(a, "duplicate agent id '" + agent.id.str() + "'");
    s.agents.push_back(std::move(agent));
  }
  if (s.agents.empty()) invalid(doc, "scenario defines no agents");

  std::map<GraphId, YAML::Node> graph_at;
  for (const auto& g : expect_seq(doc["graphs"], "graphs")) {
    auto graph = parse_graph(s, g);
    if (graph_at.count(graph->id())) invalid(g, "duplicate graph id '" + graph->id().str() + "'");
    graph_at[graph->id()] = static_cast<const YAML::Node&>(g);
    s.model.add_graph(graph);
  }
  if (s.model.graph_count() == 0) invalid(doc, "scenario defines no graphs");

  for (const auto& t : expect_seq(doc["transitions"], "transitions")) {
    expect_map(t, "transition", {"graph", "arc", "subgraph", "child_map", "parent_map"});
    const ArcRef arc{GraphId(required<std::string>(t, "graph", "transition")),
                     HyperArcId(required<std::string>(t, "arc", "transition"))};
    const GraphId sub(required<std::string>(t, "subgraph", "transition"));
    if (!s.model.find_graph(arc.graph)) invalid(t["graph"], "transition: unknown graph '" + arc.graph.str() + "'");
    if (!s.model.find_graph(sub)) invalid(t["subgraph"], "transition: unknown subgraph '" + sub.str() + "'");
    if (is_per_item(s, arc.graph) && !is_per_item(s, sub))
      invalid(t, "transition: a per-item graph cannot be backed by a shared subgraph '" + sub.str() + "'");
    try {
      auto w = attach_subgraph(s.model, arc, sub, node_map(t["child_map"], "child_map"), node_map(t["parent_map"], "parent_map"));
      s.warnings.insert(s.warnings.end(), w.begin(), w.end());
    } catch (const Error& e) {
      invalid(t, e.what());
    }
  }

  for (const auto& l : expect_seq(doc["entanglements"], "entanglements")) {
    expect_map(l, "entanglement", {"source", "dependent"});
    const NodeRef src = parse_ref(l["source"], "entanglement source");
    const NodeRef dep = parse_ref(l["dependent"], "entanglement dependent");
    for (const auto* r : {&src, &dep}) {
      auto gi = s.model.find_graph(r->graph);
      if (!gi) invalid(l, "entanglement: unknown graph '" + r->graph.str() + "'");
      if (!s.model.graph(*gi).find_node(r->node))
        invalid(l, "entanglement: unknown node '" + r->graph.str() + "/" + r->node.str() + "'");
    }
    if (is_per_item(s, src.graph) && !is_per_item(s, dep.graph))
      invalid(l, "entanglement: a per-item source cannot feed the shared graph '" + dep.graph.str() + "'");
    const auto& im = s.options[dep.graph].initially_met;
    if (std::find(im.begin(), im.end(), dep.node) != im.end())
      invalid(l, "entanglement: dependent '" + dep.node.str() + "' cannot be initially met");
    try {
      link_entangled(s.model, src, dep);
    } catch (const Error& e) {
      invalid(l, e.what());
    }
  }

  if (const auto& t = doc["termination"]) {
    const GraphId id(get<std::string>(t, "termination"));
    if (!s.model.find_graph(id)) invalid(t, "termination: unknown graph '" + id.str() + "'");
    if (is_per_item(s, id)) invalid(t, "termination graph cannot be per-item");
    s.model.set_termination(id);
  }
  if (auto v = validate_model(s.model); !v.empty()) invalid(doc["graphs"], v.front().element + ": " + v.front().rule);

  std::set<std::string> outcomes;
  std::set<std::string> item_keys;
  bool any_per_item = false;
  for (const auto& g : s.model.graphs()) {
    if (!is_per_item(s, g->id())) continue;
    any_per_item = true;
    for (const auto& h : g->arcs()) {
      if (!h.outcome.empty()) outcomes.insert(h.outcome);
      for (const auto& a : h.actions) item_keys.insert(a.id.str());
    }
    for (const auto& n : g->nodes())
      for (const auto& p : n.processes) item_keys.insert(p.id);
  }
  for (const auto& w : expect_seq(doc["work_items"], "work_items")) {
    expect_map(w, "work item", {"id", "outcome", "durations"});
    WorkItem item;
    item.id = ItemId(required<std::string>(w, "id", "work item"));
    if (item.id.empty()) invalid(w, "work item id must not be empty");
    if (std::any_of(s.items.begin(), s.items.end(), [&](const WorkItem& x) { return x.id == item.id; }))
      invalid(w, "duplicate work item '" + item.id.str() + "'");
    item.outcome = optional_value<std::string>(w, "outcome", "work item", "");
    if (!item.outcome.empty() && !outcomes.count(item.outcome))
      invalid(w["outcome"], "work item '" + item.id.str() + "': no hyper-arc has outcome '" + item.outcome + "'");
    if (const auto& d = w["durations"]) {
      if (!d.IsMap()) malformed(d, "durations must be a mapping");
      for (const auto& kv : d) {
        const auto key = get<std::string>(kv.first, "durations key");
        if (!item_keys.count(key))
          invalid(kv.first, "work item '" + item.id.str() + "': unknown action or process '" + key + "'");
        DurationModel dm;
        if (kv.second.IsMap()) {
          expect_map(kv.second, "duration", {"mean", "std_dev"});
          dm = {non_negative(kv.second, "mean", "duration", 0.0), non_negative(kv.second, "std_dev", "duration", 0.0)};
        } else {
          const double mean = get<double>(kv.second, "duration");
          if (!(mean >= 0.0)) invalid(kv.second, "duration must be >= 0");
          dm = {mean, -1.0};  // spread scaled from the template
        }
        item.durations[key] = dm;
      }
    }
    s.items.push_back(std::move(item));
  }
  if (any_per_item && s.items.empty()) invalid(doc, "per-item graphs need at least one work item");

  if (const auto& g = doc["gestures"]) {
    if (!g.IsMap()) malformed(g, "gestures must be a mapping");
    std::set<ActionId> known;
    for (const auto& gr : s.model.graphs())
      for (const auto& h : gr->arcs())
        for (const auto& a : h.actions) known.insert(a.id);
    for (const auto& kv : g) {
      const auto name = get<std::string>(kv.first, "gesture");
      std::vector<ActionId> actions;
      for (const auto& a : string_list(kv.second, "gesture '" + name + "'")) {
        if (!known.count(ActionId(a))) invalid(kv.second, "gesture '" + name + "': unknown action '" + a + "'");
        actions.emplace_back(a);
      }
      s.gestures[name] = std::move(actions);
    }
  }

  if (const auto& sim = doc["sim"]) {
    expect_map(sim, "sim", {"seed", "max_time", "retry_delay", "repeat_delay", "rehearsal_samples"});
    s.sim.seed = optional_value<std::uint64_t>(sim, "seed", "sim", 0);
    s.sim.max_time = non_negative(sim, "max_time", "sim", s.sim.max_time);
    s.sim.retry_delay = non_negative(sim, "retry_delay", "sim", s.sim.retry_delay);
    s.sim.repeat_delay = non_negative(sim, "repeat_delay", "sim", s.sim.repeat_delay);
    s.sim.rehearsal_samples = optional_value<int>(sim, "rehearsal_samples", "sim", s.sim.rehearsal_samples);
    if (s.sim.rehearsal_samples < 1) invalid(sim["rehearsal_samples"], "sim.rehearsal_samples must be >= 1");
  }

  try {
    auto exec = expand(s);
    if (auto v = validate_execution(exec); !v.empty()) invalid(doc, v.front().element + ": " + v.front().rule);
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    invalid(doc, e.what());
  }
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  if (path == "bundled" || path == "bundled-scenario") return bundled_scenario();
  std::ifstream in(path);
  if (!in) throw NotFound("cannot read scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

namespace {

/// Shortest decimal text that reads back as exactly `x`.
std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

void emit_tags(YAML::Emitter& out, const std::vector<std::string>& tags) {
  out << YAML::Key << "agents" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& t : tags) out << t;
  out << YAML::EndSeq;
}

}  // namespace

std::string serialize(const Scenario& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema" << YAML::Value << kScenarioSchema;
  if (!s.name.empty()) out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << s.name;
  if (!s.description.empty()) out << YAML::Key << "description" << YAML::Value << YAML::DoubleQuoted << s.description;

  out << YAML::Key << "agents" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : s.agents) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << a.id.str() << YAML::Key << "class"
        << YAML::Value << a.agent_class;
    if (a.gesture_miss_probability != 0.0)
      out << YAML::Key << "gesture_miss_probability" << YAML::Value << num(a.gesture_miss_probability);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "graphs" << YAML::Value << YAML::BeginSeq;
  for (const auto& g : s.model.graphs()) {
    const auto& opt = s.options.at(g->id());
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << g->id().str();
    out << YAML::Key << "layer" << YAML::Value << g->layer();
    out << YAML::Key << "root" << YAML::Value << g->root().str();
    if (opt.per_item) out << YAML::Key << "per_item" << YAML::Value << true;
    if (opt.selection != Selection::fifo) out << YAML::Key << "selection" << YAML::Value << to_string(opt.selection);
    if (!(opt.overheads == Overheads{})) {
      out << YAML::Key << "overheads" << YAML::Value << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "representation" << YAML::Value << num(opt.overheads.representation);
      out << YAML::Key << "planning" << YAML::Value << num(opt.overheads.planning);
      out << YAML::Key << "simulation" << YAML::Value << num(opt.overheads.simulation);
      out << YAML::EndMap;
    }
    if (!opt.initially_met.empty()) {
      out << YAML::Key << "initially_met" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& n : opt.initially_met) out << n.str();
      out << YAML::EndSeq;
    }
    out << YAML::Key << "nodes" << YAML::Value << YAML::BeginSeq;
    for (const auto& n : g->nodes()) {
      out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << n.id.str() << YAML::Key << "label" << YAML::Value
          << YAML::DoubleQuoted << n.label;
      if (!n.processes.empty()) {
        out << YAML::Key << "processes" << YAML::Value << YAML::BeginSeq;
        for (const auto& p : n.processes) {
          out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << p.id << YAML::Key << "label"
              << YAML::Value << YAML::DoubleQuoted << p.label;
          emit_tags(out, p.eligible_agents);
          out << YAML::Key << "mean" << YAML::Value << num(p.duration.mean) << YAML::Key << "std_dev" << YAML::Value
              << num(p.duration.std_dev) << YAML::EndMap;
        }
        out << YAML::EndSeq;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "hyper_arcs" << YAML::Value << YAML::BeginSeq;
    for (const auto& h : g->arcs()) {
      out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << h.id.str();
      out << YAML::Key << "children" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& c : h.children) out << c.str();
      out << YAML::EndSeq;
      out << YAML::Key << "parent" << YAML::Value << h.parent.str();
      if (s.explicit_costs.count({g->id(), h.id})) out << YAML::Key << "cost" << YAML::Value << num(h.cost);
      if (!h.outcome.empty()) out << YAML::Key << "outcome" << YAML::Value << YAML::DoubleQuoted << h.outcome;
      if (!h.actions.empty()) {
        out << YAML::Key << "actions" << YAML::Value << YAML::BeginSeq;
        for (const auto& a : h.actions) {
          out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << a.id.str() << YAML::Key << "label"
              << YAML::Value << YAML::DoubleQuoted << a.label;
          emit_tags(out, a.eligible_agents);
          out << YAML::Key << "mean" << YAML::Value << num(a.duration.mean) << YAML::Key << "std_dev" << YAML::Value
              << num(a.duration.std_dev);
          if (a.failure_probability != 0.0)
            out << YAML::Key << "failure_probability" << YAML::Value << num(a.failure_probability);
          out << YAML::EndMap;
        }
        out << YAML::EndSeq;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  if (!s.model.transitions().empty()) {
    out << YAML::Key << "transitions" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : s.model.transitions()) {
      out << YAML::BeginMap << YAML::Key << "graph" << YAML::Value << t.arc.graph.str() << YAML::Key << "arc"
          << YAML::Value << t.arc.arc.str() << YAML::Key << "subgraph" << YAML::Value << t.subgraph.str();
      for (const auto& [key, map] : {std::pair{"child_map", &t.child_map}, std::pair{"parent_map", &t.parent_map}}) {
        out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginMap;
        for (const auto& [from, to] : *map) out << YAML::Key << from.str() << YAML::Value << to.str();
        out << YAML::EndMap;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  if (!s.model.entanglements().empty()) {
    out << YAML::Key << "entanglements" << YAML::Value << YAML::BeginSeq;
    for (const auto& l : s.model.entanglements()) {
      out << YAML::BeginMap;
      for (const auto& [key, ref] : {std::pair{"source", &l.source}, std::pair{"dependent", &l.dependent}})
        out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "graph" << YAML::Value
            << ref->graph.str() << YAML::Key << "node" << YAML::Value << ref->node.str() << YAML::EndMap;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  if (const auto& t = s.model.termination()) out << YAML::Key << "termination" << YAML::Value << t->str();

  if (!s.items.empty()) {
    out << YAML::Key << "work_items" << YAML::Value << YAML::BeginSeq;
    for (const auto& w : s.items) {
      out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << w.id.str();
      if (!w.outcome.empty()) out << YAML::Key << "outcome" << YAML::Value << YAML::DoubleQuoted << w.outcome;
      if (!w.durations.empty()) {
        out << YAML::Key << "durations" << YAML::Value << YAML::Flow << YAML::BeginMap;
        for (const auto& [key, d] : w.durations) {
          out << YAML::Key << key << YAML::Value;
          if (d.std_dev < 0.0) {
            out << num(d.mean);
          } else {
            out << YAML::Flow << YAML::BeginMap << YAML::Key << "mean" << YAML::Value << num(d.mean) << YAML::Key
                << "std_dev" << YAML::Value << num(d.std_dev) << YAML::EndMap;
          }
        }
        out << YAML::EndMap;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  if (!s.gestures.empty()) {
    out << YAML::Key << "gestures" << YAML::Value << YAML::BeginMap;
    for (const auto& [name, actions] : s.gestures) {
      out << YAML::Key << YAML::DoubleQuoted << name << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& a : actions) out << a.str();
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }
  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << static_cast<unsigned long long>(s.sim.seed);
  out << YAML::Key << "max_time" << YAML::Value << num(s.sim.max_time);
  out << YAML::Key << "retry_delay" << YAML::Value << num(s.sim.retry_delay);
  out << YAML::Key << "repeat_delay" << YAML::Value << num(s.sim.repeat_delay);
  out << YAML::Key << "rehearsal_samples" << YAML::Value << s.sim.rehearsal_samples;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

namespace {

DurationModel override_duration(const DurationModel& base, const DurationModel& item) {
  if (item.std_dev >= 0.0) return item;
  const double sd = base.mean > 0.0 ? base.std_dev * item.mean / base.mean : 0.0;
  return {item.mean, sd};
}

std::shared_ptr<const GraphStructure> clone_for_item(const Scenario& s, const GraphStructure& g, const WorkItem& item) {
  auto nodes = g.nodes();
  for (auto& n : nodes)
    for (auto& p : n.processes)
      if (auto it = item.durations.find(p.id); it != item.durations.end()) p.duration = override_duration(p.duration, it->second);
  auto arcs = g.arcs();
  for (auto& h : arcs) {
    for (auto& a : h.actions)
      if (auto it = item.durations.find(a.id.str()); it != item.durations.end())
        a.duration = override_duration(a.duration, it->second);
    if (!s.explicit_costs.count({g.id(), h.id})) h.cost = expected_duration(h);
  }
  return std::make_shared<GraphStructure>(GraphId(g.id().str() + "@" + item.id.str()), std::move(nodes), std::move(arcs),
                                          g.root(), g.layer());
}

GraphId instance_id(const GraphId& g, const WorkItem& item) {
  return GraphId(g.str() + "@" + item.id.str());
}

NodeId scoped_id(const NodeId& n, const WorkItem& item) {
  return NodeId(n.str() + "@" + item.id.str());
}

}  // namespace

ExecutionModel expand(const Scenario& s) {
  ExecutionModel exec;
  exec.agents = s.agents;
  exec.gestures = s.gestures;
  const auto per = [&](const GraphId& g) { return is_per_item(s, g); };

  // Nodes of shared graphs tied to a per-item subgraph are cloned per item.
  std::map<GraphId, std::set<NodeId>> scoped;
  std::map<GraphId, std::set<HyperArcId>> backed_per_item;
  for (const auto& t : s.model.transitions()) {
    if (per(t.arc.graph) || !per(t.subgraph)) continue;
    const auto& g = s.model.graph(s.model.graph_index(t.arc.graph));
    const auto& h = g.arc(g.arc_index(t.arc.arc));
    backed_per_item[g.id()].insert(h.id);
    scoped[g.id()].insert(h.children.begin(), h.children.end());
    scoped[g.id()].insert(h.parent);
  }

  for (const auto& gp : s.model.graphs()) {
    const auto& g = *gp;
    const auto& opt = s.options.at(g.id());
    PlannerGroup group;
    group.name = g.id().str();
    group.selection = opt.selection;
    group.overheads = opt.overheads;
    if (opt.per_item) {
      for (const auto& item : s.items) {
        auto clone = clone_for_item(s, g, item);
        group.instances.push_back(exec.model.graph_count());
        group.items.push_back(item.id);
        if (!opt.initially_met.empty()) exec.initially_met[clone->id()] = opt.initially_met;
        if (!item.outcome.empty()) exec.outcomes[clone->id()] = item.outcome;
        exec.model.add_graph(clone);
      }
    } else {
      const auto& sc = scoped[g.id()];
      const auto& bk = backed_per_item[g.id()];
      std::vector<Node> nodes;
      for (const auto& n : g.nodes()) {
        if (!sc.count(n.id)) {
          nodes.push_back(n);
          continue;
        }
        for (const auto& item : s.items) {
          Node c = n;
          c.id = scoped_id(n.id, item);
          nodes.push_back(std::move(c));
        }
      }
      if (sc.count(g.root())) throw ValidationError("graph '" + g.id().str() + "': root cannot be tied to per-item subgraphs");
      std::vector<HyperArc> arcs;
      for (const auto& h : g.arcs()) {
        if (bk.count(h.id)) {
          for (const auto& item : s.items) {
            HyperArc c = h;
            c.id = HyperArcId(h.id.str() + "@" + item.id.str());
            for (auto& child : c.children) child = scoped_id(child, item);
            c.parent = scoped_id(h.parent, item);
            arcs.push_back(std::move(c));
          }
          continue;
        }
        if (sc.count(h.parent))
          throw ValidationError("graph '" + g.id().str() + "': hyper-arc '" + h.id.str() +
                                "' leads into a node tied to per-item subgraphs");
        HyperArc c = h;
        c.children.clear();
        for (const auto& child : h.children) {
          if (!sc.count(child)) {
            c.children.push_back(child);
            continue;
          }
          for (const auto& item : s.items) c.children.push_back(scoped_id(child, item));
        }
        arcs.push_back(std::move(c));
      }
      std::vector<NodeId> met;
      for (const auto& n : opt.initially_met) {
        if (!sc.count(n)) {
          met.push_back(n);
          continue;
        }
        for (const auto& item : s.items) met.push_back(scoped_id(n, item));
      }
      auto graph = std::make_shared<GraphStructure>(g.id(), std::move(nodes), std::move(arcs), g.root(), g.layer());
      group.instances.push_back(exec.model.graph_count());
      group.items.push_back(ItemId{});
      if (!met.empty()) exec.initially_met[g.id()] = met;
      exec.model.add_graph(graph);
    }
    exec.groups.push_back(std::move(group));
  }

  for (const auto& t : s.model.transitions()) {
    if (per(t.subgraph) && per(t.arc.graph)) {
      for (const auto& item : s.items)
        attach_subgraph(exec.model, {instance_id(t.arc.graph, item), t.arc.arc}, instance_id(t.subgraph, item),
                        t.child_map, t.parent_map);
    } else if (per(t.subgraph)) {
      for (const auto& item : s.items) {
        std::map<NodeId, NodeId> cm, pm;
        for (const auto& [from, to] : t.child_map) cm[scoped_id(from, item)] = to;
        for (const auto& [from, to] : t.parent_map) pm[scoped_id(from, item)] = to;
        attach_subgraph(exec.model, {t.arc.graph, HyperArcId(t.arc.arc.str() + "@" + item.id.str())},
                        instance_id(t.subgraph, item), cm, pm);
      }
    } else {
      attach_subgraph(exec.model, t.arc, t.subgraph, t.child_map, t.parent_map);
    }
  }
  for (const auto& l : s.model.entanglements()) {
    const bool ps = per(l.source.graph);
    const bool pd = per(l.dependent.graph);
    if (!pd) {
      link_entangled(exec.model, l.source, l.dependent);
      continue;
    }
    for (const auto& item : s.items) {
      const NodeRef src = ps ? NodeRef{instance_id(l.source.graph, item), l.source.node} : l.source;
      link_entangled(exec.model, src, {instance_id(l.dependent.graph, item), l.dependent.node});
    }
  }
  if (const auto& t = s.model.termination()) exec.model.set_termination(*t);
  return exec;
}

SimConfig sim_config(const Scenario& s) {
  SimConfig c;
  c.seed = s.sim.seed;
  c.max_time = s.sim.max_time;
  c.retry_delay = s.sim.retry_delay;
  c.repeat_delay = s.sim.repeat_delay;
  c.rehearsal_samples = s.sim.rehearsal_samples;
  return c;
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string export_graph(const ConcurrentModel& model, const GraphId& graph) {
  const auto& g = model.graph(model.graph_index(graph));
  std::set<NodeId> entangled;
  for (const auto& l : model.entanglements()) {
    if (l.source.graph == graph) entangled.insert(l.source.node);
    if (l.dependent.graph == graph) entangled.insert(l.dependent.node);
  }
  std::ostringstream os;
  os << "digraph " << quote(graph.str()) << " {\n";
  os << "  rankdir=BT;\n";
  os << "  node [shape=ellipse];\n";
  for (const auto& n : g.nodes()) {
    os << "  " << quote("n:" + n.id.str()) << " [label=" << quote(n.label);
    if (n.id == g.root()) os << ", peripheries=2";
    if (entangled.count(n.id)) os << ", color=red, fontcolor=red";
    os << "];\n";
  }
  for (const auto& h : g.arcs()) {
    const std::string j = "h:" + h.id.str();
    std::string label = h.id.str();
    if (const auto* t = model.transition_for({graph, h.id})) label += " => " + t->subgraph.str();
    os << "  " << quote(j) << " [shape=point, width=0.08, xlabel=" << quote(label) << "];\n";
    for (const auto& c : h.children) os << "  " << quote("n:" + c.str()) << " -> " << quote(j) << " [arrowhead=none];\n";
    std::string actions;
    for (const auto& a : h.actions) actions += (actions.empty() ? "" : ", ") + a.label;
    os << "  " << quote(j) << " -> " << quote("n:" + h.parent.str());
    if (!actions.empty()) os << " [label=" << quote(actions) << "]";
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

Scenario bundled_scenario() {
  return load_scenario(bundled_scenario_text());
}

}  // namespace hrcplan
