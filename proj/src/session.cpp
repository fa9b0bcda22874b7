#include "hrcplan/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "hrcplan/error.hpp"

namespace hrcplan {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string str_field(const Json& j, const char* key, bool required = true) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw ParseError(std::string("event field '") + key + "' is required");
    return {};
  }
  if (!it->is_string()) throw ParseError(std::string("event field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

const char* to_string(SessionMode m) noexcept { return m == SessionMode::live ? "live" : "stepped"; }

SessionMode session_mode_from_string(const std::string& s) {
  if (s == "stepped") return SessionMode::stepped;
  if (s == "live") return SessionMode::live;
  throw ValidationError("unknown session mode '" + s + "' (stepped or live)");
}

Json to_json(const LogEntry& e) {
  Json j;
  j["seq"] = e.seq;
  j["kind"] = e.kind;
  j["t"] = e.time;
  j["payload"] = e.payload;
  j["accepted"] = e.accepted;
  if (!e.reason.empty()) j["reason"] = e.reason;
  return j;
}

Json to_json(const Suggestion& s) {
  Json j;
  j["agent"] = s.agent.str();
  j["graph"] = s.graph.str();
  j["arc"] = s.arc.str();
  j["action"] = s.action.str();
  j["rationale"] = s.rationale;
  j["estimated_duration"] = s.estimated_duration;
  return j;
}

SimConfig session_sim_config(const ExecutionModel& exec, const SessionConfig& config) {
  SimConfig sim = config.sim;
  if (!config.simulate_operator)
    for (const auto& a : exec.agents)
      if (a.human()) sim.external_agents.insert(a.id);
  return sim;
}

Session::Session(std::string id, std::shared_ptr<const ExecutionModel> exec, SessionConfig config)
    : id_(std::move(id)), exec_(exec), config_(std::move(config)), engine_(exec, session_sim_config(*exec, config_)) {
  if (!(config_.speed > 0.0) || !std::isfinite(config_.speed)) throw ValidationError("speed must be positive");
  engine_.start();
  log_fired(0);
}

void Session::append(std::string kind, Json payload, bool accepted, std::string reason) {
  LogEntry e;
  e.seq = log_.size();
  e.kind = std::move(kind);
  e.time = engine_.now();
  e.payload = std::move(payload);
  e.accepted = accepted;
  e.reason = std::move(reason);
  log_.push_back(std::move(e));
}

void Session::log_fired(std::size_t from) {
  const auto& ev = engine_.trace().events;
  for (std::size_t i = from; i < ev.size(); ++i) append("internal", to_json(ev[i]), true, {});
}

Event Session::parse_event(const Json& j) const {
  const std::string type = str_field(j, "type");
  const GraphId graph{str_field(j, "graph")};
  if (type == "node-met") return Event::met(graph, NodeId{str_field(j, "node")});
  const HyperArcId arc{str_field(j, "arc")};
  const ActionId action{str_field(j, "action")};
  const AgentId agent{str_field(j, "agent", type == "override")};
  if (type == "action-done") return Event::done(graph, arc, action, agent);
  if (type == "action-failed") return Event::failed(graph, arc, action, agent);
  if (type == "override") return Event::override_by(agent, graph, arc, action);
  throw ParseError("unknown event type '" + type + "'");
}

Event Session::resolve_gesture(const Json& j) const {
  const std::string name = str_field(j, "gesture");
  auto it = exec_->gestures.find(name);
  if (it == exec_->gestures.end()) throw NotFound("unknown gesture '" + name + "'");
  AgentId agent{str_field(j, "agent", false)};
  if (agent.empty()) {
    for (const auto& a : exec_->agents)
      if (a.human()) {
        agent = a.id;
        break;
      }
    if (agent.empty()) throw NotFound("no human operator to attribute gesture '" + name + "' to");
  }
  const AgentSpec* who = exec_->find_agent(agent);
  if (!who) throw NotFound("unknown agent '" + agent.str() + "'");

  // Graphs of idle planner groups are not being worked on; a gesture there is
  // premature even if some arc happens to be feasible.
  const auto active = engine_.active_items();
  auto in_play = [&](std::size_t gi) {
    const std::size_t grp = exec_->group_of(gi);
    if (grp == ExecutionModel::npos) return true;
    const auto& g = exec_->groups[grp];
    const auto pos = std::find(g.instances.begin(), g.instances.end(), gi) - g.instances.begin();
    auto a = active.find(g.name);
    return a != active.end() && !a->second.empty() && a->second == g.items[static_cast<std::size_t>(pos)];
  };

  struct Candidate {
    GraphId graph;
    HyperArcId arc;
    ActionId action;
  };
  std::vector<Candidate> found;
  const auto& state = engine_.state();
  for (std::size_t gi = 0; gi < exec_->model.graph_count(); ++gi) {
    const auto& ep = state.episodes[gi];
    if (ep.status != EpisodeStatus::in_progress || !in_play(gi)) continue;
    const auto& g = exec_->model.graph(gi);
    for (std::size_t a = 0; a < g.arc_count(); ++a) {
      if (!ep.arc_feasible[a] || ep.backed[a]) continue;
      const auto& h = g.arc(a);
      if (ep.done_actions[a] >= h.actions.size()) continue;
      const auto& next = h.actions[ep.done_actions[a]];
      if (std::find(it->second.begin(), it->second.end(), next.id) == it->second.end()) continue;
      if (!is_eligible(*who, next.eligible_agents)) continue;
      found.push_back({g.id(), h.id, next.id});
    }
  }
  if (found.size() > 1) {
    // Prefer what the planner asked the operator to do.
    std::vector<Candidate> asked;
    for (const auto& c : found)
      for (const auto& s : engine_.pending_suggestions())
        if (s.graph == c.graph && s.arc == c.arc && s.action == c.action) asked.push_back(c);
    if (asked.size() == 1) found = asked;
  }
  if (found.empty()) throw ProtocolViolation("gesture '" + name + "' matches no feasible action");
  if (found.size() > 1)
    throw ProtocolViolation("gesture '" + name + "' is ambiguous: " + found[0].graph.str() + "/" + found[0].arc.str() +
                            " and " + found[1].graph.str() + "/" + found[1].arc.str());
  return Event::done(found[0].graph, found[0].arc, found[0].action, agent);
}

SubmitResult Session::submit(const Json& event) { return apply_event(event); }

SubmitResult Session::apply_event(const Json& event) {
  SubmitResult r;
  const std::string kind = event.is_object() && event.value("type", "") == "gesture" ? "gesture" : "event";
  const std::size_t mark = engine_.trace().events.size();
  std::string client_id;
  try {
    if (!event.is_object()) throw ParseError("event must be an object");
    client_id = str_field(event, "id", false);
    if (!client_id.empty() && applied_ids_.count(client_id))
      throw ProtocolViolation("duplicate event '" + client_id + "' was already applied");
    if (engine_.finished()) throw ProtocolViolation("session already finished");
    if (kind == "gesture" && event.value("missed", false)) {
      append(kind, event, false, "gesture not recognised");
      r.error = "gesture-missed";
      r.reason = "gesture not recognised";
      r.snapshot = snapshot();
      return r;
    }
    const Event e = kind == "gesture" ? resolve_gesture(event) : parse_event(event);
    engine_.submit(e);
    r.accepted = true;
  } catch (const Error& e) {
    r.error = to_string(e.kind());
    r.reason = e.what();
  } catch (const Json::exception& e) {
    r.error = to_string(ErrorKind::parse);
    r.reason = e.what();
  }
  if (r.accepted) {
    if (!client_id.empty()) applied_ids_.insert(client_id);
    append(kind, event, true, {});
    log_fired(mark);
  } else {
    append(kind, event, false, r.reason);
  }
  r.snapshot = snapshot();
  return r;
}

AdvanceResult Session::advance(double by) {
  if (config_.mode == SessionMode::live) throw ProtocolViolation("advance is only available in stepped mode");
  return apply_advance(by);
}

AdvanceResult Session::tick(double wall_seconds) {
  if (wall_seconds < 0.0 || !std::isfinite(wall_seconds))
    throw std::invalid_argument("tick: duration must be a finite non-negative number");
  return apply_advance(wall_seconds * config_.speed);
}

AdvanceResult Session::apply_advance(double by) {
  if (by < 0.0 || !std::isfinite(by)) throw std::invalid_argument("advance: duration must be a finite non-negative number");
  const std::size_t mark = engine_.trace().events.size();
  AdvanceResult r;
  r.fired = engine_.advance(by);
  append("advance", Json{{"by", by}}, true, {});
  log_fired(mark);
  r.snapshot = snapshot();
  return r;
}

Json Session::snapshot() const {
  Json j;
  j["session"] = id_;
  j["seq"] = log_.size();
  j["t"] = engine_.now();
  j["mode"] = to_string(config_.mode);
  const auto& trace = engine_.trace();
  std::string status = "running";
  if (engine_.finished()) status = trace.status;
  else if (!trace.status.empty()) status = trace.status;
  j["status"] = status;

  const auto& model = exec_->model;
  const auto& state = engine_.state();
  const auto active = engine_.active_items();
  Json graphs = Json::array();
  for (std::size_t gi = 0; gi < model.graph_count(); ++gi) {
    const auto& g = model.graph(gi);
    const auto& ep = state.episodes[gi];
    Json gj;
    gj["id"] = g.id().str();
    gj["layer"] = g.layer();
    gj["status"] = to_string(ep.status);
    gj["feasible"] = graph_feasible(ep);
    const std::size_t grp = exec_->group_of(gi);
    if (grp != ExecutionModel::npos) {
      const auto& group = exec_->groups[grp];
      const auto pos = static_cast<std::size_t>(std::find(group.instances.begin(), group.instances.end(), gi) -
                                                group.instances.begin());
      gj["group"] = group.name;
      gj["item"] = group.items[pos].str();
      auto a = active.find(group.name);
      gj["active"] = a != active.end() && !a->second.empty() && a->second == group.items[pos];
    } else {
      gj["active"] = true;
    }
    Json nodes = Json::array();
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      Json nj;
      nj["id"] = g.node(n).id.str();
      nj["label"] = g.node(n).label;
      nj["met"] = static_cast<bool>(ep.met[n]);
      nj["feasible"] = static_cast<bool>(ep.node_feasible[n]);
      if (model.link_into({g.id(), g.node(n).id})) nj["entangled"] = true;
      nodes.push_back(std::move(nj));
    }
    gj["nodes"] = std::move(nodes);
    Json arcs = Json::array();
    for (std::size_t a = 0; a < g.arc_count(); ++a) {
      Json aj;
      aj["id"] = g.arc(a).id.str();
      aj["feasible"] = static_cast<bool>(ep.arc_feasible[a]);
      aj["solved"] = static_cast<bool>(ep.solved[a]);
      aj["suppressed"] = static_cast<bool>(ep.suppressed[a]);
      aj["done_actions"] = ep.done_actions[a];
      aj["actions"] = g.arc(a).actions.size();
      if (ep.backed[a]) aj["subgraph"] = model.transition_for({g.id(), g.arc(a).id})->subgraph.str();
      arcs.push_back(std::move(aj));
    }
    gj["arcs"] = std::move(arcs);
    const auto paths = enumerate_paths(ep, model_arc_cost(model, state, gi));
    if (paths.empty()) {
      gj["best_path"] = nullptr;
    } else {
      Json pj;
      pj["arcs"] = Json::array();
      for (const auto& h : paths.front().arcs) pj["arcs"].push_back(h.str());
      pj["cost"] = paths.front().total_cost;
      gj["best_path"] = std::move(pj);
    }
    graphs.push_back(std::move(gj));
  }
  j["graphs"] = std::move(graphs);
  Json sugg = Json::array();
  for (const auto& s : engine_.pending_suggestions()) sugg.push_back(to_json(s));
  j["suggestions"] = std::move(sugg);
  Json busy = Json::object();
  for (const auto& [agent, what] : engine_.busy_agents()) busy[agent.str()] = what;
  j["executing"] = std::move(busy);
  Json items = Json::object();
  for (const auto& [group, item] : active) items[group] = item.str();
  j["active_items"] = std::move(items);
  Json hash_src = j;
  hash_src.erase("session");
  hash_src.erase("seq");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(hash_src.dump())));
  j["hash"] = buf;
  return j;
}

std::string Session::state_hash() const { return snapshot()["hash"].get<std::string>(); }

Json Session::envelope(const std::string& kind, Json payload) {
  Json j;
  j["session"] = id_;
  j["seq"] = ++stream_seq_;
  j["kind"] = kind;
  j["payload"] = std::move(payload);
  return j;
}

std::unique_ptr<Session> Session::replay(const std::string& id, std::shared_ptr<const ExecutionModel> exec,
                                         const SessionConfig& config, const std::vector<LogEntry>& log) {
  auto s = std::make_unique<Session>(id, std::move(exec), config);
  for (const auto& e : log) {
    if (e.kind == "advance") s->apply_advance(e.payload.at("by").get<double>());
    else if (e.kind == "event" || e.kind == "gesture") s->apply_event(e.payload);
  }
  return s;
}

}  // namespace hrcplan
