#include "hrcplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hrcplan/error.hpp"

namespace hrcplan {

bool CooperationPath::contains(const HyperArcId& arc) const {
  return std::binary_search(arcs.begin(), arcs.end(), arc);
}

const char* to_string(Event::Kind k) noexcept {
  switch (k) {
    case Event::Kind::node_met: return "node-met";
    case Event::Kind::action_done: return "action-done";
    case Event::Kind::action_failed: return "action-failed";
    case Event::Kind::override_action: return "override";
    case Event::Kind::arc_solved: return "arc-solved";
  }
  return "node-met";
}

namespace {

constexpr int kUndecided = -1;
constexpr int kReached = -2;

/// Backtracking over one arc choice per unmet node, from the root downwards.
class PathSearch {
public:
  PathSearch(const EpisodeState& s, const ArcCost& cost) : s_(s), g_(s.structure()), cost_(cost) {
    allowed_.assign(g_.arc_count(), false);
    costs_.assign(g_.arc_count(), 0.0);
    for (std::size_t a = 0; a < g_.arc_count(); ++a) {
      if (s_.solved[a] || s_.suppressed[a] || preempted(a)) continue;
      costs_[a] = cost_ ? cost_(a) : g_.arc(a).cost;
      allowed_[a] = std::isfinite(costs_[a]);
    }
    choice_.assign(g_.node_count(), kUndecided);
    child_use_.assign(g_.node_count(), 0);
  }

  std::vector<CooperationPath> run() {
    if (s_.status != EpisodeStatus::in_progress) return {};
    std::vector<std::size_t> pending{g_.root_index()};
    expand(pending);
    std::sort(out_.begin(), out_.end(), [](const CooperationPath& a, const CooperationPath& b) {
      if (a.total_cost != b.total_cost) return a.total_cost < b.total_cost;
      return a.arcs < b.arcs;
    });
    return std::move(out_);
  }

private:
  // A rival with actions already done pre-empts arcs sharing a child or the parent.
  bool preempted(std::size_t a) const {
    for (std::size_t b = 0; b < g_.arc_count(); ++b) {
      if (b == a || s_.done_actions[b] == 0 || s_.solved[b] || s_.suppressed[b]) continue;
      if (g_.arc_parent(a) == g_.arc_parent(b)) return true;
      for (std::size_t c : g_.arc_children(a)) {
        const auto& bc = g_.arc_children(b);
        if (std::find(bc.begin(), bc.end(), c) != bc.end()) return true;
      }
    }
    return false;
  }

  void expand(std::vector<std::size_t>& pending) {
    if (pending.empty()) {
      record();
      return;
    }
    const std::size_t n = pending.back();
    pending.pop_back();
    if (choice_[n] != kUndecided) {
      expand(pending);
    } else if (s_.met[n] || s_.node_feasible[n]) {
      choice_[n] = kReached;
      expand(pending);
      choice_[n] = kUndecided;
    } else if (!g_.is_leaf(n)) {
      for (std::size_t a : g_.arcs_with_parent(n)) {
        if (!allowed_[a]) continue;
        // Two chosen arcs sharing a child cannot both be solved.
        const auto& children = g_.arc_children(a);
        if (std::any_of(children.begin(), children.end(), [&](std::size_t c) { return child_use_[c] > 0; })) continue;
        choice_[n] = static_cast<int>(a);
        const std::size_t mark = pending.size();
        for (std::size_t c : children) {
          ++child_use_[c];
          pending.push_back(c);
        }
        expand(pending);
        for (std::size_t c : children) --child_use_[c];
        pending.resize(mark);
      }
      choice_[n] = kUndecided;
    }
    pending.push_back(n);
  }

  void record() {
    CooperationPath path;
    path.graph = g_.id();
    for (std::size_t n = 0; n < g_.node_count(); ++n) {
      if (choice_[n] < 0) continue;
      const auto a = static_cast<std::size_t>(choice_[n]);
      path.arcs.push_back(g_.arc(a).id);
      path.total_cost += costs_[a];
    }
    std::sort(path.arcs.begin(), path.arcs.end());
    out_.push_back(std::move(path));
  }

  const EpisodeState& s_;
  const GraphStructure& g_;
  const ArcCost& cost_;
  std::vector<bool> allowed_;
  std::vector<double> costs_;
  std::vector<int> choice_;
  std::vector<int> child_use_;
  std::vector<CooperationPath> out_;
};

std::string describe(const CooperationPath& p) {
  std::ostringstream os;
  os << p.graph.str() << ":{";
  for (std::size_t i = 0; i < p.arcs.size(); ++i) os << (i ? "," : "") << p.arcs[i].str();
  os << "}";
  return os.str();
}

}  // namespace

std::vector<CooperationPath> enumerate_paths(const EpisodeState& state, const ArcCost& cost) {
  return PathSearch(state, cost).run();
}

CooperationPath best_path(const EpisodeState& state, const ArcCost& cost) {
  auto paths = enumerate_paths(state, cost);
  if (paths.empty())
    throw Error(ErrorKind::runtime, "no-path: graph '" + state.structure().id().str() + "' is " +
                                        to_string(state.status) + " and has no cooperation path");
  return std::move(paths.front());
}

ArcCost model_arc_cost(const ConcurrentModel& model, const ModelState& state, std::size_t graph_index) {
  return [&model, &state, graph_index](std::size_t a) -> double {
    const auto& g = model.graph(graph_index);
    const auto* t = model.transition_for({g.id(), g.arc(a).id});
    if (!t) return g.arc(a).cost;
    const std::size_t sub = model.graph_index(t->subgraph);
    const auto& ep = state.episodes.at(sub);
    if (ep.status == EpisodeStatus::solved) return 0.0;
    auto paths = enumerate_paths(ep, model_arc_cost(model, state, sub));
    return paths.empty() ? std::numeric_limits<double>::infinity() : paths.front().total_cost;
  };
}

std::optional<AgentId> allocate_action(const Action& action, const std::vector<AgentSpec>& idle_agents,
                                       const DurationEstimate& estimate) {
  std::optional<AgentId> best;
  double best_time = std::numeric_limits<double>::infinity();
  for (const auto& agent : idle_agents) {
    if (!is_eligible(agent, action.eligible_agents)) continue;
    const double t = estimate ? estimate(agent, action) : action.duration.mean;
    if (!best || t < best_time || (t == best_time && agent.id < *best)) {
      best = agent.id;
      best_time = t;
    }
  }
  return best;
}

std::vector<Suggestion> next_suggestions(const ConcurrentModel& model, const ModelState& state,
                                         const PlannerContext& ctx) {
  struct Candidate {
    std::size_t graph;
    std::size_t arc;
    std::string rationale;
  };
  std::vector<Candidate> candidates;
  for (std::size_t gi = 0; gi < model.graph_count(); ++gi) {
    if (!ctx.enabled.empty() && !ctx.enabled.at(gi)) continue;
    const auto& ep = state.episodes.at(gi);
    if (ep.status != EpisodeStatus::in_progress) continue;
    auto paths = enumerate_paths(ep, model_arc_cost(model, state, gi));
    if (paths.empty()) continue;
    const auto& path = paths.front();
    const auto& g = model.graph(gi);
    for (std::size_t i = 0; i < path.arcs.size(); ++i) {
      const std::size_t a = g.arc_index(path.arcs[i]);
      if (!ep.arc_feasible[a] || ep.backed[a]) continue;
      if (ep.done_actions[a] >= g.arc(a).actions.size()) continue;
      if (ctx.in_flight.count({g.id(), g.arc(a).id})) continue;
      std::ostringstream why;
      why << "best path " << describe(path) << " cost " << path.total_cost << "; arc " << path.arcs[i].str()
          << " action " << (ep.done_actions[a] + 1) << "/" << g.arc(a).actions.size();
      candidates.push_back({gi, a, why.str()});
    }
  }

  std::vector<AgentSpec> idle;
  for (const auto& agent : ctx.agents)
    if (!ctx.busy.count(agent.id)) idle.push_back(agent);

  std::vector<Suggestion> out;
  for (const auto& c : candidates) {
    const auto& g = model.graph(c.graph);
    const auto& ep = state.episodes[c.graph];
    const auto& action = g.arc(c.arc).actions[ep.done_actions[c.arc]];
    auto agent = allocate_action(action, idle, ctx.estimate);
    if (!agent) continue;
    const auto it = std::find_if(idle.begin(), idle.end(), [&](const AgentSpec& a) { return a.id == *agent; });
    const double estimate = ctx.estimate ? ctx.estimate(*it, action) : action.duration.mean;
    idle.erase(it);
    out.push_back({*agent, g.id(), g.arc(c.arc).id, action.id, c.rationale, estimate});
  }
  return out;
}

ItemId select_target(const std::vector<ItemId>& candidates, const std::function<double(const ItemId&)>& rehearse) {
  if (candidates.empty()) throw std::invalid_argument("select_target: no candidates");
  std::optional<ItemId> best;
  double best_time = std::numeric_limits<double>::infinity();
  for (const auto& item : candidates) {
    const double t = rehearse(item);
    if (!best || t < best_time || (t == best_time && item < *best)) {
      best = item;
      best_time = t;
    }
  }
  return *best;
}

void Planner::refresh(const ModelState& state) {
  paths_.clear();
  for (std::size_t gi = 0; gi < model_->graph_count(); ++gi) {
    auto paths = enumerate_paths(state.episodes.at(gi), model_arc_cost(*model_, state, gi));
    if (!paths.empty()) paths_.emplace(model_->graph(gi).id(), std::move(paths.front()));
  }
}

EventOutcome Planner::handle_event(ModelState& state, const Event& event, const PlannerContext& ctx) {
  const AgentSpec* agent = nullptr;
  if (!event.agent.empty()) {
    for (const auto& a : ctx.agents)
      if (a.id == event.agent) agent = &a;
    if (!agent) throw NotFound("unknown agent '" + event.agent.str() + "'");
  } else if (event.kind == Event::Kind::override_action) {
    throw ProtocolViolation("override requires an agent");
  }

  bool off_path = false;
  EventOutcome outcome;
  if (event.kind == Event::Kind::node_met) {
    outcome.changes = apply_meet(*model_, state, {event.graph, event.node});
  } else {
    const auto& ep = state.at(*model_, event.graph);
    const auto& g = ep.structure();
    const std::size_t a = g.arc_index(event.arc);
    const std::string where = "hyper-arc '" + event.graph.str() + "/" + event.arc.str() + "'";
    if (ep.suppressed[a]) throw ProtocolViolation(where + " is suppressed");
    if (!ep.arc_feasible[a]) throw ProtocolViolation(where + " is not feasible");
    if (auto it = paths_.find(event.graph); it == paths_.end() || !it->second.contains(event.arc)) off_path = true;

    if (event.kind == Event::Kind::arc_solved) {
      outcome.changes = apply_solve(*model_, state, {event.graph, event.arc});
    } else {
      const auto& actions = g.arc(a).actions;
      const auto it = std::find_if(actions.begin(), actions.end(), [&](const Action& x) { return x.id == event.action; });
      if (it == actions.end()) throw NotFound(where + " has no action '" + event.action.str() + "'");
      if (agent && !is_eligible(*agent, it->eligible_agents))
        throw ProtocolViolation("agent '" + agent->id.str() + "' is not eligible for action '" + event.action.str() + "'");
      if (event.kind == Event::Kind::action_failed) {
        if (static_cast<std::size_t>(it - actions.begin()) != ep.done_actions[a])
          throw ProtocolViolation("action '" + event.action.str() + "' is not the next action of " + where);
      } else {
        outcome.changes = apply_action_done(*model_, state, {event.graph, event.arc}, event.action);
      }
    }
  }

  const auto previous = paths_;
  refresh(state);
  if (off_path) {
    auto before = previous.find(event.graph);
    auto after = paths_.find(event.graph);
    const bool changed = before == previous.end() || after == paths_.end() || !(before->second == after->second);
    if (changed) outcome.replanned.push_back(event.graph);
  }
  outcome.suggestions = next_suggestions(*model_, state, ctx);
  return outcome;
}

std::vector<Event> settle(const ConcurrentModel& model, ModelState& state, std::vector<Change>* changes) {
  auto keep = [changes](std::vector<Change> c) {
    if (changes) changes->insert(changes->end(), c.begin(), c.end());
  };
  std::vector<Event> issued;
  for (bool progress = true; progress;) {
    progress = false;
    for (std::size_t gi = 0; gi < model.graph_count() && !progress; ++gi) {
      const auto& ep = state.episodes[gi];
      if (ep.status != EpisodeStatus::in_progress) continue;
      const auto& g = model.graph(gi);
      for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (ep.node_feasible[n] && !g.is_leaf(n)) {
          issued.push_back(Event::met(g.id(), g.node(n).id));
          keep(apply_meet(model, state, {g.id(), g.node(n).id}));
          progress = true;
          break;
        }
      }
      if (progress) break;
      auto paths = enumerate_paths(ep, model_arc_cost(model, state, gi));
      if (paths.empty()) continue;
      for (const auto& arc : paths.front().arcs) {
        const std::size_t a = g.arc_index(arc);
        if (ep.arc_feasible[a] && !ep.backed[a] && g.arc(a).actions.empty()) {
          issued.push_back(Event::solve(g.id(), arc));
          keep(apply_solve(model, state, {g.id(), arc}));
          progress = true;
          break;
        }
      }
    }
  }
  return issued;
}

}  // namespace hrcplan
