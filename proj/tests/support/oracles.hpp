#pragma once

// Random model generators and from-scratch oracles shared by the unit tests
// and the acceptance runner. Oracles deliberately avoid the incremental code
// paths they check.

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hrcplan/episode.hpp"
#include "hrcplan/error.hpp"
#include "hrcplan/graph.hpp"
#include "hrcplan/hierarchy.hpp"
#include "hrcplan/planner.hpp"

namespace hrcplan::oracle {

inline std::string padded(const char* prefix, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%02zu", prefix, i);
  return buf;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Random valid DAG: node i's arcs take children below i, the root is the
/// highest node, every node reaches the root. At least `min_leaves` leaves.
inline std::shared_ptr<const GraphStructure> random_graph(std::mt19937_64& rng, const std::string& id, int layer = 1,
                                                          std::size_t max_nodes = 12, std::size_t max_arcs = 8,
                                                          std::size_t min_leaves = 1) {
  for (;;) {
    const std::size_t n = 2 + pick(rng, max_nodes - 1);
    const std::size_t m = 1 + pick(rng, max_arcs);
    std::vector<std::size_t> parent(m);
    std::vector<std::set<std::size_t>> children(m);
    parent[0] = n - 1;
    for (std::size_t a = 1; a < m; ++a) parent[a] = 1 + pick(rng, n - 1);
    for (std::size_t k = n - 1; k-- > 0;) {
      std::vector<std::size_t> over;
      for (std::size_t a = 0; a < m; ++a)
        if (parent[a] > k) over.push_back(a);
      children[over[pick(rng, over.size())]].insert(k);
    }
    for (std::size_t a = 0; a < m; ++a) {
      if (children[a].empty() || pick(rng, 10) < 3) children[a].insert(pick(rng, parent[a]));
    }
    std::vector<Node> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back({NodeId{padded("n", i)}, "node " + std::to_string(i), {}});
    std::vector<HyperArc> arcs;
    for (std::size_t a = 0; a < m; ++a) {
      HyperArc h;
      h.id = HyperArcId{padded("h", a)};
      for (std::size_t c : children[a]) h.children.push_back(NodeId{padded("n", c)});
      h.parent = NodeId{padded("n", parent[a])};
      const std::size_t actions = pick(rng, 3);
      for (std::size_t k = 0; k < actions; ++k)
        h.actions.push_back({ActionId{h.id.str() + "a" + std::to_string(k)}, "", {"arm"},
                             {static_cast<double>(1 + pick(rng, 5)), 0.0}, 0.0});
      h.cost = static_cast<double>(1 + pick(rng, 9));
      arcs.push_back(std::move(h));
    }
    auto g = std::make_shared<GraphStructure>(GraphId{id}, nodes, arcs, NodeId{padded("n", n - 1)}, layer);
    if (g->leaves().size() >= min_leaves) return g;
  }
}

struct Step {
  enum class Kind { meet, action, solve } kind;
  std::size_t index;
};

/// Flags recomputed from the event log alone.
inline EpisodeState recompute(std::shared_ptr<const GraphStructure> gp, const std::vector<Step>& log) {
  const auto& g = *gp;
  EpisodeState s;
  s.graph = gp;
  s.met.assign(g.node_count(), false);
  s.node_feasible.assign(g.node_count(), false);
  s.solved.assign(g.arc_count(), false);
  s.suppressed.assign(g.arc_count(), false);
  s.arc_feasible.assign(g.arc_count(), false);
  s.backed.assign(g.arc_count(), false);
  s.done_actions.assign(g.arc_count(), 0);
  for (const auto& st : log) {
    switch (st.kind) {
      case Step::Kind::meet: s.met[st.index] = true; break;
      case Step::Kind::action:
        if (++s.done_actions[st.index] == g.arc(st.index).actions.size()) s.solved[st.index] = true;
        break;
      case Step::Kind::solve: s.solved[st.index] = true; break;
    }
  }
  auto share_child = [&](std::size_t a, std::size_t b) {
    for (const auto& c : g.arc(a).children)
      if (std::find(g.arc(b).children.begin(), g.arc(b).children.end(), c) != g.arc(b).children.end()) return true;
    return false;
  };
  for (std::size_t a = 0; a < g.arc_count(); ++a)
    for (std::size_t b = 0; b < g.arc_count(); ++b)
      if (b != a && s.solved[b] && !s.solved[a] && share_child(a, b)) s.suppressed[a] = true;
  bool any = false;
  for (std::size_t a = 0; a < g.arc_count(); ++a) {
    bool all = true;
    for (const auto& c : g.arc(a).children) all = all && s.met[g.node_index(c)];
    s.arc_feasible[a] = all && !s.solved[a] && !s.suppressed[a];
    any = any || s.arc_feasible[a];
  }
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    bool has_in = false, solved_in = false;
    for (std::size_t a = 0; a < g.arc_count(); ++a) {
      if (g.arc(a).parent != g.node(n).id) continue;
      has_in = true;
      solved_in = solved_in || s.solved[a];
    }
    s.node_feasible[n] = !s.met[n] && (!has_in || solved_in);
    any = any || s.node_feasible[n];
  }
  if (s.met[g.root_index()]) s.status = EpisodeStatus::solved;
  else if (!any) s.status = EpisodeStatus::failed;
  return s;
}

/// Applies a random legal event; returns false when nothing is feasible.
inline bool random_legal_step(std::mt19937_64& rng, EpisodeState& s, std::vector<Step>& log) {
  const auto& g = s.structure();
  std::vector<Step> options;
  if (s.status != EpisodeStatus::in_progress) return false;
  for (std::size_t n = 0; n < g.node_count(); ++n)
    if (s.node_feasible[n]) options.push_back({Step::Kind::meet, n});
  for (std::size_t a = 0; a < g.arc_count(); ++a)
    if (s.arc_feasible[a]) options.push_back({g.arc(a).actions.empty() ? Step::Kind::solve : Step::Kind::action, a});
  if (options.empty()) return false;
  const Step st = options[pick(rng, options.size())];
  switch (st.kind) {
    case Step::Kind::meet: meet_node(s, g.node(st.index).id); break;
    case Step::Kind::action: {
      const auto& h = g.arc(st.index);
      record_action_done(s, h.id, h.actions[s.done_actions[st.index]].id);
      break;
    }
    case Step::Kind::solve: solve_hyper_arc(s, g.arc(st.index).id); break;
  }
  log.push_back(st);
  return true;
}

/// Tries a random event that the oracle says is illegal. Returns true when
/// one was attempted; the episode must reject it.
inline bool random_illegal_step(std::mt19937_64& rng, EpisodeState& s) {
  const auto& g = s.structure();
  std::vector<std::size_t> nodes, arcs;
  for (std::size_t n = 0; n < g.node_count(); ++n)
    if (!s.node_feasible[n]) nodes.push_back(n);
  for (std::size_t a = 0; a < g.arc_count(); ++a)
    if (!s.arc_feasible[a] && !g.arc(a).actions.empty()) arcs.push_back(a);
  if (nodes.empty() && arcs.empty()) return false;
  const bool node = arcs.empty() || (!nodes.empty() && pick(rng, 2) == 0);
  if (node) {
    meet_node(s, g.node(nodes[pick(rng, nodes.size())]).id);
  } else {
    const auto& h = g.arc(arcs[pick(rng, arcs.size())]);
    const std::size_t k = std::min(s.done_actions[g.arc_index(h.id)], h.actions.size() - 1);
    record_action_done(s, h.id, h.actions[k].id);
  }
  return true;
}

struct PathSet {
  std::set<HyperArcId> arcs;
  double cost = 0.0;
};

/// Every cooperation path by subset enumeration: one chosen arc per required
/// unreached node, no extra arcs, no two chosen arcs sharing a child, only
/// arcs that are not solved, suppressed or pre-empted by a started rival.
inline std::vector<PathSet> brute_force_paths(const EpisodeState& s) {
  const auto& g = s.structure();
  std::vector<PathSet> out;
  if (s.status != EpisodeStatus::in_progress) return out;
  const std::size_t m = g.arc_count();
  auto shares_child = [&](std::size_t a, std::size_t b) {
    for (const auto& c : g.arc(a).children)
      if (std::find(g.arc(b).children.begin(), g.arc(b).children.end(), c) != g.arc(b).children.end()) return true;
    return false;
  };
  std::vector<bool> allowed(m, true);
  for (std::size_t a = 0; a < m; ++a) {
    if (s.solved[a] || s.suppressed[a]) allowed[a] = false;
    for (std::size_t b = 0; b < m; ++b)
      if (b != a && s.done_actions[b] > 0 && !s.solved[b] && !s.suppressed[b] &&
          (g.arc(a).parent == g.arc(b).parent || shares_child(a, b)))
        allowed[a] = false;
  }
  auto reached = [&](std::size_t n) { return s.met[n] || s.node_feasible[n]; };
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    bool ok = true;
    std::vector<std::size_t> into(g.node_count(), GraphStructure::npos);
    for (std::size_t a = 0; a < m && ok; ++a) {
      if (!(mask >> a & 1u)) continue;
      const std::size_t p = g.node_index(g.arc(a).parent);
      if (!allowed[a] || reached(p) || into[p] != GraphStructure::npos) ok = false;
      else into[p] = a;
      for (std::size_t b = 0; b < a && ok; ++b)
        if ((mask >> b & 1u) && shares_child(a, b)) ok = false;
    }
    if (!ok) continue;
    std::vector<bool> required(g.node_count(), false);
    std::vector<std::size_t> stack{g.root_index()};
    while (!stack.empty() && ok) {
      const std::size_t n = stack.back();
      stack.pop_back();
      if (required[n]) continue;
      required[n] = true;
      if (reached(n)) continue;
      if (into[n] == GraphStructure::npos) {
        ok = false;
        break;
      }
      for (const auto& c : g.arc(into[n]).children) stack.push_back(g.node_index(c));
    }
    if (!ok) continue;
    PathSet p;
    for (std::size_t a = 0; a < m && ok; ++a) {
      if (!(mask >> a & 1u)) continue;
      if (!required[g.node_index(g.arc(a).parent)]) ok = false;
      p.arcs.insert(g.arc(a).id);
      p.cost += g.arc(a).cost;
    }
    if (ok) out.push_back(std::move(p));
  }
  return out;
}

/// 2 or 3 random graphs; each later graph gets one or two entangled leaves
/// fed from nodes of earlier graphs.
inline ConcurrentModel random_entangled_model(std::mt19937_64& rng) {
  ConcurrentModel model;
  const std::size_t k = 2 + pick(rng, 2);
  for (std::size_t i = 0; i < k; ++i)
    model.add_graph(random_graph(rng, "g" + std::to_string(i), 1, 8, 6, i == 0 ? 1 : 2));
  for (std::size_t j = 1; j < k; ++j) {
    const auto& dg = model.graph(j);
    auto leaves = dg.leaves();
    std::shuffle(leaves.begin(), leaves.end(), rng);
    const std::size_t links = std::min<std::size_t>(leaves.size(), 1 + pick(rng, 2));
    for (std::size_t l = 0; l < links; ++l) {
      const std::size_t i = pick(rng, j);
      const auto& sg = model.graph(i);
      link_entangled(model, {sg.id(), sg.node(pick(rng, sg.node_count())).id}, {dg.id(), dg.node(leaves[l]).id});
    }
  }
  return model;
}

/// An upper graph (layer 2) with one hyper-arc expanded into a random lower graph.
inline ConcurrentModel random_layered_model(std::mt19937_64& rng) {
  auto upper = random_graph(rng, "upper", 2, 8, 6);
  const std::size_t a = pick(rng, upper->arc_count());
  const auto& h = upper->arc(a);
  auto lower = random_graph(rng, "lower", 1, 10, 7, h.children.size());
  ConcurrentModel model;
  model.add_graph(lower);
  model.add_graph(upper);
  auto leaves = lower->leaves();
  std::shuffle(leaves.begin(), leaves.end(), rng);
  std::map<NodeId, NodeId> child_map;
  for (std::size_t i = 0; i < h.children.size(); ++i) child_map[h.children[i]] = lower->node(leaves[i]).id;
  attach_subgraph(model, {upper->id(), h.id}, lower->id(), child_map, {{h.parent, lower->root()}});
  return model;
}

/// Random legal transaction over the whole model; false when nothing applies.
inline bool random_model_step(std::mt19937_64& rng, const ConcurrentModel& model, ModelState& state) {
  struct Option {
    std::size_t graph;
    bool node;
    std::size_t index;
  };
  std::vector<Option> options;
  for (std::size_t gi = 0; gi < model.graph_count(); ++gi) {
    const auto& ep = state.episodes[gi];
    const auto& g = model.graph(gi);
    if (ep.status != EpisodeStatus::in_progress) continue;
    for (std::size_t n = 0; n < g.node_count(); ++n)
      if (ep.node_feasible[n] && !model.link_into({g.id(), g.node(n).id})) options.push_back({gi, true, n});
    for (std::size_t a = 0; a < g.arc_count(); ++a)
      if (ep.arc_feasible[a] && !ep.backed[a]) options.push_back({gi, false, a});
  }
  if (options.empty()) return false;
  const Option o = options[pick(rng, options.size())];
  const auto& g = model.graph(o.graph);
  if (o.node) {
    apply_meet(model, state, {g.id(), g.node(o.index).id});
  } else {
    const auto& h = g.arc(o.index);
    if (h.actions.empty()) apply_solve(model, state, {g.id(), h.id});
    else apply_action_done(model, state, {g.id(), h.id}, h.actions[state.episodes[o.graph].done_actions[o.index]].id);
  }
  return true;
}

/// Number of links whose ends disagree.
inline std::size_t entanglement_violations(const ConcurrentModel& model, const ModelState& state) {
  std::size_t bad = 0;
  for (const auto& l : model.entanglements()) {
    const auto& s = state.at(model, l.source.graph);
    const auto& d = state.at(model, l.dependent.graph);
    if (s.met[s.graph->node_index(l.source.node)] != d.met[d.graph->node_index(l.dependent.node)]) ++bad;
  }
  return bad;
}

/// Backed arcs not slaved to their subgraph. Suppressed arcs are exempt: they
/// stay unsolved and infeasible whatever the subgraph does.
inline std::size_t hierarchy_violations(const ConcurrentModel& model, const ModelState& state) {
  std::size_t bad = 0;
  for (const auto& t : model.transitions()) {
    const auto& up = state.at(model, t.arc.graph);
    const auto& sub = state.at(model, t.subgraph);
    const std::size_t a = up.graph->arc_index(t.arc.arc);
    if (up.suppressed[a]) continue;
    bool sub_feasible = false;
    if (sub.status == EpisodeStatus::in_progress) {
      for (bool f : sub.node_feasible) sub_feasible = sub_feasible || f;
      for (bool f : sub.arc_feasible) sub_feasible = sub_feasible || f;
    }
    if (up.solved[a] != (sub.status == EpisodeStatus::solved)) ++bad;
    if (up.arc_feasible[a] != sub_feasible) ++bad;
  }
  return bad;
}

}  // namespace hrcplan::oracle
