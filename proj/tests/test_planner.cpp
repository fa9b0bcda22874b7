#include <cmath>
#include <random>

#include "doctest.h"

#include "hrcplan/error.hpp"
#include "hrcplan/planner.hpp"
#include "support/oracles.hpp"

using namespace hrcplan;

namespace {

Action act(const char* id, const char* who, double mean = 1.0) { return {ActionId{id}, id, {who}, {mean, 0.0}, 0.0}; }

HyperArc arc(const char* id, std::vector<const char*> children, const char* parent, std::vector<Action> actions,
             double cost) {
  HyperArc h;
  h.id = HyperArcId{id};
  for (auto c : children) h.children.push_back(NodeId{c});
  h.parent = NodeId{parent};
  h.actions = std::move(actions);
  h.cost = cost;
  return h;
}

// m from a by hA (cost 2) or hB (cost 5, two actions); r from m by the
// action-free hR.
ConcurrentModel choice_model() {
  ConcurrentModel m;
  m.add_graph(std::make_shared<GraphStructure>(
      GraphId{"g"}, std::vector<Node>{{NodeId{"a"}, "a", {}}, {NodeId{"m"}, "m", {}}, {NodeId{"r"}, "r", {}}},
      std::vector<HyperArc>{arc("hA", {"a"}, "m", {act("fast", "arm")}, 2.0),
                            arc("hB", {"a"}, "m", {act("slow1", "human-operator"), act("slow2", "arm")}, 5.0),
                            arc("hR", {"m"}, "r", {}, 0.0)},
      NodeId{"r"}));
  return m;
}

PlannerContext context() {
  PlannerContext ctx;
  ctx.agents = {{AgentId{"arm1"}, "arm", 0.0}, {AgentId{"op"}, "human-operator", 0.0}};
  return ctx;
}

std::set<std::set<HyperArcId>> as_sets(const std::vector<CooperationPath>& paths) {
  std::set<std::set<HyperArcId>> out;
  for (const auto& p : paths) out.insert({p.arcs.begin(), p.arcs.end()});
  return out;
}

}  // namespace

TEST_CASE("enumerated paths equal exhaustive subset enumeration") {
  std::mt19937_64 rng(77);
  std::size_t states = 0, with_paths = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto g = oracle::random_graph(rng, "p" + std::to_string(trial));
    auto s = init_episode(g);
    std::vector<oracle::Step> log;
    do {
      const auto paths = enumerate_paths(s);
      const auto truth = oracle::brute_force_paths(s);
      std::set<std::set<HyperArcId>> expected;
      double min_cost = INFINITY;
      for (const auto& p : truth) {
        expected.insert(p.arcs);
        min_cost = std::min(min_cost, p.cost);
      }
      REQUIRE(as_sets(paths) == expected);
      REQUIRE(paths.size() == truth.size());
      if (!paths.empty()) {
        ++with_paths;
        CHECK(paths.front().total_cost == min_cost);
        CHECK(best_path(s).total_cost == min_cost);
        for (std::size_t i = 1; i < paths.size(); ++i) CHECK(paths[i - 1].total_cost <= paths[i].total_cost);
      } else {
        CHECK_THROWS_AS(best_path(s), Error);
      }
      ++states;
    } while (oracle::random_legal_step(rng, s, log));
  }
  CHECK(states > 2000);
  CHECK(with_paths > 1000);
}

TEST_CASE("best path prefers the cheaper alternative and breaks ties by arc id") {
  const auto model = choice_model();
  auto state = init_model_state(model);
  auto p = best_path(state.episodes[0]);
  CHECK(p.arcs == std::vector<HyperArcId>{HyperArcId{"hA"}, HyperArcId{"hR"}});
  CHECK(p.total_cost == 2.0);

  auto tie = [](std::size_t a) { return a == 2 ? 0.0 : 3.0; };
  CHECK(best_path(state.episodes[0], tie).arcs.front() == HyperArcId{"hA"});
  auto flipped = [](std::size_t a) { return a == 0 ? 9.0 : 1.0; };
  CHECK(best_path(state.episodes[0], flipped).arcs.front() == HyperArcId{"hB"});
}

TEST_CASE("an arc with progress pre-empts its rivals") {
  const auto model = choice_model();
  auto state = init_model_state(model);
  apply_meet(model, state, {GraphId{"g"}, NodeId{"a"}});
  apply_action_done(model, state, {GraphId{"g"}, HyperArcId{"hB"}}, ActionId{"slow1"});
  const auto paths = enumerate_paths(state.episodes[0]);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].contains(HyperArcId{"hB"}));
}

TEST_CASE("suggestions follow the best path, one per idle agent") {
  const auto model = choice_model();
  auto state = init_model_state(model);
  auto ctx = context();
  CHECK(next_suggestions(model, state, ctx).empty());
  apply_meet(model, state, {GraphId{"g"}, NodeId{"a"}});
  auto s = next_suggestions(model, state, ctx);
  REQUIRE(s.size() == 1);
  CHECK(s[0].agent == AgentId{"arm1"});
  CHECK(s[0].action == ActionId{"fast"});
  CHECK(s[0].rationale.find("hA") != std::string::npos);

  ctx.busy.insert(AgentId{"arm1"});
  CHECK(next_suggestions(model, state, ctx).empty());
  ctx.busy.clear();
  ctx.in_flight.insert({GraphId{"g"}, HyperArcId{"hA"}});
  CHECK(next_suggestions(model, state, ctx).empty());
  ctx.in_flight.clear();
  ctx.enabled = {false};
  CHECK(next_suggestions(model, state, ctx).empty());
}

TEST_CASE("planner events") {
  const auto model = choice_model();
  auto state = init_model_state(model);
  Planner planner(model);
  const auto ctx = context();
  planner.refresh(state);
  planner.handle_event(state, Event::met(GraphId{"g"}, NodeId{"a"}), ctx);

  SUBCASE("override onto the expensive branch replans") {
    auto out = planner.handle_event(state, Event::override_by(AgentId{"op"}, GraphId{"g"}, HyperArcId{"hB"}, ActionId{"slow1"}), ctx);
    CHECK(out.replanned == std::vector<GraphId>{GraphId{"g"}});
    REQUIRE(out.suggestions.size() == 1);
    CHECK(out.suggestions[0].action == ActionId{"slow2"});
    CHECK(planner.current_paths().at(GraphId{"g"}).contains(HyperArcId{"hB"}));
  }
  SUBCASE("failure leaves every flag unchanged") {
    const auto before = state;
    auto out = planner.handle_event(state, Event::failed(GraphId{"g"}, HyperArcId{"hA"}, ActionId{"fast"}, AgentId{"arm1"}), ctx);
    CHECK(state == before);
    CHECK(out.changes.empty());
    CHECK(out.suggestions.size() == 1);
    CHECK_THROWS_AS(planner.handle_event(state, Event::failed(GraphId{"g"}, HyperArcId{"hB"}, ActionId{"slow2"}), ctx),
                    ProtocolViolation);
  }
  SUBCASE("rejections") {
    planner.handle_event(state, Event::done(GraphId{"g"}, HyperArcId{"hA"}, ActionId{"fast"}), ctx);
    const auto before = state;
    CHECK_THROWS_AS(planner.handle_event(state, Event::done(GraphId{"g"}, HyperArcId{"hB"}, ActionId{"slow1"}), ctx),
                    ProtocolViolation);
    CHECK_THROWS_AS(planner.handle_event(state, Event::done(GraphId{"g"}, HyperArcId{"hR"}, ActionId{"x"}, AgentId{"ghost"}), ctx),
                    NotFound);
    CHECK_THROWS_AS(planner.handle_event(state, Event::override_by(AgentId{}, GraphId{"g"}, HyperArcId{"hR"}, ActionId{"x"}), ctx),
                    ProtocolViolation);
    CHECK(state == before);
  }
  SUBCASE("ineligible agent") {
    CHECK_THROWS_AS(
        planner.handle_event(state, Event::override_by(AgentId{"op"}, GraphId{"g"}, HyperArcId{"hA"}, ActionId{"fast"}), ctx),
        ProtocolViolation);
  }
}

TEST_CASE("settle confirms parents and solves action-free arcs") {
  const auto model = choice_model();
  auto state = init_model_state(model);
  apply_meet(model, state, {GraphId{"g"}, NodeId{"a"}});
  apply_action_done(model, state, {GraphId{"g"}, HyperArcId{"hA"}}, ActionId{"fast"});
  std::vector<Change> changes;
  const auto issued = settle(model, state, &changes);
  REQUIRE(issued.size() == 3);
  CHECK(issued[0] == Event::met(GraphId{"g"}, NodeId{"m"}));
  CHECK(issued[1] == Event::solve(GraphId{"g"}, HyperArcId{"hR"}));
  CHECK(issued[2] == Event::met(GraphId{"g"}, NodeId{"r"}));
  CHECK(state.episodes[0].status == EpisodeStatus::solved);
  CHECK(!changes.empty());
  CHECK(settle(model, state).empty());
}

TEST_CASE("allocation and target selection") {
  const std::vector<AgentSpec> idle{{AgentId{"b"}, "arm", 0.0}, {AgentId{"a"}, "arm", 0.0}, {AgentId{"op"}, "human-operator", 0.0}};
  CHECK(allocate_action(act("x", "arm"), idle) == AgentId{"a"});
  CHECK(allocate_action(act("x", "b"), idle) == AgentId{"b"});
  CHECK(!allocate_action(act("x", "mobile-base"), idle));
  auto est = [](const AgentSpec& s, const Action&) { return s.id == AgentId{"b"} ? 1.0 : 2.0; };
  CHECK(allocate_action(act("x", "arm"), idle, est) == AgentId{"b"});

  std::map<std::string, double> t{{"obj1", 80.75}, {"obj2", 84.75}, {"obj3", 58.75}, {"obj4", 58.75}};
  auto rehearse = [&](const ItemId& i) { return t.at(i.str()); };
  CHECK(select_target({ItemId{"obj1"}, ItemId{"obj2"}, ItemId{"obj4"}, ItemId{"obj3"}}, rehearse) == ItemId{"obj3"});
  CHECK_THROWS_AS(select_target({}, rehearse), std::invalid_argument);
}

TEST_CASE("backed arcs cost the subgraph's best path") {
  ConcurrentModel m;
  m.add_graph(std::make_shared<GraphStructure>(
      GraphId{"low"}, std::vector<Node>{{NodeId{"x"}, "x", {}}, {NodeId{"y"}, "y", {}}},
      std::vector<HyperArc>{arc("l1", {"x"}, "y", {act("p", "arm")}, 4.0), arc("l2", {"x"}, "y", {act("q", "arm")}, 7.0)},
      NodeId{"y"}));
  m.add_graph(std::make_shared<GraphStructure>(
      GraphId{"up"}, std::vector<Node>{{NodeId{"s"}, "s", {}}, {NodeId{"t"}, "t", {}}},
      std::vector<HyperArc>{arc("u", {"s"}, "t", {}, 100.0)}, NodeId{"t"}, 2));
  attach_subgraph(m, {GraphId{"up"}, HyperArcId{"u"}}, GraphId{"low"}, {{NodeId{"s"}, NodeId{"x"}}},
                  {{NodeId{"t"}, NodeId{"y"}}});
  auto state = init_model_state(m);
  auto cost = model_arc_cost(m, state, 1);
  CHECK(cost(0) == 4.0);
  apply_meet(m, state, {GraphId{"low"}, NodeId{"x"}});
  apply_action_done(m, state, {GraphId{"low"}, HyperArcId{"l1"}}, ActionId{"p"});
  apply_meet(m, state, {GraphId{"low"}, NodeId{"y"}});
  CHECK(model_arc_cost(m, state, 1)(0) == 0.0);
}
