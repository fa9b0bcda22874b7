#include <random>

#include "doctest.h"

#include "hrcplan/episode.hpp"
#include "hrcplan/error.hpp"
#include "hrcplan/graph.hpp"
#include "support/oracles.hpp"

using namespace hrcplan;

namespace {

HyperArc arc(const char* id, std::vector<const char*> children, const char* parent, std::vector<const char*> actions = {},
             double cost = 1.0) {
  HyperArc h;
  h.id = HyperArcId{id};
  for (auto c : children) h.children.push_back(NodeId{c});
  h.parent = NodeId{parent};
  for (auto a : actions) h.actions.push_back({ActionId{a}, a, {"arm"}, {1.0, 0.0}, 0.0});
  h.cost = cost;
  return h;
}

std::vector<Node> nodes(std::vector<const char*> ids) {
  std::vector<Node> out;
  for (auto id : ids) out.push_back({NodeId{id}, id, {}});
  return out;
}

// a, b leaves; m reachable alone from a (h1) or from a and b (h2); r from m.
std::shared_ptr<const GraphStructure> fork_graph() {
  return std::make_shared<GraphStructure>(
      GraphId{"fork"}, nodes({"a", "b", "m", "r"}),
      std::vector<HyperArc>{arc("h1", {"a"}, "m", {"x"}), arc("h2", {"a", "b"}, "m", {"y", "z"}), arc("h3", {"m"}, "r")},
      NodeId{"r"});
}

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  for (const auto& x : v)
    if (x.rule.find(rule) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("valid graph has no violations and indexes by id") {
  auto g = fork_graph();
  CHECK(validate_structure(*g).empty());
  CHECK(g->node_index(NodeId{"m"}) == 2);
  CHECK(g->leaves().size() == 2);
  CHECK(g->arcs_with_child(g->node_index(NodeId{"a"})).size() == 2);
  CHECK_THROWS_AS(g->node_index(NodeId{"zz"}), NotFound);
  CHECK(expected_duration(g->arc(1)) == doctest::Approx(2.0));
}

TEST_CASE("structural violations are reported") {
  SUBCASE("cycle") {
    GraphStructure g(GraphId{"c"}, nodes({"a", "b", "c", "r"}),
                     {arc("h1", {"a", "c"}, "b"), arc("h2", {"b"}, "c"), arc("h3", {"b"}, "r")}, NodeId{"r"});
    CHECK(has_rule(validate_structure(g), "cycle"));
  }
  SUBCASE("unreachable node") {
    GraphStructure g(GraphId{"u"}, nodes({"a", "lonely", "r"}), {arc("h1", {"a"}, "r")}, NodeId{"r"});
    CHECK(has_rule(validate_structure(g), "not reachable"));
  }
  SUBCASE("parent among children") {
    GraphStructure g(GraphId{"p"}, nodes({"a", "r"}), {arc("h1", {"a", "r"}, "r")}, NodeId{"r"});
    CHECK(has_rule(validate_structure(g), "parent"));
  }
  SUBCASE("root used as child") {
    GraphStructure g(GraphId{"rc"}, nodes({"a", "b", "r"}), {arc("h1", {"a"}, "r"), arc("h2", {"r"}, "b")}, NodeId{"r"});
    CHECK(has_rule(validate_structure(g), "root is a child"));
  }
  SUBCASE("duplicates and dangling references") {
    GraphStructure g(GraphId{"d"}, nodes({"a", "a", "r"}), {arc("h1", {"a", "ghost"}, "r")}, NodeId{"r"});
    const auto v = validate_structure(g);
    CHECK(has_rule(v, "duplicate node id"));
    CHECK(has_rule(v, "unknown child"));
  }
  SUBCASE("negative cost") {
    GraphStructure g(GraphId{"n"}, nodes({"a", "r"}), {arc("h1", {"a"}, "r", {}, -1.0)}, NodeId{"r"});
    CHECK(has_rule(validate_structure(g), "cost < 0"));
  }
}

TEST_CASE("fresh episode makes unmet leaves feasible") {
  auto s = init_episode(fork_graph());
  CHECK(feasible_sets(s) == FeasibleSets{{NodeId{"a"}, NodeId{"b"}}, {}});
  CHECK(s.status == EpisodeStatus::in_progress);

  auto pre = init_episode(fork_graph(), {NodeId{"a"}});
  CHECK(pre.met[0]);
  CHECK(feasible_sets(pre).arcs == std::vector<HyperArcId>{HyperArcId{"h1"}});
  CHECK_THROWS_AS(init_episode(fork_graph(), {NodeId{"m"}}), ValidationError);
  CHECK_THROWS_AS(init_episode(fork_graph(), {NodeId{"nope"}}), NotFound);
}

TEST_CASE("meeting, acting and solving follow the feasibility rules") {
  auto s = init_episode(fork_graph());
  const auto r = meet_node(s, NodeId{"a"});
  CHECK(r.newly_feasible == std::vector<HyperArcId>{HyperArcId{"h1"}});

  SUBCASE("non-feasible node is rejected without change") {
    const auto before = s;
    CHECK_THROWS_AS(meet_node(s, NodeId{"m"}), ProtocolViolation);
    CHECK(s == before);
  }
  SUBCASE("out-of-order action is rejected") {
    meet_node(s, NodeId{"b"});
    const auto before = s;
    CHECK_THROWS_AS(record_action_done(s, HyperArcId{"h2"}, ActionId{"z"}), ProtocolViolation);
    CHECK(s == before);
    CHECK_THROWS_AS(record_action_done(s, HyperArcId{"h2"}, ActionId{"nope"}), NotFound);
  }
  SUBCASE("solving one alternative suppresses the other") {
    meet_node(s, NodeId{"b"});
    const auto res = record_action_done(s, HyperArcId{"h1"}, ActionId{"x"});
    CHECK(res.solved);
    CHECK(res.effects.feasible_parent == NodeId{"m"});
    CHECK(res.effects.suppressed == std::vector<HyperArcId>{HyperArcId{"h2"}});
    CHECK_THROWS_AS(record_action_done(s, HyperArcId{"h2"}, ActionId{"y"}), ProtocolViolation);
    CHECK_THROWS_AS(solve_hyper_arc(s, HyperArcId{"h1"}), ProtocolViolation);
    meet_node(s, NodeId{"m"});
    solve_hyper_arc(s, HyperArcId{"h3"});
    meet_node(s, NodeId{"r"});
    CHECK(s.status == EpisodeStatus::solved);
  }
  SUBCASE("solving with unfinished actions is rejected") {
    meet_node(s, NodeId{"b"});
    record_action_done(s, HyperArcId{"h2"}, ActionId{"y"});
    CHECK_THROWS_AS(solve_hyper_arc(s, HyperArcId{"h2"}), ProtocolViolation);
  }
}

TEST_CASE("episode fails when nothing is feasible") {
  // Two alternatives for m share child a; a third arc needs m and n, and n
  // needs a through a rival that the first solve suppresses.
  auto g = std::make_shared<GraphStructure>(
      GraphId{"dead"}, nodes({"a", "m", "n", "r"}),
      std::vector<HyperArc>{arc("h1", {"a"}, "m"), arc("h2", {"a"}, "n"), arc("h3", {"m", "n"}, "r")}, NodeId{"r"});
  auto s = init_episode(g);
  meet_node(s, NodeId{"a"});
  solve_hyper_arc(s, HyperArcId{"h1"});
  CHECK(s.status == EpisodeStatus::in_progress);
  meet_node(s, NodeId{"m"});
  CHECK(s.status == EpisodeStatus::failed);
}

TEST_CASE("incremental flags equal recomputation from the event log") {
  std::mt19937_64 rng(20240611);
  std::size_t steps = 0, rejections = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto g = oracle::random_graph(rng, "g" + std::to_string(trial));
    REQUIRE(validate_structure(*g).empty());
    auto s = init_episode(g);
    std::vector<oracle::Step> log;
    REQUIRE(s == oracle::recompute(g, log));
    for (;;) {
      if (oracle::pick(rng, 5) == 0) {
        const auto before = s;
        bool threw = false;
        try {
          threw = !oracle::random_illegal_step(rng, s);
        } catch (const ProtocolViolation&) {
          threw = true;
        }
        CHECK(threw);
        CHECK(s == before);
        ++rejections;
      }
      if (!oracle::random_legal_step(rng, s, log)) break;
      ++steps;
      REQUIRE(s == oracle::recompute(g, log));
    }
    CHECK(s.status != EpisodeStatus::in_progress);
  }
  CHECK(steps > 2000);
  CHECK(rejections > 300);
}
