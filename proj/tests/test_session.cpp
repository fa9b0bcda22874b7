#include <chrono>
#include <thread>

#include "doctest.h"
#include "httplib.h"

#include "hrcplan/error.hpp"
#include "hrcplan/scenario.hpp"
#include "hrcplan/server.hpp"
#include "hrcplan/session.hpp"

using namespace hrcplan;

namespace {

std::shared_ptr<const ExecutionModel> bundled_exec() {
  static const auto exec = std::make_shared<const ExecutionModel>(expand(bundled_scenario()));
  return exec;
}

SessionConfig stepped(bool noise = false, std::uint64_t seed = 7) {
  SessionConfig c;
  c.sim = sim_config(bundled_scenario());
  c.sim.noise = noise;
  c.sim.seed = seed;
  return c;
}

Json gesture(const std::string& name) { return Json{{"type", "gesture"}, {"gesture", name}}; }

std::optional<std::string> gesture_for(const std::string& action) {
  if (action == "op_pick_up" || action == "op_take_object") return "pick up";
  if (action == "op_put_down" || action == "op_put_down_assessed") return "put down";
  return std::nullopt;
}

std::optional<Json> operator_suggestion(const Json& snap) {
  for (const auto& s : snap["suggestions"])
    if (s["agent"] == "operator") return s;
  return std::nullopt;
}

std::optional<std::string> operator_action(const Json& snap) {
  if (auto s = operator_suggestion(snap)) return (*s)["action"].get<std::string>();
  return std::nullopt;
}

const Json* node_of(const Json& snap, const std::string& node) {
  for (const auto& g : snap["graphs"]) {
    if (!g.value("active", false)) continue;
    for (const auto& n : g["nodes"])
      if (n["id"] == node) return &n;
  }
  return nullptr;
}

// Plays the operator: answers every operator suggestion with its gesture,
// or reports actions without one as done; otherwise lets a second pass.
void drive_with_gestures(Session& s, int max_steps = 5000) {
  for (int i = 0; i < max_steps && s.snapshot()["status"] == "running"; ++i) {
    const auto snap = s.snapshot();
    if (auto sug = operator_suggestion(snap)) {
      const auto action = (*sug)["action"].get<std::string>();
      Json ev;
      if (auto g = gesture_for(action)) {
        ev = gesture(*g);
      } else {
        ev = {{"type", "action-done"}, {"graph", (*sug)["graph"]}, {"arc", (*sug)["arc"]}, {"action", action},
              {"agent", "operator"}};
      }
      const auto r = s.submit(ev);
      REQUIRE_MESSAGE(r.accepted, r.reason);
    } else {
      s.advance(1.0);
    }
  }
}

}  // namespace

TEST_CASE("initial snapshot") {
  Session s("s1", bundled_exec(), stepped());
  const auto snap = s.snapshot();
  CHECK(snap["session"] == "s1");
  CHECK(snap["mode"] == "stepped");
  CHECK(snap["status"] == "running");
  CHECK(snap["t"] == 0.0);
  CHECK(snap["active_items"]["youbot"] == "obj3");
  CHECK(snap["graphs"].size() > 0);
  CHECK(snap["hash"].get<std::string>().size() == 16);
  CHECK(s.state_hash() == snap["hash"]);
}

TEST_CASE("gestures") {
  Session s("s2", bundled_exec(), stepped());

  SUBCASE("a premature gesture is rejected without touching state") {
    const auto h = s.state_hash();
    const auto r = s.submit(gesture("put down"));
    CHECK(!r.accepted);
    CHECK(r.error == "protocol-violation");
    CHECK(s.state_hash() == h);
    CHECK(s.log().back().accepted == false);
  }

  SUBCASE("pick up at the handover starts the release") {
    std::optional<std::string> a;
    for (int i = 0; i < 500 && !(a = operator_action(s.snapshot())); ++i) s.advance(1.0);
    REQUIRE(a == "op_pick_up");
    const auto r = s.submit(gesture("pick up"));
    REQUIRE(r.accepted);
    const auto* ready = node_of(r.snapshot, "human_ready");
    REQUIRE(ready);
    CHECK((*ready)["met"] == true);
    CHECK(r.snapshot["executing"]["youbot_arm"].get<std::string>().find("yb_release") != std::string::npos);
  }

  SUBCASE("a missed gesture is logged and ignored") {
    const auto h = s.state_hash();
    auto g = gesture("pick up");
    g["missed"] = true;
    const auto r = s.submit(g);
    CHECK(!r.accepted);
    CHECK(r.error == "gesture-missed");
    CHECK(s.state_hash() == h);
  }

  SUBCASE("unknown gestures and malformed events") {
    CHECK(s.submit(gesture("wave")).error == "not-found");
    CHECK(s.submit(Json{{"type", "teleport"}}).error == "parse");
    CHECK(s.submit(Json::array()).error == "parse");
  }
}

TEST_CASE("duplicate client ids are rejected") {
  Session s("s3", bundled_exec(), stepped());
  std::optional<std::string> a;
  for (int i = 0; i < 500 && !(a = operator_action(s.snapshot())); ++i) s.advance(1.0);
  REQUIRE(a);
  REQUIRE(gesture_for(*a));
  auto g = gesture(*gesture_for(*a));
  g["id"] = "c-1";
  CHECK(s.submit(g).accepted);
  const auto h = s.state_hash();
  const auto again = s.submit(g);
  CHECK(!again.accepted);
  CHECK(again.reason.find("c-1") != std::string::npos);
  CHECK(s.state_hash() == h);
}

TEST_CASE("advance bounds and live mode") {
  Session s("s4", bundled_exec(), stepped());
  const auto h = s.state_hash();
  CHECK(s.advance(0.0).fired.empty());
  CHECK(s.state_hash() == h);
  CHECK_THROWS_AS(s.advance(-0.5), std::invalid_argument);

  auto live = stepped();
  live.mode = SessionMode::live;
  live.speed = 10.0;
  Session l("s5", bundled_exec(), live);
  CHECK_THROWS_AS(l.advance(1.0), ProtocolViolation);
  l.tick(0.5);
  CHECK(l.snapshot()["t"] == doctest::Approx(5.0));
  CHECK_THROWS_AS(session_mode_from_string("paused"), ValidationError);
}

TEST_CASE("a gesture-driven run completes and replays to the same state") {
  Session s("s6", bundled_exec(), stepped(true, 3));
  drive_with_gestures(s);
  const auto snap = s.snapshot();
  CHECK(snap["status"] == "solved");
  for (const auto& [group, item] : snap["active_items"].items()) CHECK(item == "");

  const auto copy = Session::replay("s6-replay", bundled_exec(), stepped(true, 3), s.log());
  CHECK(copy->state_hash() == s.state_hash());
  CHECK(copy->log().size() == s.log().size());
}

TEST_CASE("a simulated operator needs no gestures") {
  auto c = stepped();
  c.simulate_operator = true;
  Session s("s7", bundled_exec(), c);
  for (int i = 0; i < 10 && s.snapshot()["status"] == "running"; ++i) s.advance(100.0);
  CHECK(s.snapshot()["status"] == "solved");
  CHECK(s.snapshot()["t"] == doctest::Approx(310.19));
}

TEST_CASE("envelopes carry a growing sequence number") {
  Session s("s8", bundled_exec(), stepped());
  const auto a = s.envelope("snapshot", s.snapshot());
  const auto b = s.envelope("snapshot", s.snapshot());
  CHECK(a["session"] == "s8");
  CHECK(a["kind"] == "snapshot");
  CHECK(b["seq"].get<int>() == a["seq"].get<int>() + 1);
}

TEST_CASE("http front end") {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.noise = false;
  Server server(cfg);
  const int port = server.start();
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(5, 0);

  auto created = cli.Post("/sessions", "{}", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto env = Json::parse(created->body);
  CHECK(env["kind"] == "snapshot");
  const std::string id = env["session"];
  const std::string base = "/sessions/" + id;

  auto got = cli.Get(base);
  REQUIRE(got);
  CHECK(got->status == 200);
  CHECK(Json::parse(got->body)["payload"]["status"] == "running");

  auto bad = cli.Post(base + "/events", gesture("put down").dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 409);
  const auto rej = Json::parse(bad->body);
  CHECK(rej["kind"] == "rejected");
  CHECK(rej["payload"]["error"] == "protocol-violation");

  auto garbled = cli.Post(base + "/events", "{not json", "application/json");
  REQUIRE(garbled);
  CHECK(garbled->status == 400);

  auto adv = cli.Post(base + "/advance", R"({"by": 12})", "application/json");
  REQUIRE(adv);
  CHECK(adv->status == 200);
  CHECK(Json::parse(adv->body)["payload"]["snapshot"]["t"] == 12.0);

  auto log = cli.Get(base + "/log");
  REQUIRE(log);
  CHECK(Json::parse(log->body)["entries"].size() > 0);

  auto missing = cli.Get("/sessions/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  std::string first;
  cli.Get(base + "/stream", [&](const char* data, size_t len) {
    first.append(data, len);
    return first.find("\n\n") == std::string::npos;
  });
  CHECK(first.rfind("event: snapshot\ndata: ", 0) == 0);

  auto del = cli.Delete(base);
  REQUIRE(del);
  CHECK(del->status == 204);
  CHECK(cli.Get(base)->status == 404);
  server.stop();
}
