#include "hrcplan/server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"

#include "hrcplan/error.hpp"
#include "hrcplan/scenario.hpp"

namespace hrcplan {

namespace {

struct Slot {
  std::mutex mutex;
  std::condition_variable changed;
  std::unique_ptr<Session> session;
  std::vector<Json> messages;
  std::thread clock;
  bool closing = false;

  void push(Json m) {
    messages.push_back(std::move(m));
    changed.notify_all();
  }
};

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

Json error_body(const std::string& kind, const std::string& reason) { return Json{{"error", kind}, {"reason", reason}}; }

int status_for(const std::string& error) {
  if (error == "parse") return 400;
  if (error == "not-found") return 404;
  if (error == "validation") return 422;
  return 409;
}

}  // namespace

struct Server::Impl {
  ServerConfig config;
  httplib::Server http;
  std::thread thread;
  std::atomic<bool> stopping{false};
  int bound_port = 0;
  std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Slot>> sessions;
  std::uint64_t next_id = 1;

  explicit Impl(ServerConfig c) : config(std::move(c)) {
    if (config.default_scenario.empty()) config.default_scenario = bundled_scenario_text();
    routes();
  }

  std::shared_ptr<Slot> find(const std::string& id) {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  void run_clock(std::shared_ptr<Slot> slot) {
    using clock = std::chrono::steady_clock;
    auto last = clock::now();
    for (;;) {
      std::unique_lock lock(slot->mutex);
      slot->changed.wait_for(lock, std::chrono::duration<double>(config.tick_interval),
                             [&] { return slot->closing || stopping.load(); });
      if (slot->closing || stopping.load() || slot->session->engine().finished()) return;
      const auto now = clock::now();
      const double wall = std::chrono::duration<double>(now - last).count();
      last = now;
      auto r = slot->session->tick(wall);
      if (r.fired.empty()) continue;
      Json fired = Json::array();
      for (const auto& e : r.fired) fired.push_back(to_json(e));
      slot->push(slot->session->envelope("events", std::move(fired)));
      slot->push(slot->session->envelope("snapshot", std::move(r.snapshot)));
    }
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    Json body = Json::object();
    if (!req.body.empty()) {
      body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return reply(res, 400, error_body("parse", "body must be a JSON object"));
    }
    SessionConfig sc;
    sc.mode = config.mode;
    sc.speed = config.speed;
    sc.simulate_operator = config.simulate_operator;
    std::shared_ptr<const ExecutionModel> exec;
    try {
      const Scenario scenario = load_scenario(body.contains("scenario") ? body["scenario"].get<std::string>()
                                                                         : config.default_scenario);
      sc.sim = sim_config(scenario);
      sc.sim.noise = config.noise;
      sc.sim.failure_overrides = config.failure_overrides;
      if (config.seed) sc.sim.seed = *config.seed;
      if (config.max_time) sc.sim.max_time = *config.max_time;
      if (body.contains("seed")) sc.sim.seed = body["seed"].get<std::uint64_t>();
      if (body.contains("noise")) sc.sim.noise = body["noise"].get<bool>();
      if (body.contains("max_time")) sc.sim.max_time = body["max_time"].get<double>();
      if (body.contains("mode")) sc.mode = session_mode_from_string(body["mode"].get<std::string>());
      if (body.contains("speed")) sc.speed = body["speed"].get<double>();
      if (body.contains("simulate_operator")) sc.simulate_operator = body["simulate_operator"].get<bool>();
      exec = std::make_shared<ExecutionModel>(expand(scenario));
    } catch (const Error& e) {
      return reply(res, status_for(to_string(e.kind())), error_body(to_string(e.kind()), e.what()));
    } catch (const Json::exception& e) {
      return reply(res, 400, error_body("parse", e.what()));
    }
    auto slot = std::make_shared<Slot>();
    std::string id;
    {
      std::lock_guard lock(sessions_mutex);
      id = "s" + std::to_string(next_id++);
    }
    try {
      slot->session = std::make_unique<Session>(id, exec, sc);
    } catch (const Error& e) {
      return reply(res, status_for(to_string(e.kind())), error_body(to_string(e.kind()), e.what()));
    }
    Json snap = slot->session->snapshot();
    Json msg = slot->session->envelope("snapshot", snap);
    slot->messages.push_back(msg);
    {
      std::lock_guard lock(sessions_mutex);
      sessions[id] = slot;
    }
    if (sc.mode == SessionMode::live) slot->clock = std::thread([this, slot] { run_clock(slot); });
    reply(res, 201, msg);
  }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
    http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) { create(req, res); });

    http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.matches[1]);
      if (!slot) return reply(res, 404, error_body("not-found", "unknown session"));
      std::lock_guard lock(slot->mutex);
      reply(res, 200, slot->session->envelope("snapshot", slot->session->snapshot()));
    });

    http.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_ptr<Slot> slot;
      {
        std::lock_guard lock(sessions_mutex);
        auto it = sessions.find(req.matches[1]);
        if (it == sessions.end()) return reply(res, 404, error_body("not-found", "unknown session"));
        slot = it->second;
        sessions.erase(it);
      }
      close(*slot);
      res.status = 204;
    });

    http.Post(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.matches[1]);
      if (!slot) return reply(res, 404, error_body("not-found", "unknown session"));
      Json event = Json::parse(req.body, nullptr, false);
      std::lock_guard lock(slot->mutex);
      auto& s = *slot->session;
      const std::size_t mark = s.log().size();
      auto r = s.submit(event.is_discarded() ? Json("malformed") : event);
      Json fired = Json::array();
      for (std::size_t i = mark; i < s.log().size(); ++i)
        if (s.log()[i].kind == "internal") fired.push_back(s.log()[i].payload);
      Json payload{{"accepted", r.accepted}};
      if (!r.accepted) {
        payload["error"] = r.error;
        payload["reason"] = r.reason;
      }
      payload["event"] = event.is_discarded() ? Json(req.body) : event;
      payload["fired"] = fired;
      payload["snapshot"] = r.snapshot;
      Json msg = s.envelope(r.accepted ? "accepted" : "rejected", payload);
      slot->push(msg);
      if (r.accepted) slot->push(s.envelope("snapshot", r.snapshot));
      reply(res, r.accepted ? 200 : status_for(r.error), msg);
    });

    http.Post(R"(/sessions/([^/]+)/advance)", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.matches[1]);
      if (!slot) return reply(res, 404, error_body("not-found", "unknown session"));
      Json body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("by") || !body["by"].is_number())
        return reply(res, 400, error_body("parse", "body must be {\"by\": seconds}"));
      std::lock_guard lock(slot->mutex);
      auto& s = *slot->session;
      try {
        auto r = s.advance(body["by"].get<double>());
        Json fired = Json::array();
        for (const auto& e : r.fired) fired.push_back(to_json(e));
        Json msg = s.envelope("advanced", Json{{"fired", fired}, {"snapshot", r.snapshot}});
        slot->push(msg);
        slot->push(s.envelope("snapshot", r.snapshot));
        reply(res, 200, msg);
      } catch (const std::invalid_argument& e) {
        reply(res, 400, error_body("validation", e.what()));
      } catch (const Error& e) {
        reply(res, status_for(to_string(e.kind())), error_body(to_string(e.kind()), e.what()));
      }
    });

    http.Get(R"(/sessions/([^/]+)/log)", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.matches[1]);
      if (!slot) return reply(res, 404, error_body("not-found", "unknown session"));
      std::lock_guard lock(slot->mutex);
      Json entries = Json::array();
      for (const auto& e : slot->session->log()) entries.push_back(to_json(e));
      reply(res, 200, Json{{"session", slot->session->id()}, {"entries", entries}});
    });

    http.Get(R"(/sessions/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.matches[1]);
      if (!slot) return reply(res, 404, error_body("not-found", "unknown session"));
      // Start from the latest snapshot so a new subscriber renders a committed state first.
      std::size_t cursor = 0;
      {
        std::lock_guard lock(slot->mutex);
        cursor = slot->messages.size();
        for (std::size_t i = slot->messages.size(); i-- > 0;)
          if (slot->messages[i]["kind"] == "snapshot") {
            cursor = i;
            break;
          }
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, slot, cursor](std::size_t, httplib::DataSink& sink) mutable {
        std::vector<Json> out;
        {
          std::unique_lock lock(slot->mutex);
          slot->changed.wait_for(lock, std::chrono::seconds(1), [&] {
            return slot->closing || stopping.load() || slot->messages.size() > cursor;
          });
          if (slot->closing || stopping.load()) {
            sink.done();
            return false;
          }
          for (; cursor < slot->messages.size(); ++cursor) out.push_back(slot->messages[cursor]);
        }
        if (out.empty()) {
          const std::string ping = ": keep-alive\n\n";
          return sink.write(ping.data(), ping.size());
        }
        for (const auto& m : out) {
          const std::string frame = "event: " + m["kind"].get<std::string>() + "\ndata: " + m.dump() + "\n\n";
          if (!sink.write(frame.data(), frame.size())) return false;
        }
        return true;
      });
    });
  }

  void close(Slot& slot) {
    {
      std::lock_guard lock(slot.mutex);
      slot.closing = true;
      slot.changed.notify_all();
    }
    if (slot.clock.joinable()) slot.clock.join();
  }

  void shutdown() {
    stopping = true;
    std::map<std::string, std::shared_ptr<Slot>> all;
    {
      std::lock_guard lock(sessions_mutex);
      all.swap(sessions);
    }
    for (auto& [id, slot] : all) close(*slot);
    http.stop();
    if (thread.joinable()) thread.join();
  }
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() { stop(); }

int Server::start() {
  auto& im = *impl_;
  if (im.config.port == 0) im.bound_port = im.http.bind_to_any_port(im.config.host);
  else im.bound_port = im.http.bind_to_port(im.config.host, im.config.port) ? im.config.port : -1;
  if (im.bound_port < 0) throw Error(ErrorKind::runtime, "cannot bind " + im.config.host + ":" + std::to_string(im.config.port));
  im.thread = std::thread([&im] { im.http.listen_after_bind(); });
  im.http.wait_until_ready();
  return im.bound_port;
}

void Server::listen() {
  auto& im = *impl_;
  if (im.config.port == 0) im.bound_port = im.http.bind_to_any_port(im.config.host);
  else im.bound_port = im.http.bind_to_port(im.config.host, im.config.port) ? im.config.port : -1;
  if (im.bound_port < 0) throw Error(ErrorKind::runtime, "cannot bind " + im.config.host + ":" + std::to_string(im.config.port));
  im.http.listen_after_bind();
}

void Server::stop() {
  if (impl_) impl_->shutdown();
}

int Server::port() const noexcept { return impl_->bound_port; }

}  // namespace hrcplan
