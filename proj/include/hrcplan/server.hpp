#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "hrcplan/session.hpp"

namespace hrcplan {

struct ServerConfig {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Scenario used when POST /sessions carries no document.
  std::string default_scenario;
  /// Defaults for new sessions; request fields override them.
  SessionMode mode = SessionMode::stepped;
  double speed = 1.0;
  bool simulate_operator = false;
  /// Unset: the scenario's own seed and time limit.
  std::optional<std::uint64_t> seed;
  std::optional<double> max_time;
  bool noise = true;
  std::map<ActionId, double> failure_overrides;
  /// Live-mode clock period in wall-clock seconds.
  double tick_interval = 0.05;
};

/// HTTP front end over a set of sessions. Routes and message shapes are
/// described in docs/wire-protocol.md.
class Server {
public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void listen();
  void stop();
  int port() const noexcept;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hrcplan
