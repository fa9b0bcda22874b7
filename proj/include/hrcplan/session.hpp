#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "hrcplan/execution.hpp"
#include "hrcplan/simulator.hpp"

namespace hrcplan {

enum class SessionMode { stepped, live };

const char* to_string(SessionMode m) noexcept;
/// Throws ValidationError for anything but "stepped" or "live".
SessionMode session_mode_from_string(const std::string& s);

struct SessionConfig {
  SessionMode mode = SessionMode::stepped;
  /// Live mode: simulated seconds per wall-clock second.
  double speed = 1.0;
  SimConfig sim;
  /// Simulate human operators too instead of waiting for their gestures.
  bool simulate_operator = false;
};

/// One entry of the append-only session log. "event", "gesture" and
/// "advance" entries are client requests and are re-applied on replay;
/// "internal" entries record what the engine did in response.
struct LogEntry {
  std::uint64_t seq = 0;
  std::string kind;
  double time = 0.0;
  Json payload;
  bool accepted = true;
  std::string reason;
};

Json to_json(const LogEntry& e);

struct SubmitResult {
  bool accepted = false;
  /// Error kind of a rejection ("protocol-violation", "not-found", "parse").
  std::string error;
  std::string reason;
  Json snapshot;
};

struct AdvanceResult {
  std::vector<TraceEvent> fired;
  Json snapshot;
};

/// A running cooperation: the discrete-event engine plus the command log.
/// Not thread-safe; callers serialise access (the server holds one mutex per
/// session).
class Session {
public:
  Session(std::string id, std::shared_ptr<const ExecutionModel> exec, SessionConfig config);

  const std::string& id() const noexcept { return id_; }
  const SessionConfig& config() const noexcept { return config_; }
  const Engine& engine() const noexcept { return engine_; }
  const std::vector<LogEntry>& log() const noexcept { return log_; }

  /// Applies a client event. Rejections never throw and never change state.
  ///   {"id"?, "type": "node-met", "graph", "node"}
  ///   {"id"?, "type": "action-done" | "action-failed", "graph", "arc", "action", "agent"?}
  ///   {"id"?, "type": "override", "agent", "graph", "arc", "action"}
  ///   {"id"?, "type": "gesture", "gesture", "agent"?, "missed"?}
  SubmitResult submit(const Json& event);

  /// Stepped mode only. Throws std::invalid_argument for by < 0 and
  /// ProtocolViolation in live mode.
  AdvanceResult advance(double by);
  /// Live mode clock: advances by wall_seconds * speed.
  AdvanceResult tick(double wall_seconds);

  Json snapshot() const;
  /// Hash of the session state; log length and id are excluded.
  std::string state_hash() const;

  /// Message for the push stream: {session, seq, kind, payload}. seq grows
  /// by one per message.
  Json envelope(const std::string& kind, Json payload);

  /// Rebuilds a session by re-applying the client entries of `log`.
  static std::unique_ptr<Session> replay(const std::string& id, std::shared_ptr<const ExecutionModel> exec,
                                         const SessionConfig& config, const std::vector<LogEntry>& log);

private:
  SubmitResult apply_event(const Json& event);
  AdvanceResult apply_advance(double by);
  Event resolve_gesture(const Json& event) const;
  Event parse_event(const Json& event) const;
  void append(std::string kind, Json payload, bool accepted, std::string reason);
  void log_fired(std::size_t from);

  std::string id_;
  std::shared_ptr<const ExecutionModel> exec_;
  SessionConfig config_;
  Engine engine_;
  std::vector<LogEntry> log_;
  std::set<std::string> applied_ids_;
  std::uint64_t stream_seq_ = 0;
};

/// Engine configuration for a session: human operators become external
/// agents unless simulate_operator is set.
SimConfig session_sim_config(const ExecutionModel& exec, const SessionConfig& config);

Json to_json(const Suggestion& s);

}  // namespace hrcplan
