#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "json.hpp"

#include "hrcplan/execution.hpp"
#include "hrcplan/planner.hpp"

namespace hrcplan {

using Json = nlohmann::ordered_json;

struct SimConfig {
  std::uint64_t seed = 0;
  double max_time = 100000.0;
  /// Wait before a failed action is suggested again.
  double retry_delay = 1.0;
  /// Extra time an operator spends repeating a gesture that was not recognised.
  double repeat_delay = 2.0;
  int rehearsal_samples = 20;
  /// false: every duration is its mean, nothing fails, no gesture is missed.
  bool noise = true;
  /// Run at most one graph instance at a time, in group order.
  bool sequential = false;
  /// Agents whose actions arrive as external events instead of being simulated.
  std::set<AgentId> external_agents;
  /// Per-action failure probability overrides.
  std::map<ActionId, double> failure_overrides;
  /// Re-derive every flag from scratch after each transaction and abort on mismatch.
  bool check_invariants = false;
};

/// Deterministic sampler: each draw is keyed by the seed plus the identity of
/// what is being sampled, so the same action attempt sees the same value no
/// matter when or in which mode it runs.
class KeyedRng {
public:
  explicit KeyedRng(std::uint64_t seed) : seed_(seed) {}
  double uniform(const std::vector<std::string>& key) const;
  /// max(0, Normal(mean, std_dev)).
  double duration(const std::vector<std::string>& key, const DurationModel& d) const;

private:
  std::uint64_t seed_;
};

struct TraceEvent {
  double time = 0.0;
  std::string kind;
  std::string graph;
  std::string node;
  std::string arc;
  std::string action;
  std::string agent;
  std::string item;
  std::string detail;
  double value = 0.0;

  bool operator==(const TraceEvent&) const = default;
};

struct BusyInterval {
  AgentId agent;
  double start = 0.0;
  double end = 0.0;
  std::string what;
  bool operator==(const BusyInterval&) const = default;
};

/// Time attributed to one report category of one planner group.
struct Charge {
  std::string group;
  std::string category;
  double seconds = 0.0;
  bool operator==(const Charge&) const = default;
};

struct ExecutionTrace {
  std::vector<TraceEvent> events;
  std::vector<BusyInterval> intervals;
  std::vector<Charge> charges;
  std::map<GraphId, EpisodeStatus> final_status;
  /// Order in which each group visited its work items.
  std::map<std::string, std::vector<ItemId>> visit_order;
  /// "solved", "failed" or "aborted".
  std::string status;
  double makespan = 0.0;
  std::vector<AgentId> agents;

  bool operator==(const ExecutionTrace&) const = default;
};

Json to_json(const TraceEvent& e);

/// Line-delimited JSON, one record per event.
void write_trace(std::ostream& os, const ExecutionTrace& trace);

/// Discrete-event executor of an ExecutionModel.
///
/// Planner groups activate one instance at a time; activation charges the
/// group's modelled overheads before its first suggestion. Suggestions for
/// simulated agents start immediately; suggestions for external agents wait
/// for submit().
class Engine {
public:
  Engine(std::shared_ptr<const ExecutionModel> exec, SimConfig config);
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  /// Activates the initial instances and dispatches time-zero work.
  void start();
  /// Fires every scheduled event up to now()+dt and moves the clock there.
  /// Returns the trace events emitted. Throws std::invalid_argument for dt < 0.
  std::vector<TraceEvent> advance(double dt);
  /// Runs until nothing is scheduled, the model is solved, or max_time passes.
  void run_to_end();

  /// Applies an externally reported event at now(). Override events by a
  /// simulated agent are rejected while it is busy. Throws on rejection with
  /// state unchanged.
  EventOutcome submit(const Event& event);

  double now() const noexcept { return now_; }
  bool finished() const noexcept { return finished_; }
  const ModelState& state() const noexcept { return state_; }
  const ExecutionModel& exec() const noexcept { return *exec_; }
  const SimConfig& config() const noexcept { return config_; }
  /// Suggestions not yet started: those for external agents and those waiting
  /// on an instance's planning overhead are not included.
  const std::vector<Suggestion>& pending_suggestions() const noexcept { return pending_; }
  /// Agent -> description of what it is executing.
  std::map<AgentId, std::string> busy_agents() const;
  const ExecutionTrace& trace() const noexcept { return trace_; }
  /// Item currently handled by each group (empty id when idle).
  std::map<std::string, ItemId> active_items() const;

private:
  struct Job;
  struct Timer {
    double time;
    std::uint64_t seq;
    int kind;
    std::size_t job;
    bool operator>(const Timer& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  struct Instance {
    std::size_t group;
    std::size_t graph;
    ItemId item;
    bool active = false;
    bool finished = false;
    double ready_at = 0.0;
    double available_since = -1.0;
    std::size_t pending_processes = 0;
  };

  void emit(TraceEvent e);
  void schedule(double t, int kind, std::size_t job);
  void dispatch();
  bool settle_and_activate();
  bool try_activate();
  void activate(std::size_t inst);
  bool candidate(const Instance& inst) const;
  void start_processes(std::size_t graph, std::size_t node);
  bool start_waiting_processes();
  void start_suggested();
  void finish_job(std::size_t job, double t);
  EventOutcome handle(const Event& e);
  void log_changes(const std::vector<Change>& changes);
  void check_invariants() const;
  void update_finished();
  PlannerContext context() const;
  double failure_probability(const Action& a) const;
  std::optional<Suggestion> redirect(const Suggestion& s) const;
  std::string item_of(std::size_t graph) const;
  bool coordination_graph(std::size_t graph) const;

  std::shared_ptr<const ExecutionModel> exec_;
  SimConfig config_;
  KeyedRng rng_;
  ModelState state_;
  Planner planner_;
  double now_ = 0.0;
  bool started_ = false;
  bool finished_ = false;
  std::uint64_t seq_ = 0;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  std::vector<Job> jobs_;
  std::vector<Instance> instances_;
  std::vector<std::size_t> instance_of_graph_;
  std::map<AgentId, std::size_t> busy_;
  std::set<ArcRef> blocked_;
  std::map<std::tuple<std::string, std::string, std::string>, int> attempts_;
  std::vector<std::pair<std::size_t, std::size_t>> waiting_processes_;  // (graph, node) process slots
  std::vector<std::string> waiting_process_ids_;
  std::vector<Suggestion> pending_;
  ExecutionTrace trace_;
  std::vector<std::vector<bool>> met_seen_;
  std::map<std::size_t, double> rehearsal_cache_;
};

/// One full run from time zero.
ExecutionTrace run(const ExecutionModel& exec, const SimConfig& config);

/// Mean end-to-end duration of an ordered action list executed by `agent`
/// (or by the list's own durations when null) over `samples` keyed draws,
/// failed attempts retried after config.retry_delay.
double rehearse(const std::vector<Action>& actions, const AgentSpec* agent, const SimConfig& config, int samples);

/// Mean makespan of the instance run alone over `samples` seeds.
double rehearse_instance(const ExecutionModel& exec, std::size_t graph_index, const SimConfig& config, int samples);

struct Comparison {
  double concurrent = 0.0;
  double sequential = 0.0;
  /// concurrent / sequential.
  double ratio = 0.0;
  ExecutionTrace concurrent_trace;
  ExecutionTrace sequential_trace;
};

Comparison compare_concurrent_sequential(const ExecutionModel& exec, const SimConfig& config);

struct CategoryStat {
  std::string name;
  double mean = 0.0;
  double share = 0.0;  // percent of the branch total
  double std_dev = 0.0;
};

struct BranchReport {
  std::string branch;
  std::vector<CategoryStat> categories;
  double total = 0.0;
  double total_std_dev = 0.0;
};

struct TimingReport {
  std::vector<BranchReport> branches;
  double makespan = 0.0;
  double makespan_std_dev = 0.0;
  std::map<AgentId, double> idle;
  std::size_t runs = 0;
};

/// Throws std::invalid_argument on an empty trace list.
TimingReport report(const std::vector<ExecutionTrace>& traces);
TimingReport report(const ExecutionTrace& trace);

/// Table-like text document, one block per branch.
void write_report(std::ostream& os, const TimingReport& r);

/// Category names used in reports.
namespace category {
inline constexpr const char* representation = "task representation";
inline constexpr const char* planning = "task planner";
inline constexpr const char* simulation = "simulator";
}  // namespace category

}  // namespace hrcplan
