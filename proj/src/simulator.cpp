#include "hrcplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "hrcplan/error.hpp"

namespace hrcplan {

namespace {

// FNV-1a: stable across platforms and runs, unlike std::hash.
std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= 0xff;  // separator so ("ab","c") != ("a","bc")
  h *= 0x100000001b3ULL;
  return h;
}

std::uint64_t key_hash(std::uint64_t seed, const std::vector<std::string>& key) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (const auto& k : key) h = fnv1a(h, k);
  return h;
}

enum TimerKind { job_end = 0, unblock = 1, instance_ready = 2 };

}  // namespace

double KeyedRng::uniform(const std::vector<std::string>& key) const {
  std::mt19937_64 gen(key_hash(seed_, key));
  return std::uniform_real_distribution<double>(0.0, 1.0)(gen);
}

double KeyedRng::duration(const std::vector<std::string>& key, const DurationModel& d) const {
  if (d.std_dev <= 0.0) return std::max(0.0, d.mean);
  std::mt19937_64 gen(key_hash(seed_, key));
  return std::max(0.0, std::normal_distribution<double>(d.mean, d.std_dev)(gen));
}

Json to_json(const TraceEvent& e) {
  Json j;
  j["t"] = e.time;
  j["kind"] = e.kind;
  if (!e.graph.empty()) j["graph"] = e.graph;
  if (!e.node.empty()) j["node"] = e.node;
  if (!e.arc.empty()) j["arc"] = e.arc;
  if (!e.action.empty()) j["action"] = e.action;
  if (!e.agent.empty()) j["agent"] = e.agent;
  if (!e.item.empty()) j["item"] = e.item;
  if (!e.detail.empty()) j["detail"] = e.detail;
  if (e.value != 0.0) j["value"] = e.value;
  return j;
}

void write_trace(std::ostream& os, const ExecutionTrace& trace) {
  for (const auto& e : trace.events) os << to_json(e).dump() << '\n';
}

struct Engine::Job {
  enum class Kind { action, process } kind = Kind::action;
  AgentId agent;
  std::size_t graph = 0;
  HyperArcId arc;
  ActionId action;
  std::size_t node = 0;
  std::string process;
  double start = 0.0;
  double duration = 0.0;
  int attempt = 0;
  int misses = 0;
  bool override_action = false;
  bool running = false;
};

Engine::Engine(std::shared_ptr<const ExecutionModel> exec, SimConfig config)
    : exec_(std::move(exec)), config_(std::move(config)), rng_(config_.seed), planner_(exec_->model) {
  auto problems = validate_execution(*exec_);
  if (!problems.empty())
    throw ValidationError("execution model invalid: " + problems.front().element + ": " + problems.front().rule);
  state_ = init_model_state(exec_->model, exec_->initially_met);
  instance_of_graph_.assign(exec_->model.graph_count(), ExecutionModel::npos);
  for (std::size_t g = 0; g < exec_->groups.size(); ++g) {
    const auto& grp = exec_->groups[g];
    for (std::size_t i = 0; i < grp.instances.size(); ++i) {
      instance_of_graph_[grp.instances[i]] = instances_.size();
      instances_.push_back({g, grp.instances[i], grp.items[i]});
    }
  }
  for (const auto& ep : state_.episodes) met_seen_.push_back(ep.met);
  for (const auto& a : exec_->agents) trace_.agents.push_back(a.id);
}

void Engine::emit(TraceEvent e) {
  e.time = now_;
  trace_.events.push_back(std::move(e));
}

void Engine::schedule(double t, int kind, std::size_t job) {
  timers_.push({t, seq_++, kind, job});
}

std::string Engine::item_of(std::size_t graph) const {
  const std::size_t i = instance_of_graph_[graph];
  return i == ExecutionModel::npos ? std::string{} : instances_[i].item.str();
}

bool Engine::coordination_graph(std::size_t graph) const {
  const auto& g = exec_->model.graph(graph);
  for (const auto& h : g.arcs())
    if (!h.actions.empty()) return false;
  for (const auto& n : g.nodes())
    if (!n.processes.empty()) return false;
  return true;
}

double Engine::failure_probability(const Action& a) const {
  if (!config_.noise) return 0.0;
  if (auto it = config_.failure_overrides.find(a.id); it != config_.failure_overrides.end()) return it->second;
  return a.failure_probability;
}

PlannerContext Engine::context() const {
  PlannerContext ctx;
  ctx.agents = exec_->agents;
  for (const auto& [agent, job] : busy_) ctx.busy.insert(agent);
  for (const auto& j : jobs_)
    if (j.running && j.kind == Job::Kind::action) ctx.in_flight.insert({exec_->model.graph(j.graph).id(), j.arc});
  ctx.in_flight.insert(blocked_.begin(), blocked_.end());
  ctx.enabled.assign(exec_->model.graph_count(), true);
  for (std::size_t g = 0; g < exec_->model.graph_count(); ++g) {
    const std::size_t i = instance_of_graph_[g];
    if (i == ExecutionModel::npos) continue;
    const auto& inst = instances_[i];
    ctx.enabled[g] = inst.active && inst.ready_at <= now_;
  }
  return ctx;
}

Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

std::map<AgentId, std::string> Engine::busy_agents() const {
  std::map<AgentId, std::string> out;
  for (const auto& [agent, j] : busy_) {
    const auto& job = jobs_[j];
    const auto& g = exec_->model.graph(job.graph).id().str();
    out[agent] = job.kind == Job::Kind::action ? g + "/" + job.arc.str() + "/" + job.action.str()
                                               : g + "/" + exec_->model.graph(job.graph).node(job.node).id.str() +
                                                     "/" + job.process;
  }
  return out;
}

std::map<std::string, ItemId> Engine::active_items() const {
  std::map<std::string, ItemId> out;
  for (const auto& grp : exec_->groups) out[grp.name] = ItemId{};
  for (const auto& inst : instances_)
    if (inst.active) out[exec_->groups[inst.group].name] = inst.item;
  return out;
}

void Engine::log_changes(const std::vector<Change>& changes) {
  for (const auto& c : changes) {
    TraceEvent e;
    e.kind = to_string(c.kind);
    e.graph = c.graph.str();
    const bool node = c.kind == Change::Kind::node_met || c.kind == Change::Kind::entangled_met ||
                      c.kind == Change::Kind::entangled_idempotent;
    (node ? e.node : e.arc) = c.element;
    emit(std::move(e));
  }
  // Newly met nodes start their processes.
  for (std::size_t g = 0; g < state_.episodes.size(); ++g) {
    const auto& ep = state_.episodes[g];
    for (std::size_t n = 0; n < ep.met.size(); ++n) {
      if (!ep.met[n] || met_seen_[g][n]) continue;
      met_seen_[g][n] = true;
      start_processes(g, n);
    }
  }
}

void Engine::start_processes(std::size_t graph, std::size_t node) {
  const auto& procs = exec_->model.graph(graph).node(node).processes;
  for (const auto& p : procs) {
    waiting_processes_.emplace_back(graph, node);
    waiting_process_ids_.push_back(p.id);
    if (const std::size_t i = instance_of_graph_[graph]; i != ExecutionModel::npos) ++instances_[i].pending_processes;
  }
}

bool Engine::start_waiting_processes() {
  bool started = false;
  for (std::size_t w = 0; w < waiting_processes_.size();) {
    const auto [graph, node] = waiting_processes_[w];
    const auto& g = exec_->model.graph(graph);
    const auto& procs = g.node(node).processes;
    const auto& spec = *std::find_if(procs.begin(), procs.end(),
                                     [&](const ProcessSpec& p) { return p.id == waiting_process_ids_[w]; });
    std::optional<AgentId> who;
    bool external_only = true;
    for (const auto& a : exec_->agents) {
      if (!is_eligible(a, spec.eligible_agents)) continue;
      if (config_.external_agents.count(a.id)) continue;
      external_only = false;
      if (busy_.count(a.id)) continue;
      if (!who || a.id < *who) who = a.id;
    }
    if (!who && !external_only) {
      ++w;
      continue;
    }
    Job job;
    job.kind = Job::Kind::process;
    job.graph = graph;
    job.node = node;
    job.process = spec.id;
    job.start = now_;
    if (who) {
      job.agent = *who;
      const DurationModel d = config_.noise ? spec.duration : DurationModel{spec.duration.mean, 0.0};
      job.duration = rng_.duration({"process", g.id().str(), g.node(node).id.str(), spec.id}, d);
    }
    job.running = true;
    jobs_.push_back(job);
    if (who) busy_[*who] = jobs_.size() - 1;
    TraceEvent e;
    e.kind = "process-start";
    e.graph = g.id().str();
    e.node = g.node(node).id.str();
    e.action = spec.id;
    e.agent = job.agent.str();
    e.item = item_of(graph);
    e.value = job.duration;
    emit(std::move(e));
    schedule(now_ + job.duration, job_end, jobs_.size() - 1);
    waiting_processes_.erase(waiting_processes_.begin() + static_cast<std::ptrdiff_t>(w));
    waiting_process_ids_.erase(waiting_process_ids_.begin() + static_cast<std::ptrdiff_t>(w));
    started = true;
  }
  return started;
}

bool Engine::candidate(const Instance& inst) const {
  if (inst.active || inst.finished) return false;
  const auto& g = exec_->model.graph(inst.graph);
  const auto& ep = state_.episodes[inst.graph];
  for (const auto& l : exec_->model.entanglements())
    if (l.dependent.graph == g.id() && !ep.met[g.node_index(l.dependent.node)]) return false;
  return ep.status == EpisodeStatus::in_progress;
}

void Engine::activate(std::size_t i) {
  auto& inst = instances_[i];
  const auto& grp = exec_->groups[inst.group];
  const auto& g = exec_->model.graph(inst.graph);
  inst.active = true;
  if (!inst.item.empty()) trace_.visit_order[grp.name].push_back(inst.item);
  emit({0.0, "activate", g.id().str(), {}, {}, {}, {}, inst.item.str(), grp.name, 0.0});
  const auto& o = grp.overheads;
  const std::pair<const char*, double> parts[] = {
      {category::representation, o.representation}, {category::planning, o.planning}, {category::simulation, o.simulation}};
  for (const auto& [name, seconds] : parts) {
    if (seconds <= 0.0) continue;
    trace_.charges.push_back({grp.name, name, seconds});
    emit({0.0, "overhead", g.id().str(), {}, {}, {}, {}, inst.item.str(), name, seconds});
  }
  inst.ready_at = now_ + o.total();
  if (o.total() > 0.0) schedule(inst.ready_at, instance_ready, i);
  for (const auto& leaf : exec_->free_leaves(inst.graph)) {
    const auto& ep = state_.episodes[inst.graph];
    if (!ep.node_feasible[g.node_index(leaf)]) continue;
    handle(Event::met(g.id(), leaf));
  }
}

bool Engine::try_activate() {
  for (auto& inst : instances_)
    if (inst.available_since < 0.0 && candidate(inst)) inst.available_since = now_;

  auto pick = [&](std::size_t group) -> std::optional<std::size_t> {
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < instances_.size(); ++i)
      if (instances_[i].group == group && candidate(instances_[i])) ready.push_back(i);
    if (ready.empty()) return std::nullopt;
    const auto& grp = exec_->groups[group];
    if (grp.selection == Selection::rehearsal && ready.size() > 1) {
      std::map<ItemId, std::size_t> by_item;
      std::vector<ItemId> items;
      for (std::size_t i : ready) {
        by_item[instances_[i].item] = i;
        items.push_back(instances_[i].item);
      }
      SimConfig rc = config_;
      rc.external_agents.clear();
      rc.sequential = false;
      rc.check_invariants = false;
      const ItemId chosen = select_target(items, [&](const ItemId& item) {
        const std::size_t graph = instances_[by_item[item]].graph;
        auto cached = rehearsal_cache_.find(graph);
        if (cached == rehearsal_cache_.end())
          cached = rehearsal_cache_.emplace(graph, rehearse_instance(*exec_, graph, rc, rc.rehearsal_samples)).first;
        return cached->second;
      });
      return by_item[chosen];
    }
    return *std::min_element(ready.begin(), ready.end(), [&](std::size_t a, std::size_t b) {
      if (instances_[a].available_since != instances_[b].available_since)
        return instances_[a].available_since < instances_[b].available_since;
      return a < b;
    });
  };

  bool any = false;
  // Coordination graphs carry no work and are always active.
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (!instances_[i].active && !instances_[i].finished && coordination_graph(instances_[i].graph) &&
        candidate(instances_[i])) {
      activate(i);
      any = true;
    }
  }
  if (config_.sequential) {
    for (const auto& inst : instances_)
      if (inst.active && !coordination_graph(inst.graph)) return any;
    for (std::size_t g = 0; g < exec_->groups.size(); ++g) {
      if (auto i = pick(g)) {
        activate(*i);
        return true;
      }
    }
    return any;
  }
  for (std::size_t g = 0; g < exec_->groups.size(); ++g) {
    bool busy = false;
    for (const auto& inst : instances_) busy = busy || (inst.group == g && inst.active);
    if (busy) continue;
    if (auto i = pick(g)) {
      activate(*i);
      any = true;
    }
  }
  return any;
}

bool Engine::settle_and_activate() {
  bool any = false;
  for (;;) {
    std::vector<Change> changes;
    auto issued = settle(exec_->model, state_, &changes);
    for (const auto& e : issued) {
      TraceEvent t;
      t.kind = e.kind == Event::Kind::node_met ? "confirm-met" : "confirm-solved";
      t.graph = e.graph.str();
      t.node = e.node.str();
      t.arc = e.arc.str();
      t.item = item_of(exec_->model.graph_index(e.graph));
      emit(std::move(t));
    }
    if (!issued.empty()) {
      log_changes(changes);
      planner_.refresh(state_);
      if (config_.check_invariants) check_invariants();
    }
    bool progressed = !issued.empty();
    for (auto& inst : instances_) {
      if (!inst.active) continue;
      const auto& ep = state_.episodes[inst.graph];
      const bool done = ep.status == EpisodeStatus::solved && inst.pending_processes == 0;
      if (done || ep.status == EpisodeStatus::failed) {
        inst.active = false;
        inst.finished = true;
        emit({0.0, done ? "instance-done" : "instance-failed", exec_->model.graph(inst.graph).id().str(), {}, {}, {},
              {}, inst.item.str(), exec_->groups[inst.group].name, 0.0});
        progressed = true;
      }
    }
    if (try_activate()) progressed = true;
    if (!progressed) return any;
    any = true;
  }
}

std::optional<Suggestion> Engine::redirect(const Suggestion& s) const {
  const std::size_t gi = exec_->model.graph_index(s.graph);
  const auto& g = exec_->model.graph(gi);
  const auto& h = g.arc(g.arc_index(s.arc));
  auto it = exec_->outcomes.find(s.graph);
  if (h.outcome.empty() || it == exec_->outcomes.end() || it->second.empty() || it->second == h.outcome) return s;
  const auto& ep = state_.episodes[gi];
  const auto ctx = context();
  const std::size_t from = g.arc_index(s.arc);
  for (std::size_t a = 0; a < g.arc_count(); ++a) {
    const auto& sib = g.arc(a);
    if (sib.outcome != it->second) continue;
    bool shares = false;
    for (std::size_t c : g.arc_children(a)) {
      const auto& fc = g.arc_children(from);
      shares = shares || std::find(fc.begin(), fc.end(), c) != fc.end();
    }
    if (!shares) continue;
    // The perceived branch exists: never run the suggested one instead.
    if (!ep.arc_feasible[a] || ep.backed[a] || ep.done_actions[a] >= sib.actions.size() ||
        ctx.in_flight.count({s.graph, sib.id}))
      return std::nullopt;
    std::vector<AgentSpec> idle;
    for (const auto& agent : exec_->agents)
      if (!busy_.count(agent.id) && !config_.external_agents.count(agent.id)) idle.push_back(agent);
    const auto& action = sib.actions[ep.done_actions[a]];
    auto who = allocate_action(action, idle);
    if (!who) return std::nullopt;
    return Suggestion{*who, s.graph, sib.id, action.id,
                      "perceived outcome '" + it->second + "' overrides " + s.arc.str(), action.duration.mean};
  }
  return s;
}

void Engine::start_suggested() {
  for (bool started = true; started;) {
    started = false;
    pending_.clear();
    const auto suggestions = next_suggestions(exec_->model, state_, context());
    for (const auto& s : suggestions) {
      if (config_.external_agents.count(s.agent)) {
        pending_.push_back(s);
        continue;
      }
      auto r = redirect(s);
      if (!r) continue;
      const bool override_action = !(r->arc == s.arc);
      if (busy_.count(r->agent)) continue;
      const ArcRef ref{r->graph, r->arc};
      const auto ctx = context();
      if (ctx.in_flight.count(ref)) continue;
      const std::size_t gi = exec_->model.graph_index(r->graph);
      const auto& g = exec_->model.graph(gi);
      const auto& h = g.arc(g.arc_index(r->arc));
      const auto& action = *std::find_if(h.actions.begin(), h.actions.end(),
                                         [&](const Action& a) { return a.id == r->action; });
      Job job;
      job.kind = Job::Kind::action;
      job.agent = r->agent;
      job.graph = gi;
      job.arc = r->arc;
      job.action = r->action;
      job.start = now_;
      job.attempt = attempts_[{g.id().str(), r->arc.str(), r->action.str()}]++;
      job.override_action = override_action;
      const DurationModel d = config_.noise ? action.duration : DurationModel{action.duration.mean, 0.0};
      job.duration = rng_.duration({"duration", g.id().str(), r->arc.str(), r->action.str(), std::to_string(job.attempt)}, d);
      job.running = true;
      jobs_.push_back(job);
      busy_[r->agent] = jobs_.size() - 1;
      TraceEvent e;
      e.kind = override_action ? "override-start" : "action-start";
      e.graph = g.id().str();
      e.arc = r->arc.str();
      e.action = r->action.str();
      e.agent = r->agent.str();
      e.item = item_of(gi);
      e.detail = r->rationale;
      e.value = job.duration;
      emit(std::move(e));
      schedule(now_ + job.duration, job_end, jobs_.size() - 1);
      started = true;
    }
  }
}

void Engine::update_finished() {
  if (finished_) return;
  if (!model_solved(exec_->model, state_) || !busy_.empty() || !waiting_processes_.empty()) return;
  for (const auto& inst : instances_)
    if (inst.active) return;
  finished_ = true;
  trace_.status = "solved";
  trace_.makespan = now_;
  emit({0.0, "model-solved", {}, {}, {}, {}, {}, {}, {}, now_});
}

void Engine::dispatch() {
  settle_and_activate();
  for (;;) {
    const bool procs = start_waiting_processes();
    const bool more = settle_and_activate();
    if (!procs && !more) break;
  }
  update_finished();
  if (finished_) {
    pending_.clear();
    return;
  }
  start_suggested();
  for (std::size_t g = 0; g < state_.episodes.size(); ++g) trace_.final_status[exec_->model.graph(g).id()] = state_.episodes[g].status;
}

EventOutcome Engine::handle(const Event& e) {
  auto outcome = planner_.handle_event(state_, e, context());
  log_changes(outcome.changes);
  for (const auto& g : outcome.replanned) emit({0.0, "replanned", g.str(), {}, {}, {}, {}, {}, {}, 0.0});
  if (config_.check_invariants) check_invariants();
  return outcome;
}

void Engine::finish_job(std::size_t j, double t) {
  now_ = t;
  Job& job = jobs_[j];
  const auto& g = exec_->model.graph(job.graph);
  const std::string group =
      exec_->group_of(job.graph) == ExecutionModel::npos ? g.id().str() : exec_->groups[exec_->group_of(job.graph)].name;

  if (job.kind == Job::Kind::process) {
    job.running = false;
    if (!job.agent.empty()) {
      busy_.erase(job.agent);
      trace_.intervals.push_back({job.agent, job.start, t, g.id().str() + "/" + job.process});
      trace_.charges.push_back({group, job.agent.str(), t - job.start});
    }
    if (const std::size_t i = instance_of_graph_[job.graph]; i != ExecutionModel::npos) --instances_[i].pending_processes;
    emit({0.0, "process-done", g.id().str(), g.node(job.node).id.str(), {}, job.process, job.agent.str(),
          item_of(job.graph), {}, 0.0});
    dispatch();
    return;
  }

  const auto& h = g.arc(g.arc_index(job.arc));
  const auto& action = *std::find_if(h.actions.begin(), h.actions.end(), [&](const Action& a) { return a.id == job.action; });
  const std::vector<std::string> key{g.id().str(), job.arc.str(), job.action.str(), std::to_string(job.attempt)};
  const AgentSpec* agent = exec_->find_agent(job.agent);

  auto close = [&] {
    job.running = false;
    busy_.erase(job.agent);
    trace_.intervals.push_back({job.agent, job.start, t, g.id().str() + "/" + job.arc.str() + "/" + job.action.str()});
    trace_.charges.push_back({group, job.agent.str(), t - job.start});
  };

  if (job.misses == 0) {
    auto k = key;
    k.insert(k.begin(), "failure");
    if (rng_.uniform(k) < failure_probability(action)) {
      close();
      emit({0.0, "action-failed", g.id().str(), {}, job.arc.str(), job.action.str(), job.agent.str(), item_of(job.graph),
            {}, 0.0});
      handle(Event::failed(g.id(), job.arc, job.action, job.agent));
      const ArcRef ref{g.id(), job.arc};
      blocked_.insert(ref);
      schedule(t + config_.retry_delay, unblock, j);
      dispatch();
      return;
    }
  }
  if (config_.noise && agent && agent->human() && exec_->is_gesture_action(job.action)) {
    auto k = key;
    k.insert(k.begin(), "gesture-" + std::to_string(job.misses));
    if (rng_.uniform(k) < agent->gesture_miss_probability) {
      ++job.misses;
      emit({0.0, "gesture-missed", g.id().str(), {}, job.arc.str(), job.action.str(), job.agent.str(),
            item_of(job.graph), {}, config_.repeat_delay});
      schedule(t + config_.repeat_delay, job_end, j);
      return;
    }
  }
  close();
  emit({0.0, job.override_action ? "override-done" : "action-done", g.id().str(), {}, job.arc.str(), job.action.str(),
        job.agent.str(), item_of(job.graph), {}, t - job.start});
  handle(job.override_action ? Event::override_by(job.agent, g.id(), job.arc, job.action)
                             : Event::done(g.id(), job.arc, job.action, job.agent));
  dispatch();
}

void Engine::start() {
  if (started_) return;
  started_ = true;
  planner_.refresh(state_);
  emit({0.0, "start", {}, {}, {}, {}, {}, {}, "seed " + std::to_string(config_.seed) + (config_.sequential ? " sequential" : " concurrent"), 0.0});
  dispatch();
}

std::vector<TraceEvent> Engine::advance(double dt) {
  if (dt < 0.0 || !std::isfinite(dt)) throw std::invalid_argument("advance: duration must be a finite non-negative number");
  start();
  const std::size_t mark = trace_.events.size();
  const double target = now_ + dt;
  while (!finished_ && !timers_.empty() && timers_.top().time <= target) {
    const Timer t = timers_.top();
    timers_.pop();
    if (t.time > config_.max_time) break;
    now_ = t.time;
    switch (t.kind) {
      case job_end: finish_job(t.job, t.time); break;
      case unblock:
        blocked_.erase({exec_->model.graph(jobs_[t.job].graph).id(), jobs_[t.job].arc});
        dispatch();
        break;
      case instance_ready: dispatch(); break;
    }
  }
  if (!finished_) now_ = target;
  return {trace_.events.begin() + static_cast<std::ptrdiff_t>(mark), trace_.events.end()};
}

void Engine::run_to_end() {
  start();
  while (!finished_ && !timers_.empty()) {
    const Timer t = timers_.top();
    if (t.time > config_.max_time) {
      now_ = config_.max_time;
      trace_.status = "aborted";
      trace_.makespan = now_;
      emit({0.0, "aborted", {}, {}, {}, {}, {}, {}, "max simulated time exceeded", now_});
      return;
    }
    advance(t.time - now_);
  }
  if (!finished_) {
    trace_.status = "failed";
    trace_.makespan = now_;
    emit({0.0, "stalled", {}, {}, {}, {}, {}, {}, "no scheduled work and the model is not solved", now_});
  }
}

EventOutcome Engine::submit(const Event& event) {
  start();
  if (finished_) throw ProtocolViolation("session already finished");
  if (event.kind == Event::Kind::arc_solved) throw ProtocolViolation("arc-solved is internal");
  if (!event.agent.empty() && !config_.external_agents.count(event.agent) && busy_.count(event.agent))
    throw ProtocolViolation("agent '" + event.agent.str() + "' is busy");
  if (event.kind != Event::Kind::node_met) {
    const auto ctx = context();
    if (ctx.in_flight.count({event.graph, event.arc}))
      throw ProtocolViolation("hyper-arc '" + event.graph.str() + "/" + event.arc.str() + "' is already being executed");
  }
  auto outcome = handle(event);
  TraceEvent e;
  e.kind = std::string("external-") + to_string(event.kind);
  e.graph = event.graph.str();
  e.node = event.node.str();
  e.arc = event.arc.str();
  e.action = event.action.str();
  e.agent = event.agent.str();
  emit(std::move(e));
  dispatch();
  outcome.suggestions = pending_;
  return outcome;
}

void Engine::check_invariants() const {
  const auto& m = exec_->model;
  for (const auto& l : m.entanglements()) {
    const auto& s = state_.at(m, l.source.graph);
    const auto& d = state_.at(m, l.dependent.graph);
    if (s.met[s.graph->node_index(l.source.node)] != d.met[d.graph->node_index(l.dependent.node)])
      throw Error(ErrorKind::runtime, "invariant: entangled node " + l.dependent.node.str() + " out of sync");
  }
  for (const auto& ep : state_.episodes) {
    const auto& g = *ep.graph;
    for (std::size_t a = 0; a < g.arc_count(); ++a) {
      if (ep.backed[a]) continue;
      bool all_met = true;
      for (std::size_t c : g.arc_children(a)) all_met = all_met && ep.met[c];
      if (ep.arc_feasible[a] != (all_met && !ep.solved[a] && !ep.suppressed[a]))
        throw Error(ErrorKind::runtime, "invariant: feasibility of " + g.id().str() + "/" + g.arc(a).id.str());
    }
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      bool by_arc = false;
      for (std::size_t a : g.arcs_with_parent(n)) by_arc = by_arc || ep.solved[a];
      if (ep.node_feasible[n] != (!ep.met[n] && (g.is_leaf(n) || by_arc)))
        throw Error(ErrorKind::runtime, "invariant: feasibility of " + g.id().str() + "/" + g.node(n).id.str());
    }
  }
  for (const auto& t : m.transitions()) {
    const auto& up = state_.at(m, t.arc.graph);
    const auto& sub = state_.at(m, t.subgraph);
    const std::size_t a = up.graph->arc_index(t.arc.arc);
    if (up.suppressed[a]) continue;
    if (up.solved[a] != (sub.status == EpisodeStatus::solved) || up.arc_feasible[a] != graph_feasible(sub))
      throw Error(ErrorKind::runtime, "invariant: backed arc " + t.arc.arc.str() + " out of sync");
  }
}

ExecutionTrace run(const ExecutionModel& exec, const SimConfig& config) {
  Engine engine(std::make_shared<ExecutionModel>(exec), config);
  engine.run_to_end();
  return engine.trace();
}

double rehearse(const std::vector<Action>& actions, const AgentSpec* agent, const SimConfig& config, int samples) {
  if (samples < 1) throw std::invalid_argument("rehearse: samples must be >= 1");
  if (agent)
    for (const auto& a : actions)
      if (!is_eligible(*agent, a.eligible_agents))
        throw std::invalid_argument("rehearse: agent '" + agent->id.str() + "' is not eligible for '" + a.id.str() + "'");
  KeyedRng rng(config.seed);
  double sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    double t = 0.0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const auto& a = actions[i];
      const double p = config.noise ? (config.failure_overrides.count(a.id) ? config.failure_overrides.at(a.id)
                                                                            : a.failure_probability)
                                    : 0.0;
      const DurationModel d = config.noise ? a.duration : DurationModel{a.duration.mean, 0.0};
      for (int attempt = 0; attempt < 100000; ++attempt) {
        const std::vector<std::string> key{"rehearse", std::to_string(s), std::to_string(i), a.id.str(),
                                           std::to_string(attempt)};
        t += rng.duration(key, d);
        auto fk = key;
        fk.push_back("failure");
        if (rng.uniform(fk) >= p) break;
        t += config.retry_delay;
      }
    }
    sum += t;
  }
  return sum / samples;
}

double rehearse_instance(const ExecutionModel& exec, std::size_t graph_index, const SimConfig& config, int samples) {
  if (samples < 1) throw std::invalid_argument("rehearse_instance: samples must be >= 1");
  auto fragment = std::make_shared<ExecutionModel>(standalone(exec, graph_index));
  const int n = config.noise ? samples : 1;
  double sum = 0.0;
  for (int s = 0; s < n; ++s) {
    SimConfig c = config;
    c.seed = key_hash(config.seed, {"rehearsal", std::to_string(s)});
    c.sequential = false;
    c.external_agents.clear();
    c.check_invariants = false;
    Engine e(fragment, c);
    e.run_to_end();
    sum += e.trace().makespan;
  }
  return sum / n;
}

Comparison compare_concurrent_sequential(const ExecutionModel& exec, const SimConfig& config) {
  Comparison c;
  SimConfig conc = config;
  conc.sequential = false;
  SimConfig seq = config;
  seq.sequential = true;
  c.concurrent_trace = run(exec, conc);
  c.sequential_trace = run(exec, seq);
  c.concurrent = c.concurrent_trace.makespan;
  c.sequential = c.sequential_trace.makespan;
  c.ratio = c.sequential > 0.0 ? c.concurrent / c.sequential : 1.0;
  return c;
}

namespace {

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

TimingReport report(const std::vector<ExecutionTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("report: no traces");
  TimingReport r;
  r.runs = traces.size();
  std::vector<std::string> branches;
  std::map<std::string, std::vector<std::string>> cats;
  for (const auto& t : traces)
    for (const auto& c : t.charges) {
      if (std::find(branches.begin(), branches.end(), c.group) == branches.end()) branches.push_back(c.group);
      auto& v = cats[c.group];
      if (std::find(v.begin(), v.end(), c.category) == v.end()) v.push_back(c.category);
    }
  const std::vector<std::string> fixed{category::representation, category::planning, category::simulation};
  for (const auto& b : branches) {
    auto& v = cats[b];
    std::stable_partition(v.begin(), v.end(), [&](const std::string& c) {
      return std::find(fixed.begin(), fixed.end(), c) != fixed.end();
    });
    std::stable_sort(v.begin(), v.begin() + std::count_if(v.begin(), v.end(), [&](const std::string& c) {
                                              return std::find(fixed.begin(), fixed.end(), c) != fixed.end();
                                            }),
                     [&](const std::string& x, const std::string& y) {
                       return std::find(fixed.begin(), fixed.end(), x) < std::find(fixed.begin(), fixed.end(), y);
                     });
    BranchReport br;
    br.branch = b;
    std::vector<double> totals(traces.size(), 0.0);
    for (const auto& c : v) {
      std::vector<double> per_run;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        double s = 0.0;
        for (const auto& ch : traces[i].charges)
          if (ch.group == b && ch.category == c) s += ch.seconds;
        per_run.push_back(s);
        totals[i] += s;
      }
      br.categories.push_back({c, mean_of(per_run), 0.0, stddev(per_run)});
    }
    br.total = mean_of(totals);
    br.total_std_dev = stddev(totals);
    for (auto& c : br.categories) c.share = br.total > 0.0 ? 100.0 * c.mean / br.total : 0.0;
    r.branches.push_back(std::move(br));
  }
  std::vector<double> makespans;
  for (const auto& t : traces) makespans.push_back(t.makespan);
  r.makespan = mean_of(makespans);
  r.makespan_std_dev = stddev(makespans);
  for (const auto& agent : traces.front().agents) {
    std::vector<double> idle;
    for (const auto& t : traces) {
      double busy = 0.0;
      for (const auto& iv : t.intervals)
        if (iv.agent == agent) busy += iv.end - iv.start;
      idle.push_back(t.makespan - busy);
    }
    r.idle[agent] = mean_of(idle);
  }
  return r;
}

TimingReport report(const ExecutionTrace& trace) {
  return report(std::vector<ExecutionTrace>{trace});
}

void write_report(std::ostream& os, const TimingReport& r) {
  os << std::fixed;
  os << "runs " << r.runs << "\n";
  os << "makespan " << std::setprecision(2) << r.makespan << " s (std-dev " << r.makespan_std_dev << " s)\n";
  for (const auto& b : r.branches) {
    os << "\nbranch " << b.branch << "\n";
    os << std::left << std::setw(24) << "module" << std::right << std::setw(14) << "avg time [s]" << std::setw(14)
       << "avg time [%]" << std::setw(14) << "std-dev [s]" << "\n";
    for (const auto& c : b.categories)
      os << std::left << std::setw(24) << c.name << std::right << std::setw(14) << std::setprecision(3) << c.mean
         << std::setw(14) << c.share << std::setw(14) << c.std_dev << "\n";
    os << std::left << std::setw(24) << "total" << std::right << std::setw(14) << b.total << std::setw(14) << 100.0
       << std::setw(14) << b.total_std_dev << "\n";
  }
  os << "\nidle time per agent [s]\n";
  for (const auto& [agent, idle] : r.idle) os << "  " << std::left << std::setw(22) << agent.str() << std::right
                                              << std::setprecision(2) << idle << "\n";
}

}  // namespace hrcplan
