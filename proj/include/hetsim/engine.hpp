/*
 * Copyright 2026 the hetsim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "hetsim/common.hpp"
#include "hetsim/distribution.hpp"
#include "hetsim/graph.hpp"
#include "hetsim/rng.hpp"

namespace hetsim {

struct SimConfig {
  int cpu_workers = 12;
  long frames_per_stream = 1;
  std::uint64_t seed = 0;
  double warmup_fraction = 0.10;
  std::optional<SimTime> max_sim_time;
};

enum class EventKind {
  MsgDequeued,
  CoreAcquired,
  CoreReleased,
  ResourceAcquired,
  ResourceReleased,
  ServiceStarted,
  ServiceFinished,
  MsgEmitted,
  FrameCompleted,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::MsgDequeued: return "msg_dequeued";
    case EventKind::CoreAcquired: return "core_acquired";
    case EventKind::CoreReleased: return "core_released";
    case EventKind::ResourceAcquired: return "resource_acquired";
    case EventKind::ResourceReleased: return "resource_released";
    case EventKind::ServiceStarted: return "service_started";
    case EventKind::ServiceFinished: return "service_finished";
    case EventKind::MsgEmitted: return "msg_emitted";
    case EventKind::FrameCompleted: return "frame_completed";
  }
  return "?";
}

struct EventRecord {
  SimTime time = 0;
  int node = -1;  // index into SimResult::node_names
  EventKind kind = EventKind::MsgDequeued;
  int stream = -1;
  long frame = -1;
};

struct Message {
  int stream = -1;
  long frame = -1;
  SimTime created_at = 0;
  std::vector<std::pair<int, SimTime>> provenance;  // (node instance, completion time)
};

struct SimResult {
  std::vector<EventRecord> events;
  SimTime end_time = 0;
  std::vector<std::vector<SimTime>> per_stream_completion;  // stream -> completion times
  std::map<std::string, SimTime> resource_busy_time;        // "workers" + resource names
  std::map<std::string, SimTime> node_busy_time;            // node class -> service time
  std::map<std::string, long> max_queue_depth;              // node class -> max input backlog
  bool timed_out = false;
  SimConfig cfg;
  std::vector<std::string> node_names;   // instance names, indexed by EventRecord::node
  std::vector<std::string> node_class;   // spec name per instance
  std::vector<int> node_stream;          // stream per instance (-1 shared)

  long total_completions() const {
    long n = 0;
    for (const auto& v : per_stream_completion) n += static_cast<long>(v.size());
    return n;
  }
};

namespace detail {

// One simulation run. Every node instance is a sequential logical process;
// the calendar orders work by (time, sequence number), which gives a total
// deterministic order, FIFO grants included.
class Engine {
public:
  Engine(const RuntimeGraph& g, const SimConfig& cfg) : g_(g), cfg_(cfg) {
    if (cfg.cpu_workers < 1) throw Error("simulate: cpu_workers must be >= 1");
    if (cfg.frames_per_stream < 1) throw Error("simulate: frames_per_stream must be >= 1");
    if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0))
      throw Error("simulate: warmup_fraction must be in [0,1)");
  }

  SimResult run() {
    init();
    for (int i = 0; i < static_cast<int>(g_.nodes.size()); ++i)
      if (g_.nodes[i].kind == NodeKind::Source) try_begin(i);

    while (!calendar_.empty()) {
      Event ev = calendar_.top();
      if (cfg_.max_sim_time && ev.time > *cfg_.max_sim_time) {
        result_.timed_out = true;
        break;
      }
      calendar_.pop();
      now_ = ev.time;
      switch (ev.type) {
        case Event::WorkerGrant: on_worker_grant(ev.node, static_cast<int>(ev.a)); break;
        case Event::ResourceGrant: on_resource_grant(ev.node); break;
        case Event::ServiceDone: on_service_done(ev.node); break;
        case Event::Arrival: arrive(ev.node, ev.a); break;
      }
    }

    finish();
    return std::move(result_);
  }

private:
  struct Event {
    enum Type { WorkerGrant, ResourceGrant, ServiceDone, Arrival };
    SimTime time;
    std::uint64_t seq;
    Type type;
    int node;
    long a;  // phase for WorkerGrant, message index for Arrival

    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      return seq > o.seq;
    }
  };

  struct NodeState {
    bool busy = false;
    long next_frame = 0;  // sources only
    std::deque<long> ready;
    std::map<std::pair<int, long>, std::vector<long>> assembling;  // all_of partial groups
    long current_msg = -1;
    RngState rng;
    std::vector<RngState> edge_rng;
    long max_depth = 0;
    std::vector<char> done_frames;  // sinks: first-receipt marks for the own stream
    long done_count = 0;
    SimTime core_since = 0, resource_since = 0, service_since = 0;
  };

  struct Pool {
    int free = 0;
    std::deque<std::pair<int, int>> waiters;  // (node, phase)
  };

  void init() {
    result_.cfg = cfg_;
    result_.per_stream_completion.assign(g_.streams, {});
    for (const auto& n : g_.nodes) {
      result_.node_names.push_back(n.name);
      result_.node_class.push_back(n.spec_name);
      result_.node_stream.push_back(n.stream);
    }
    state_.resize(g_.nodes.size());
    int sinks_per_stream = 0;
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      const auto& n = g_.nodes[i];
      auto& st = state_[i];
      st.rng = RngState(cfg_.seed, n.rng_stream);
      st.edge_rng.reserve(n.out.size());
      for (const auto& e : n.out) st.edge_rng.emplace_back(cfg_.seed, e.rng_stream);
      if (n.kind == NodeKind::Sink) {
        st.done_frames.assign(cfg_.frames_per_stream, 0);
        if (n.stream == 0) ++sinks_per_stream;
      }
    }
    remaining_sinks_.assign(g_.streams,
                            std::vector<int>(cfg_.frames_per_stream, sinks_per_stream));
    workers_.free = cfg_.cpu_workers;
    resources_.resize(g_.resources.size());
    for (std::size_t i = 0; i < g_.resources.size(); ++i)
      resources_[i].free = g_.resources[i].capacity;
  }

  void record(int node, EventKind kind, int stream, long frame) {
    result_.events.push_back({now_, node, kind, stream, frame});
  }

  void schedule(SimTime t, typename Event::Type type, int node, long a) {
    calendar_.push({t, ++seq_, type, node, a});
  }

  // --- messages ----------------------------------------------------------

  long new_message(Message m) {
    pool_.push_back(std::move(m));
    return static_cast<long>(pool_.size()) - 1;
  }

  std::pair<int, long> msg_ctx(int node) const {
    const auto& st = state_[node];
    if (g_.nodes[node].kind == NodeKind::Source)
      return {g_.nodes[node].stream, st.next_frame};
    if (st.current_msg >= 0) return {pool_[st.current_msg].stream, pool_[st.current_msg].frame};
    return {g_.nodes[node].stream, -1};
  }

  // --- worker pool and resources -----------------------------------------

  void request_worker(int node, int phase) {
    if (workers_.free > 0) {
      --workers_.free;
      on_worker_grant(node, phase);
    } else {
      workers_.waiters.push_back({node, phase});
    }
  }

  void release_worker(int node) {
    auto [s, f] = msg_ctx(node);
    record(node, EventKind::CoreReleased, s, f);
    workers_busy_ += now_ - state_[node].core_since;
    if (!workers_.waiters.empty()) {
      auto [j, ph] = workers_.waiters.front();
      workers_.waiters.pop_front();
      schedule(now_, Event::WorkerGrant, j, ph);
    } else {
      ++workers_.free;
    }
  }

  void request_resource(int node) {
    int r = g_.nodes[node].resource;
    if (resources_[r].free > 0) {
      --resources_[r].free;
      on_resource_grant(node);
    } else {
      resources_[r].waiters.push_back({node, 0});
    }
  }

  void release_resource(int node) {
    int r = g_.nodes[node].resource;
    auto [s, f] = msg_ctx(node);
    record(node, EventKind::ResourceReleased, s, f);
    resource_busy_[r] += now_ - state_[node].resource_since;
    if (!resources_[r].waiters.empty()) {
      int j = resources_[r].waiters.front().first;
      resources_[r].waiters.pop_front();
      schedule(now_, Event::ResourceGrant, j, 0);
    } else {
      ++resources_[r].free;
    }
  }

  // --- node process ------------------------------------------------------

  void try_begin(int node) {
    auto& st = state_[node];
    if (st.busy) return;
    const auto& n = g_.nodes[node];
    if (n.kind == NodeKind::Source) {
      if (st.next_frame >= cfg_.frames_per_stream) return;
      st.busy = true;
      request_worker(node, 0);
      return;
    }
    if (st.ready.empty()) return;
    st.busy = true;
    st.current_msg = st.ready.front();
    st.ready.pop_front();
    record(node, EventKind::MsgDequeued, pool_[st.current_msg].stream, pool_[st.current_msg].frame);
    request_worker(node, 0);
  }

  void on_worker_grant(int node, int phase) {
    auto& st = state_[node];
    st.core_since = now_;
    auto [s, f] = msg_ctx(node);
    record(node, EventKind::CoreAcquired, s, f);
    if (phase == 1) {
      emit_and_finish(node);
      return;
    }
    if (g_.nodes[node].kind == NodeKind::Exclusive) {
      request_resource(node);
    } else {
      start_service(node);
    }
  }

  // Exclusive nodes yield their core for the whole resource service and
  // only take a new one to broadcast the output afterwards.
  void on_resource_grant(int node) {
    auto& st = state_[node];
    st.resource_since = now_;
    auto [s, f] = msg_ctx(node);
    record(node, EventKind::ResourceAcquired, s, f);
    release_worker(node);
    start_service(node);
  }

  void start_service(int node) {
    auto& st = state_[node];
    SimTime dur = round_duration_us(g_.nodes[node].service->sample(st.rng));
    auto [s, f] = msg_ctx(node);
    record(node, EventKind::ServiceStarted, s, f);
    st.service_since = now_;
    schedule(now_ + dur, Event::ServiceDone, node, 0);
  }

  void on_service_done(int node) {
    auto& st = state_[node];
    const auto& n = g_.nodes[node];
    auto [s, f] = msg_ctx(node);
    record(node, EventKind::ServiceFinished, s, f);
    node_busy_[node] += now_ - st.service_since;
    if (n.kind == NodeKind::Exclusive) {
      release_resource(node);
      request_worker(node, 1);
      return;
    }
    emit_and_finish(node);
  }

  void emit_and_finish(int node) {
    auto& st = state_[node];
    const auto& n = g_.nodes[node];

    long out_msg = -1;
    if (n.kind == NodeKind::Source) {
      Message m;
      m.stream = n.stream;
      m.frame = st.next_frame;
      m.created_at = now_;
      m.provenance = {{node, now_}};
      out_msg = new_message(std::move(m));
      ++st.next_frame;
    } else {
      Message m = pool_[st.current_msg];
      m.provenance.emplace_back(node, now_);
      out_msg = new_message(std::move(m));
    }
    const Message& m = pool_[out_msg];
    record(node, EventKind::MsgEmitted, m.stream, m.frame);

    if (n.kind == NodeKind::Sink) {
      if (!st.done_frames[m.frame]) {
        st.done_frames[m.frame] = 1;
        ++st.done_count;
        record(node, EventKind::FrameCompleted, m.stream, m.frame);
        if (--remaining_sinks_[m.stream][m.frame] == 0)
          result_.per_stream_completion[m.stream].push_back(now_);
      }
    } else {
      for (std::size_t i = 0; i < n.out.size(); ++i) {
        const auto& e = n.out[i];
        if (e.stream_tag >= 0 && e.stream_tag != m.stream) continue;
        if (e.latency) {
          SimTime lat = round_duration_us(e.latency->sample(st.edge_rng[i]));
          schedule(now_ + lat, Event::Arrival, e.to, out_msg);
        } else {
          arrive(e.to, out_msg);
        }
      }
    }

    st.current_msg = -1;
    release_worker(node);
    st.busy = false;
    try_begin(node);
  }

  void arrive(int node, long msg_idx) {
    auto& st = state_[node];
    const auto& n = g_.nodes[node];
    const Message& m = pool_[msg_idx];
    int preds = n.in_degree_by_stream[m.stream];
    if (n.join == JoinPolicy::AllOf && preds > 1) {
      auto key = std::make_pair(m.stream, m.frame);
      auto& group = st.assembling[key];
      group.push_back(msg_idx);
      if (static_cast<int>(group.size()) >= preds) {
        Message merged;
        merged.stream = m.stream;
        merged.frame = m.frame;
        merged.created_at = pool_[group.front()].created_at;
        for (long part : group) {
          merged.created_at = std::min(merged.created_at, pool_[part].created_at);
          for (const auto& p : pool_[part].provenance) merged.provenance.push_back(p);
        }
        std::stable_sort(merged.provenance.begin(), merged.provenance.end(),
                         [](const auto& a, const auto& b) { return a.second < b.second; });
        st.assembling.erase(key);
        st.ready.push_back(new_message(std::move(merged)));
      }
    } else {
      st.ready.push_back(msg_idx);
    }
    st.max_depth = std::max(st.max_depth,
                            static_cast<long>(st.ready.size() + st.assembling.size()));
    try_begin(node);
  }

  // --- wrap-up -----------------------------------------------------------

  void finish() {
    result_.end_time = result_.events.empty() ? 0 : result_.events.back().time;
    if (result_.timed_out && cfg_.max_sim_time) result_.end_time = *cfg_.max_sim_time;

    result_.resource_busy_time["workers"] = workers_busy_;
    for (std::size_t i = 0; i < g_.resources.size(); ++i)
      result_.resource_busy_time[g_.resources[i].name] = resource_busy_[i];
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      result_.node_busy_time[g_.nodes[i].spec_name] += node_busy_[i];
      auto& d = result_.max_queue_depth[g_.nodes[i].spec_name];
      d = std::max(d, state_[i].max_depth);
    }

    if (!result_.timed_out) {
      std::string missing;
      for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
        if (g_.nodes[i].kind != NodeKind::Sink) continue;
        if (state_[i].done_count < cfg_.frames_per_stream) {
          missing += "\n  sink " + g_.nodes[i].name + ": " + std::to_string(state_[i].done_count) +
                     "/" + std::to_string(cfg_.frames_per_stream) + " frames";
        }
      }
      if (!missing.empty()) {
        for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
          for (const auto& [key, group] : state_[i].assembling) {
            missing += "\n  waiting join at " + g_.nodes[i].name + ": stream " +
                       std::to_string(key.first) + " frame " + std::to_string(key.second) +
                       " has " + std::to_string(group.size()) + "/" +
                       std::to_string(g_.nodes[i].in_degree_by_stream[key.first]) + " inputs";
          }
        }
        throw DeadlockError("deadlock: no schedulable event with frames remaining" + missing);
      }
    }
  }

  const RuntimeGraph& g_;
  SimConfig cfg_;
  SimResult result_;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> calendar_;
  std::deque<Message> pool_;
  std::vector<NodeState> state_;
  Pool workers_;
  std::vector<Pool> resources_;
  std::vector<std::vector<int>> remaining_sinks_;  // [stream][frame] sinks still missing
  SimTime workers_busy_ = 0;
  std::map<int, SimTime> resource_busy_;
  std::map<int, SimTime> node_busy_;
};

}  // namespace detail

/// Run the instantiated graph to completion (every sink sees every frame of
/// its stream) or until max_sim_time. Deterministic: equal (graph, cfg)
/// produce identical event logs.
inline SimResult simulate(const RuntimeGraph& graph, const SimConfig& cfg) {
  detail::Engine engine(graph, cfg);
  return engine.run();
}

/// Rank resources, the worker pool, and node classes by busy-time
/// utilization inside the post-warm-up window. The top entry is the
/// bottleneck candidate.
inline std::vector<std::pair<std::string, double>> detect_bottleneck(const SimResult& result,
                                                                    const RuntimeGraph& graph) {
  if (result.events.empty()) throw Error("detect_bottleneck: empty event log");
  const SimTime end = result.end_time;
  const SimTime w0 = static_cast<SimTime>(result.cfg.warmup_fraction * static_cast<double>(end));
  const double window = static_cast<double>(end - w0);
  if (window <= 0) throw Error("detect_bottleneck: empty measurement window");

  auto clip = [&](SimTime t) { return std::clamp(t, w0, end); };

  double workers_busy = 0.0;
  std::map<std::string, double> res_busy, class_busy;
  std::map<std::string, int> class_capacity;
  for (const auto& n : graph.nodes) ++class_capacity[n.spec_name];

  int workers_depth = 0;
  std::map<std::string, int> res_depth;
  std::map<std::string, int> class_depth;
  SimTime prev = 0;
  for (const auto& ev : result.events) {
    double dt = static_cast<double>(clip(ev.time) - clip(prev));
    if (dt > 0) {
      workers_busy += workers_depth * dt;
      for (auto& [name, d] : res_depth) res_busy[name] += d * dt;
      for (auto& [name, d] : class_depth) class_busy[name] += d * dt;
    }
    prev = ev.time;
    const std::string& cls = result.node_class[ev.node];
    switch (ev.kind) {
      case EventKind::CoreAcquired: ++workers_depth; break;
      case EventKind::CoreReleased: --workers_depth; break;
      case EventKind::ResourceAcquired:
        ++res_depth[graph.resources[graph.nodes[ev.node].resource].name];
        break;
      case EventKind::ResourceReleased:
        --res_depth[graph.resources[graph.nodes[ev.node].resource].name];
        break;
      case EventKind::ServiceStarted: ++class_depth[cls]; break;
      case EventKind::ServiceFinished: --class_depth[cls]; break;
      default: break;
    }
  }

  std::vector<std::pair<std::string, double>> ranked;
  ranked.emplace_back("workers", workers_busy / (window * result.cfg.cpu_workers));
  for (const auto& r : graph.resources)
    ranked.emplace_back(r.name, res_busy[r.name] / (window * r.capacity));
  for (const auto& [cls, cap] : class_capacity)
    ranked.emplace_back(cls, class_busy[cls] / (window * cap));

  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

}  // namespace hetsim
