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
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hetsim/common.hpp"
#include "hetsim/distribution.hpp"

namespace hetsim {

enum class NodeKind { Source, Basic, Exclusive, Sink };
enum class JoinPolicy { AllOf, AnyOf };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Source: return "source";
    case NodeKind::Basic: return "basic";
    case NodeKind::Exclusive: return "exclusive";
    case NodeKind::Sink: return "sink";
  }
  return "?";
}

inline const char* to_string(JoinPolicy j) {
  return j == JoinPolicy::AllOf ? "all_of" : "any_of";
}

struct NodeSpec {
  std::string name;
  NodeKind kind = NodeKind::Basic;
  std::string distribution_ref;
  std::string resource_ref;             // required iff kind == Exclusive
  JoinPolicy join = JoinPolicy::AllOf;  // relevant only with >1 predecessors

  bool operator==(const NodeSpec&) const = default;
};

struct EdgeSpec {
  std::string from;
  std::string to;
  std::string latency_ref;  // empty: messages arrive instantly

  bool operator==(const EdgeSpec&) const = default;
};

struct ExclusiveResource {
  std::string name;
  int capacity = 1;

  bool operator==(const ExclusiveResource&) const = default;
};

/// The pipeline description. Nodes listed in per_stream_nodes are replicated
/// once per stream on instantiation; the remaining nodes are shared across
/// streams and must serialize on a declared exclusive resource.
struct FlowGraphSpec {
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  std::vector<ExclusiveResource> resources;
  std::vector<std::string> per_stream_nodes;
  std::map<std::string, ServiceDistribution> distributions;

  bool operator==(const FlowGraphSpec&) const = default;

  const NodeSpec* find_node(const std::string& name) const {
    for (const auto& n : nodes)
      if (n.name == name) return &n;
    return nullptr;
  }
  bool has_edge(const std::string& from, const std::string& to) const {
    for (const auto& e : edges)
      if (e.from == from && e.to == to) return true;
    return false;
  }
  bool is_per_stream(const std::string& name) const {
    for (const auto& p : per_stream_nodes)
      if (p == name) return true;
    return false;
  }
};

struct Violation {
  std::string rule;
  std::string element;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.message;
    }
    return out;
  }
};

namespace detail {

// DFS cycle search over declaration order; returns the first cycle found,
// formatted as "cycle: A→GPU→B→A".
inline std::optional<std::string> find_cycle(const FlowGraphSpec& spec) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& n : spec.nodes) adj[n.name];
  for (const auto& e : spec.edges) {
    if (adj.count(e.from) && adj.count(e.to)) adj[e.from].push_back(e.to);
  }
  std::map<std::string, int> color;  // 0 unvisited, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::optional<std::string> found;

  auto dfs = [&](auto&& self, const std::string& u) -> bool {
    color[u] = 1;
    stack.push_back(u);
    for (const auto& v : adj[u]) {
      if (found) return true;
      if (color[v] == 1) {
        std::string msg = "cycle: ";
        auto it = std::find(stack.begin(), stack.end(), v);
        for (; it != stack.end(); ++it) msg += *it + "→";
        msg += v;
        found = msg;
        return true;
      }
      if (color[v] == 0 && self(self, v)) return true;
    }
    stack.pop_back();
    color[u] = 2;
    return false;
  };
  for (const auto& n : spec.nodes) {
    if (color[n.name] == 0 && dfs(dfs, n.name)) break;
  }
  return found;
}

}  // namespace detail

/// Check every structural invariant of a pipeline description. Violations
/// are data, not faults: this never throws, whatever the input looks like.
inline ValidationResult validate(const FlowGraphSpec& spec) {
  ValidationResult r;
  auto add = [&](std::string rule, std::string element, std::string message) {
    r.violations.push_back({std::move(rule), std::move(element), std::move(message)});
  };

  std::set<std::string> node_names;
  for (const auto& n : spec.nodes) {
    if (!node_names.insert(n.name).second)
      add("duplicate node", n.name, "duplicate node name: " + n.name);
    if (n.name.empty()) add("empty name", n.name, "node with empty name");
  }
  std::set<std::string> resource_names;
  for (const auto& res : spec.resources) {
    if (!resource_names.insert(res.name).second)
      add("duplicate resource", res.name, "duplicate resource name: " + res.name);
    if (res.capacity < 1)
      add("capacity", res.name,
          "resource " + res.name + " has capacity " + std::to_string(res.capacity) + ", needs >= 1");
  }

  // Edge endpoints, duplicates, latency refs.
  std::set<std::pair<std::string, std::string>> edge_set;
  for (const auto& e : spec.edges) {
    if (!node_names.count(e.from))
      add("unknown endpoint", e.from, "edge from unknown node: " + e.from);
    if (!node_names.count(e.to))
      add("unknown endpoint", e.to, "edge to unknown node: " + e.to);
    if (!edge_set.insert({e.from, e.to}).second)
      add("duplicate edge", e.from + "→" + e.to, "duplicate edge: " + e.from + "→" + e.to);
    if (!e.latency_ref.empty() && !spec.distributions.count(e.latency_ref))
      add("unresolved distribution", e.from + "→" + e.to,
          "edge " + e.from + "→" + e.to + " references unknown distribution: " + e.latency_ref);
  }

  // Per-node rules.
  std::map<std::string, int> in_deg, out_deg;
  for (const auto& e : spec.edges) {
    if (node_names.count(e.from) && node_names.count(e.to)) {
      ++out_deg[e.from];
      ++in_deg[e.to];
    }
  }
  int n_sources = 0, n_sinks = 0;
  for (const auto& n : spec.nodes) {
    if (n.kind == NodeKind::Source) {
      ++n_sources;
      if (in_deg[n.name] > 0)
        add("source has predecessor", n.name, "source node " + n.name + " has predecessors");
    }
    if (n.kind == NodeKind::Sink) {
      ++n_sinks;
      if (out_deg[n.name] > 0)
        add("sink has successor", n.name, "sink node " + n.name + " has successors");
    }
    if (n.kind == NodeKind::Exclusive) {
      if (n.resource_ref.empty() || !resource_names.count(n.resource_ref))
        add("unresolved resource", n.name,
            "unresolved resource: node " + n.name + " (kind=exclusive) needs a declared resource");
    } else if (!n.resource_ref.empty()) {
      add("spurious resource", n.name,
          "node " + n.name + " is not exclusive but references resource " + n.resource_ref);
    }
    if (n.distribution_ref.empty() || !spec.distributions.count(n.distribution_ref))
      add("unresolved distribution", n.name,
          "node " + n.name + " references unknown distribution: " + n.distribution_ref);
  }
  if (n_sources == 0) add("no source", "", "graph has no source node");
  if (n_sinks == 0) add("no sink", "", "graph has no sink node");

  // Stream categories: per_stream entries must exist and be unique; every
  // node is either per-stream or a shared node serialized on a resource.
  std::set<std::string> per_stream;
  for (const auto& p : spec.per_stream_nodes) {
    if (!node_names.count(p))
      add("unknown per-stream node", p, "per_stream_nodes references unknown node: " + p);
    if (!per_stream.insert(p).second)
      add("duplicate per-stream node", p, "per_stream_nodes lists " + p + " twice");
  }
  for (const auto& n : spec.nodes) {
    bool ps = per_stream.count(n.name) > 0;
    if ((n.kind == NodeKind::Source || n.kind == NodeKind::Sink) && !ps)
      add("shared endpoint", n.name,
          std::string(to_string(n.kind)) + " node " + n.name + " must be per-stream");
    if (!ps && n.kind != NodeKind::Exclusive && n.kind != NodeKind::Source &&
        n.kind != NodeKind::Sink)
      add("uncategorized node", n.name,
          "node " + n.name + " is neither per-stream nor a shared exclusive node");
  }

  if (auto cyc = detail::find_cycle(spec)) add("cycle", "", *cyc);

  return r;
}

// ---------------------------------------------------------------------------
// Declarative pipeline edits.

struct Modification {
  enum class Kind { AddNode, RemoveNode, SetDistribution, ZeroNode, SetEdgeLatency };

  Kind kind = Kind::ZeroNode;
  std::string target;  // node name for remove/zero/set_distribution

  // add_node payload
  NodeSpec node;
  std::vector<EdgeSpec> attach_edges;
  std::map<std::string, ServiceDistribution> new_distributions;
  bool node_per_stream = true;

  // set_distribution / set_edge_latency payload: either an inline
  // distribution or a reference into the existing table.
  std::optional<ServiceDistribution> distribution;
  std::string distribution_ref;

  // set_edge_latency payload
  std::string edge_from, edge_to;

  static Modification add_node(NodeSpec n, std::vector<EdgeSpec> edges,
                               std::map<std::string, ServiceDistribution> dists = {},
                               bool per_stream = true) {
    Modification m;
    m.kind = Kind::AddNode;
    m.node = std::move(n);
    m.attach_edges = std::move(edges);
    m.new_distributions = std::move(dists);
    m.node_per_stream = per_stream;
    return m;
  }
  static Modification remove_node(std::string name) {
    Modification m;
    m.kind = Kind::RemoveNode;
    m.target = std::move(name);
    return m;
  }
  static Modification zero_node(std::string name) {
    Modification m;
    m.kind = Kind::ZeroNode;
    m.target = std::move(name);
    return m;
  }
  static Modification set_distribution(std::string name, ServiceDistribution d) {
    Modification m;
    m.kind = Kind::SetDistribution;
    m.target = std::move(name);
    m.distribution = std::move(d);
    return m;
  }
  static Modification set_distribution_ref(std::string name, std::string ref) {
    Modification m;
    m.kind = Kind::SetDistribution;
    m.target = std::move(name);
    m.distribution_ref = std::move(ref);
    return m;
  }
  static Modification set_edge_latency(std::string from, std::string to, ServiceDistribution d) {
    Modification m;
    m.kind = Kind::SetEdgeLatency;
    m.edge_from = std::move(from);
    m.edge_to = std::move(to);
    m.distribution = std::move(d);
    return m;
  }
};

namespace detail {

inline std::string fresh_dist_name(const FlowGraphSpec& spec, const std::string& base) {
  std::string name = base;
  int i = 2;
  while (spec.distributions.count(name)) name = base + "_" + std::to_string(i++);
  return name;
}

// Count references (node service + edge latency) per distribution name.
inline std::map<std::string, int> dist_refcounts(const FlowGraphSpec& spec) {
  std::map<std::string, int> rc;
  for (const auto& n : spec.nodes) ++rc[n.distribution_ref];
  for (const auto& e : spec.edges)
    if (!e.latency_ref.empty()) ++rc[e.latency_ref];
  return rc;
}

}  // namespace detail

/// Apply a declarative edit, returning a fresh validated spec. The input is
/// never touched. Throws Error on unknown elements, clashing names, or when
/// the edited spec no longer validates.
inline FlowGraphSpec apply_modification(const FlowGraphSpec& spec, const Modification& mod) {
  FlowGraphSpec out = spec;
  using Kind = Modification::Kind;

  switch (mod.kind) {
    case Kind::AddNode: {
      if (out.find_node(mod.node.name))
        throw Error("add_node: node name already exists: " + mod.node.name);
      for (const auto& [name, dist] : mod.new_distributions) {
        if (out.distributions.count(name))
          throw Error("add_node: distribution name already exists: " + name);
        out.distributions.emplace(name, dist);
      }
      for (const auto& e : mod.attach_edges) {
        if (e.from != mod.node.name && e.to != mod.node.name)
          throw Error("add_node: attachment edge " + e.from + "→" + e.to +
                      " does not touch the new node");
        out.edges.push_back(e);
      }
      out.nodes.push_back(mod.node);
      if (mod.node_per_stream) out.per_stream_nodes.push_back(mod.node.name);
      break;
    }
    case Kind::RemoveNode: {
      if (!out.find_node(mod.target)) throw Error("remove_node: unknown node: " + mod.target);
      auto before = detail::dist_refcounts(out);
      std::erase_if(out.nodes, [&](const NodeSpec& n) { return n.name == mod.target; });
      std::erase_if(out.edges,
                    [&](const EdgeSpec& e) { return e.from == mod.target || e.to == mod.target; });
      std::erase_if(out.per_stream_nodes, [&](const std::string& p) { return p == mod.target; });
      // Distributions that only the removed elements referenced go with them,
      // so add_node followed by remove_node restores the original spec.
      auto after = detail::dist_refcounts(out);
      std::erase_if(out.distributions, [&](const auto& kv) {
        return before.count(kv.first) && before.at(kv.first) > 0 &&
               (!after.count(kv.first) || after.at(kv.first) == 0);
      });
      break;
    }
    case Kind::ZeroNode: {
      return apply_modification(
          spec, Modification::set_distribution(mod.target, ServiceDistribution::constant(0.0)));
    }
    case Kind::SetDistribution: {
      NodeSpec* n = nullptr;
      for (auto& cand : out.nodes)
        if (cand.name == mod.target) n = &cand;
      if (!n) throw Error("set_distribution: unknown node: " + mod.target);
      if (mod.distribution) {
        std::string name = detail::fresh_dist_name(out, mod.target + "_dist");
        out.distributions.emplace(name, *mod.distribution);
        n->distribution_ref = name;
      } else {
        if (!out.distributions.count(mod.distribution_ref))
          throw Error("set_distribution: unknown distribution: " + mod.distribution_ref);
        n->distribution_ref = mod.distribution_ref;
      }
      break;
    }
    case Kind::SetEdgeLatency: {
      EdgeSpec* edge = nullptr;
      for (auto& cand : out.edges)
        if (cand.from == mod.edge_from && cand.to == mod.edge_to) edge = &cand;
      if (!edge)
        throw Error("set_edge_latency: unknown edge: " + mod.edge_from + "→" + mod.edge_to);
      if (mod.distribution) {
        std::string name =
            detail::fresh_dist_name(out, mod.edge_from + "_" + mod.edge_to + "_latency");
        out.distributions.emplace(name, *mod.distribution);
        edge->latency_ref = name;
      } else {
        if (!out.distributions.count(mod.distribution_ref))
          throw Error("set_edge_latency: unknown distribution: " + mod.distribution_ref);
        edge->latency_ref = mod.distribution_ref;
      }
      break;
    }
  }

  auto check = validate(out);
  if (!check.ok()) throw Error("modification yields invalid spec: " + check.to_string());
  return out;
}

// ---------------------------------------------------------------------------
// Instantiation: expand per-stream components.

struct RuntimeEdge {
  int to = -1;
  int stream_tag = -1;  // shared emitters deliver only to the message's stream; -1 matches all
  std::shared_ptr<const ServiceDistribution> latency;  // null: instant
  std::uint64_t rng_stream = 0;
};

struct RuntimeNode {
  std::string name;       // instance name, e.g. "A#2"; shared nodes keep their spec name
  std::string spec_name;  // node class, e.g. "A"
  NodeKind kind = NodeKind::Basic;
  JoinPolicy join = JoinPolicy::AllOf;
  int stream = -1;  // -1 for shared instances
  std::shared_ptr<const ServiceDistribution> service;
  int resource = -1;  // index into RuntimeGraph::resources
  std::vector<RuntimeEdge> out;
  std::vector<int> in_degree_by_stream;  // predecessors delivering per stream
  std::uint64_t rng_stream = 0;
};

struct RuntimeResource {
  std::string name;
  int capacity = 1;
};

struct RuntimeGraph {
  int streams = 0;
  std::vector<RuntimeNode> nodes;
  std::vector<RuntimeResource> resources;

  std::vector<std::string> instance_names() const {
    std::vector<std::string> out;
    out.reserve(nodes.size());
    for (const auto& n : nodes) out.push_back(n.name);
    return out;
  }
  int find_instance(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

/// Expand a validated spec into `streams` disjoint per-stream components
/// plus single shared instances. Per-stream instances are named "name#s"
/// with 0-based stream index s.
inline RuntimeGraph instantiate(const FlowGraphSpec& spec, int streams) {
  if (streams < 1) throw Error("instantiate: streams must be >= 1");
  auto check = validate(spec);
  if (!check.ok()) throw Error("instantiate: invalid spec: " + check.to_string());

  RuntimeGraph g;
  g.streams = streams;
  for (const auto& res : spec.resources) g.resources.push_back({res.name, res.capacity});

  std::map<std::string, std::shared_ptr<const ServiceDistribution>> dists;
  for (const auto& [name, d] : spec.distributions)
    dists.emplace(name, std::make_shared<const ServiceDistribution>(d));

  auto resource_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < g.resources.size(); ++i)
      if (g.resources[i].name == name) return static_cast<int>(i);
    return -1;
  };

  // Instances first: per-stream nodes expand in stream-major order after the
  // shared ones so both layouts are stable and deterministic.
  std::map<std::string, int> shared_index;
  std::map<std::pair<std::string, int>, int> per_stream_index;
  for (const auto& n : spec.nodes) {
    if (!spec.is_per_stream(n.name)) {
      RuntimeNode rn;
      rn.name = n.name;
      rn.spec_name = n.name;
      rn.kind = n.kind;
      rn.join = n.join;
      rn.stream = -1;
      rn.service = dists.at(n.distribution_ref);
      rn.resource = n.kind == NodeKind::Exclusive ? resource_index(n.resource_ref) : -1;
      rn.in_degree_by_stream.assign(streams, 0);
      rn.rng_stream = fnv1a64(rn.name);
      shared_index[n.name] = static_cast<int>(g.nodes.size());
      g.nodes.push_back(std::move(rn));
    }
  }
  for (int s = 0; s < streams; ++s) {
    for (const auto& n : spec.nodes) {
      if (spec.is_per_stream(n.name)) {
        RuntimeNode rn;
        rn.name = n.name + "#" + std::to_string(s);
        rn.spec_name = n.name;
        rn.kind = n.kind;
        rn.join = n.join;
        rn.stream = s;
        rn.service = dists.at(n.distribution_ref);
        rn.resource = n.kind == NodeKind::Exclusive ? resource_index(n.resource_ref) : -1;
        rn.in_degree_by_stream.assign(streams, 0);
        rn.rng_stream = fnv1a64(rn.name);
        per_stream_index[{n.name, s}] = static_cast<int>(g.nodes.size());
        g.nodes.push_back(std::move(rn));
      }
    }
  }

  auto add_edge = [&](int from, int to, int stream_tag, const std::string& latency_ref) {
    RuntimeEdge e;
    e.to = to;
    e.stream_tag = stream_tag;
    if (!latency_ref.empty()) e.latency = dists.at(latency_ref);
    e.rng_stream = fnv1a64(g.nodes[from].name + "|" + g.nodes[to].name);
    g.nodes[from].out.push_back(e);
    int s = stream_tag >= 0 ? stream_tag : 0;
    if (stream_tag >= 0) {
      g.nodes[to].in_degree_by_stream[s] += 1;
    } else {
      for (int i = 0; i < streams; ++i) g.nodes[to].in_degree_by_stream[i] += 1;
    }
  };

  for (const auto& e : spec.edges) {
    bool from_ps = spec.is_per_stream(e.from);
    bool to_ps = spec.is_per_stream(e.to);
    if (from_ps && to_ps) {
      for (int s = 0; s < streams; ++s)
        add_edge(per_stream_index[{e.from, s}], per_stream_index[{e.to, s}], s, e.latency_ref);
    } else if (from_ps && !to_ps) {
      for (int s = 0; s < streams; ++s)
        add_edge(per_stream_index[{e.from, s}], shared_index[e.to], s, e.latency_ref);
    } else if (!from_ps && to_ps) {
      for (int s = 0; s < streams; ++s)
        add_edge(shared_index[e.from], per_stream_index[{e.to, s}], s, e.latency_ref);
    } else {
      add_edge(shared_index[e.from], shared_index[e.to], -1, e.latency_ref);
    }
  }

  return g;
}

}  // namespace hetsim
