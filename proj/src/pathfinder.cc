// Copyright 2026 The Exfilpath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "exfil/pathfinder.h"

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>

namespace exfil {
namespace {

// Compares coverage fractions p1/l1 and p2/l2 exactly.
int CompareCoverage(std::int64_t p1, std::int64_t l1, std::int64_t p2, std::int64_t l2) {
  std::int64_t lhs = p1 * l2;
  std::int64_t rhs = p2 * l1;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

// Lexicographically smallest shortest path from `from` to `to` avoiding
// banned nodes and edges. Empty if unreachable.
std::vector<int> ShortestPath(const CompromiseGraph& g, int from, int to,
                              const std::vector<bool>& banned_node,
                              const std::set<std::pair<int, int>>& banned_edge) {
  if (banned_node[from] || banned_node[to]) return {};
  auto edge_ok = [&](int a, int b) { return !banned_edge.contains({a, b}); };
  // Distances to `to`, then walk forward picking the smallest neighbour that
  // stays on a shortest path.
  std::vector<int> dist(g.size(), -1);
  std::deque<int> queue = {to};
  dist[to] = 0;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : g.neighbors(v)) {
      if (dist[w] >= 0 || banned_node[w] || !edge_ok(w, v)) continue;
      dist[w] = dist[v] + 1;
      queue.push_back(w);
    }
  }
  if (dist[from] < 0) return {};
  std::vector<int> path = {from};
  int cur = from;
  while (cur != to) {
    int next = -1;
    for (int w : g.neighbors(cur)) {
      if (dist[w] == dist[cur] - 1 && !banned_node[w] && edge_ok(cur, w)) {
        next = w;
        break;
      }
    }
    if (next < 0) return {};
    path.push_back(next);
    cur = next;
  }
  return path;
}

std::vector<HostAddress> Addresses(const CompromiseGraph& g, std::span<const int> path) {
  std::vector<HostAddress> out;
  out.reserve(path.size());
  for (int v : path) out.push_back(g.node(v).address);
  return out;
}

// Exhaustive depth-first enumeration of simple source->exit paths.
void EnumerateFrom(const CompromiseGraph& g, std::vector<int>& path,
                   std::vector<bool>& visited, std::vector<PathCandidate>& out) {
  int v = path.back();
  if (g.node(v).exit) out.push_back(MakeCandidate(g, path));
  for (int w : g.neighbors(v)) {
    if (visited[w]) continue;
    visited[w] = true;
    path.push_back(w);
    EnumerateFrom(g, path, visited, out);
    path.pop_back();
    visited[w] = false;
  }
}

// Shortest complete paths only use protocol hosts, so a breadth-first search
// restricted to them finds the minimum length. Among those paths the reward
// is maximised by a forward pass over the layers, then the smallest hop
// sequence is read off greedily.
std::optional<PathCandidate> BestCompletePath(const CompromiseGraph& g) {
  const int src = g.source();
  if (!g.node(src).runs_protocol) return std::nullopt;
  const int n = g.size();
  std::vector<int> dist(n, -1);
  std::vector<int> order = {src};
  dist[src] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    int v = order[head];
    for (int w : g.neighbors(v)) {
      if (dist[w] >= 0 || !g.node(w).runs_protocol) continue;
      dist[w] = dist[v] + 1;
      order.push_back(w);
    }
  }
  int depth = -1;
  for (int e : g.exits()) {
    if (dist[e] >= 0 && g.node(e).runs_protocol && (depth < 0 || dist[e] < depth)) {
      depth = dist[e];
    }
  }
  if (depth < 0) return std::nullopt;

  // prefix[v]: best reward of a shortest protocol path source..v, summed in
  // hop order so it matches MakeCandidate bit for bit.
  std::vector<double> prefix(n, 0.0);
  std::vector<bool> reached(n, false);
  prefix[src] = g.node(src).reward;
  reached[src] = true;
  for (int v : order) {
    if (!reached[v] || dist[v] >= depth) continue;
    for (int w : g.neighbors(v)) {
      if (dist[w] != dist[v] + 1 || !g.node(w).runs_protocol) continue;
      double candidate = prefix[v] + g.node(w).reward;
      if (!reached[w] || candidate > prefix[w]) {
        prefix[w] = candidate;
        reached[w] = true;
      }
    }
  }
  std::optional<double> best;
  for (int e : g.exits()) {
    if (dist[e] == depth && reached[e] && (!best || prefix[e] > *best)) best = prefix[e];
  }
  auto tight = [&](int v, int w) {
    return dist[w] == dist[v] + 1 && g.node(w).runs_protocol && reached[v] &&
           prefix[v] + g.node(w).reward == prefix[w];
  };
  // Nodes that reach an optimal exit through tight edges.
  std::vector<bool> useful(n, false);
  for (int e : g.exits()) {
    if (dist[e] == depth && reached[e] && prefix[e] == *best) useful[e] = true;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int v = *it;
    if (useful[v] || dist[v] >= depth) continue;
    for (int w : g.neighbors(v)) {
      if (useful[w] && tight(v, w)) {
        useful[v] = true;
        break;
      }
    }
  }
  std::vector<int> path = {src};
  while (dist[path.back()] < depth) {
    int v = path.back();
    int next = -1;
    for (int w : g.neighbors(v)) {
      if (useful[w] && tight(v, w)) {
        next = w;
        break;
      }
    }
    if (next < 0) throw std::logic_error("complete path reconstruction failed");
    path.push_back(next);
  }
  return MakeCandidate(g, path);
}

// Branch and bound over simple paths for graphs without a complete path.
// Extending a path that has p protocol hops out of l with b more protocol
// hops and q others gives (p+b)/(l+b+q), which is at most (p+R)/(l+R) when R
// protocol hosts remain unvisited, or p/(l+1) when none remain.
class PartialSearch {
 public:
  PartialSearch(const CompromiseGraph& g, std::size_t budget)
      : g_(g), budget_(budget), visited_(g.size(), false) {
    for (int i = 0; i < g.size(); ++i) remaining_protocol_ += g.node(i).runs_protocol;
  }

  // Returns false when the budget ran out.
  bool Run() {
    Enter(g_.source());
    Visit();
    return !aborted_;
  }

  const std::optional<PathCandidate>& best() const { return best_; }

 private:
  void Enter(int v) {
    visited_[v] = true;
    path_.push_back(v);
    protocol_ += g_.node(v).runs_protocol;
    remaining_protocol_ -= g_.node(v).runs_protocol;
  }

  void Leave() {
    int v = path_.back();
    visited_[v] = false;
    path_.pop_back();
    protocol_ -= g_.node(v).runs_protocol;
    remaining_protocol_ += g_.node(v).runs_protocol;
  }

  bool ExtensionHopeless() const {
    if (!best_) return false;
    const std::int64_t len = static_cast<std::int64_t>(path_.size());
    std::int64_t ub_p, ub_l;
    if (remaining_protocol_ > 0) {
      ub_p = protocol_ + remaining_protocol_;
      ub_l = len + remaining_protocol_;
    } else {
      ub_p = protocol_;
      ub_l = len + 1;
    }
    int cmp = CompareCoverage(ub_p, ub_l, best_->protocol_hops, best_->length);
    if (cmp < 0) return true;
    // Matching the bound exactly forces the path length ub_l, unless every
    // hop so far runs the protocol (the bound is then 1 and cannot tie).
    return cmp == 0 && protocol_ < len && ub_l > best_->length;
  }

  void Visit() {
    if (aborted_) return;
    if (++expansions_ > budget_) {
      aborted_ = true;
      return;
    }
    int v = path_.back();
    if (g_.node(v).exit) {
      PathCandidate candidate = MakeCandidate(g_, path_);
      if (!best_ || IsPreferred(candidate, *best_)) best_ = std::move(candidate);
    }
    if (ExtensionHopeless()) return;
    for (int w : g_.neighbors(v)) {
      if (visited_[w]) continue;
      Enter(w);
      Visit();
      Leave();
      if (aborted_) return;
    }
  }

  const CompromiseGraph& g_;
  std::size_t budget_;
  std::size_t expansions_ = 0;
  bool aborted_ = false;
  std::vector<bool> visited_;
  std::vector<int> path_;
  int protocol_ = 0;
  int remaining_protocol_ = 0;
  std::optional<PathCandidate> best_;
};

std::vector<PathCandidate> BoundedCandidates(const CompromiseGraph& g, int k) {
  std::vector<bool> protocol_only(g.size());
  for (int i = 0; i < g.size(); ++i) protocol_only[i] = g.node(i).runs_protocol;
  const std::vector<bool> everything;
  std::set<std::vector<int>> seen;
  std::vector<PathCandidate> out;
  for (int e : g.exits()) {
    for (const std::vector<bool>* mask : std::array{&everything, static_cast<const std::vector<bool>*>(&protocol_only)}) {
      auto paths = KShortestPaths(g, g.source(), e, k, *mask);
      for (auto& p : paths) {
        if (seen.insert(p).second) out.push_back(MakeCandidate(g, p));
      }
    }
  }
  return out;
}

}  // namespace

CompromiseGraph::CompromiseGraph(std::vector<Node> nodes,
                                 const std::vector<std::pair<HostAddress, HostAddress>>& edges,
                                 HostAddress source)
    : nodes_(std::move(nodes)) {
  std::sort(nodes_.begin(), nodes_.end(),
            [](const Node& a, const Node& b) { return a.address < b.address; });
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (nodes_[i].address == nodes_[i - 1].address) {
      throw std::invalid_argument("duplicate node " + nodes_[i].address.ToString());
    }
  }
  adjacency_.resize(nodes_.size());
  for (const auto& [a, b] : edges) {
    auto ia = IndexOf(a);
    auto ib = IndexOf(b);
    if (!ia || !ib || *ia == *ib) continue;
    adjacency_[*ia].push_back(*ib);
    adjacency_[*ib].push_back(*ia);
  }
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  for (int i = 0; i < size(); ++i) {
    if (nodes_[i].exit) exits_.push_back(i);
  }
  source_ = IndexOf(source).value_or(-1);
}

std::optional<int> CompromiseGraph::IndexOf(HostAddress address) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), address,
                             [](const Node& n, HostAddress a) { return n.address < a; });
  if (it == nodes_.end() || it->address != address) return std::nullopt;
  return static_cast<int>(it - nodes_.begin());
}

CompromiseGraph BuildSubnetGraph(const Scenario& scenario,
                                 std::vector<CompromiseGraph::Node> nodes,
                                 HostAddress source) {
  std::map<int, std::vector<HostAddress>> by_subnet;
  for (const auto& node : nodes) by_subnet[node.address.subnet].push_back(node.address);
  std::vector<std::pair<HostAddress, HostAddress>> edges;
  for (const auto& [subnet_id, members] : by_subnet) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        edges.emplace_back(members[i], members[j]);
      }
    }
    const SubnetSpec* subnet = scenario.FindSubnet(subnet_id);
    if (subnet == nullptr) continue;
    for (int other : subnet->connected) {
      if (other <= subnet_id) continue;
      auto it = by_subnet.find(other);
      if (it == by_subnet.end()) continue;
      for (HostAddress a : members) {
        for (HostAddress b : it->second) edges.emplace_back(a, b);
      }
    }
  }
  return CompromiseGraph(std::move(nodes), edges, source);
}

double Coverage(std::span<const HostAddress> hops, const std::string& protocol,
                const Scenario& scenario) {
  if (hops.empty()) throw std::invalid_argument("coverage of an empty path");
  int running = 0;
  for (HostAddress hop : hops) {
    const HostSpec* host = scenario.FindHost(hop);
    if (host != nullptr && host->RunsService(protocol)) ++running;
  }
  return static_cast<double>(running) / static_cast<double>(hops.size());
}

PathCandidate MakeCandidate(const CompromiseGraph& graph, std::span<const int> node_path) {
  PathCandidate c;
  c.hops = Addresses(graph, node_path);
  c.length = static_cast<int>(node_path.size());
  for (int v : node_path) {
    c.protocol_hops += graph.node(v).runs_protocol;
    c.path_reward += graph.node(v).reward;
  }
  c.coverage = c.length == 0 ? 0.0 : static_cast<double>(c.protocol_hops) / c.length;
  return c;
}

bool IsPreferred(const PathCandidate& a, const PathCandidate& b) {
  int cmp = CompareCoverage(a.protocol_hops, a.length, b.protocol_hops, b.length);
  if (cmp != 0) return cmp > 0;
  if (a.length != b.length) return a.length < b.length;
  if (a.path_reward != b.path_reward) return a.path_reward > b.path_reward;
  return a.hops < b.hops;
}

std::optional<PathCandidate> SelectPath(std::span<const PathCandidate> candidates) {
  const PathCandidate* best = nullptr;
  for (const PathCandidate& c : candidates) {
    if (best == nullptr || IsPreferred(c, *best)) best = &c;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::vector<PathCandidate> EnumeratePaths(const CompromiseGraph& graph,
                                          const EnumerateOptions& options) {
  std::vector<PathCandidate> out;
  if (graph.source() < 0 || graph.exits().empty()) return out;
  if (graph.size() <= options.exhaustive_node_limit) {
    std::vector<int> path = {graph.source()};
    std::vector<bool> visited(graph.size(), false);
    visited[graph.source()] = true;
    EnumerateFrom(graph, path, visited, out);
  } else {
    out = BoundedCandidates(graph, options.k_shortest);
  }
  std::sort(out.begin(), out.end(),
            [](const PathCandidate& a, const PathCandidate& b) { return a.hops < b.hops; });
  return out;
}

PathSearchResult FindPreferredPath(const CompromiseGraph& graph, const SearchOptions& options) {
  PathSearchResult result;
  if (graph.source() < 0 || graph.exits().empty()) return result;
  if (auto complete = BestCompletePath(graph)) {
    result.path = std::move(complete);
    return result;
  }
  PartialSearch search(graph, options.expansion_budget);
  result.exact = search.Run();
  result.path = search.best();
  if (!result.exact) {
    for (PathCandidate& c : BoundedCandidates(graph, options.fallback_k)) {
      if (!result.path || IsPreferred(c, *result.path)) result.path = std::move(c);
    }
  }
  return result;
}

std::vector<std::vector<int>> KShortestPaths(const CompromiseGraph& graph, int from, int to,
                                             int k, const std::vector<bool>& allowed) {
  std::vector<std::vector<int>> found;
  if (k <= 0) return found;
  std::vector<bool> base_ban(graph.size(), false);
  if (!allowed.empty()) {
    for (int i = 0; i < graph.size(); ++i) base_ban[i] = !allowed[i];
  }
  auto first = ShortestPath(graph, from, to, base_ban, {});
  if (first.empty()) return found;
  found.push_back(std::move(first));

  auto shorter = [](const std::vector<int>& a, const std::vector<int>& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  };
  std::set<std::vector<int>, decltype(shorter)> pending(shorter);
  while (static_cast<int>(found.size()) < k) {
    const std::vector<int> prev = found.back();
    for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
      std::vector<bool> banned_node = base_ban;
      for (std::size_t j = 0; j < i; ++j) banned_node[prev[j]] = true;
      std::set<std::pair<int, int>> banned_edge;
      for (const auto& p : found) {
        if (p.size() > i + 1 && std::equal(p.begin(), p.begin() + i + 1, prev.begin())) {
          banned_edge.insert({p[i], p[i + 1]});
        }
      }
      auto spur = ShortestPath(graph, prev[i], to, banned_node, banned_edge);
      if (spur.empty()) continue;
      std::vector<int> total(prev.begin(), prev.begin() + i);
      total.insert(total.end(), spur.begin(), spur.end());
      if (std::find(found.begin(), found.end(), total) == found.end()) {
        pending.insert(std::move(total));
      }
    }
    if (pending.empty()) break;
    found.push_back(*pending.begin());
    pending.erase(pending.begin());
  }
  return found;
}

SwitchDecision DecideSwitch(const CompromiseGraph& graph,
                            const std::optional<PathCandidate>& current,
                            const std::set<std::vector<HostAddress>>& rewarded,
                            const SearchOptions& options) {
  SwitchDecision decision;
  decision.selected = FindPreferredPath(graph, options).path;
  const bool had = current.has_value();
  const bool has = decision.selected.has_value();
  decision.switched = had != has || (had && has && current->hops != decision.selected->hops);
  decision.reward_due = decision.switched && has && !rewarded.contains(decision.selected->hops);
  return decision;
}

}  // namespace exfil
