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

#ifndef EXFIL_PATHFINDER_H_
#define EXFIL_PATHFINDER_H_

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exfil/scenario.h"

namespace exfil {

// A simple path from the foothold to a compromised exfiltration target.
struct PathCandidate {
  std::vector<HostAddress> hops;
  int protocol_hops = 0;  // hops running the exfiltration protocol
  double coverage = 0.0;  // protocol_hops / length
  int length = 0;         // number of hosts on the path
  double path_reward = 0.0;

  bool IsComplete() const { return length > 0 && protocol_hops == length; }
  bool operator==(const PathCandidate&) const = default;
};

// Compromised hosts and the links an exfiltration path may use. Nodes are
// stored in address order and adjacency lists are ascending, so every
// traversal below is deterministic.
class CompromiseGraph {
 public:
  struct Node {
    HostAddress address;
    bool runs_protocol = false;
    bool exit = false;
    double reward = 0.0;  // accumulated reward credited to the host
  };

  CompromiseGraph() = default;
  // `source` must name one of `nodes`; otherwise the graph has no source and
  // yields no paths. Edges naming unknown nodes are ignored.
  CompromiseGraph(std::vector<Node> nodes,
                  const std::vector<std::pair<HostAddress, HostAddress>>& edges,
                  HostAddress source);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int i) const { return nodes_[i]; }
  const std::vector<int>& neighbors(int i) const { return adjacency_[i]; }
  int source() const { return source_; }
  const std::vector<int>& exits() const { return exits_; }
  std::optional<int> IndexOf(HostAddress address) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> exits_;
  int source_ = -1;
};

// Connects every pair of nodes whose subnets are identical or directly
// linked in `scenario`.
CompromiseGraph BuildSubnetGraph(const Scenario& scenario,
                                 std::vector<CompromiseGraph::Node> nodes,
                                 HostAddress source);

// Fraction of `hops` that run `protocol`. Every hop counts, including the
// source and the exit. Throws std::invalid_argument on an empty path.
double Coverage(std::span<const HostAddress> hops, const std::string& protocol,
                const Scenario& scenario);

// Scores a node-index path of `graph`.
PathCandidate MakeCandidate(const CompromiseGraph& graph,
                            std::span<const int> node_path);

// True when `a` is strictly preferred to `b`: higher coverage, then fewer
// hops, then higher path reward, then the lexicographically smaller hop
// sequence.
bool IsPreferred(const PathCandidate& a, const PathCandidate& b);

std::optional<PathCandidate> SelectPath(std::span<const PathCandidate> candidates);

struct EnumerateOptions {
  // Graphs with at most this many nodes are enumerated exhaustively.
  int exhaustive_node_limit = 12;
  // Above the limit, the k shortest simple paths per exit are taken, both in
  // the whole graph and among protocol hosts only.
  int k_shortest = 16;
};

// All simple paths from the source to any exit (exits may also appear as
// intermediate hops), sorted by hop sequence.
std::vector<PathCandidate> EnumeratePaths(const CompromiseGraph& graph,
                                          const EnumerateOptions& options = {});

struct SearchOptions {
  // Node expansions allowed to the branch-and-bound search used when no
  // complete path exists.
  std::size_t expansion_budget = 100000;
  int fallback_k = 8;
};

struct PathSearchResult {
  std::optional<PathCandidate> path;
  bool exact = true;  // false if the budget ran out and a fallback was used
};

// Equivalent to SelectPath(EnumeratePaths(graph)) on graphs the search
// finishes, without materialising every path. Complete paths are found by a
// layered breadth-first search; otherwise a branch-and-bound search over
// simple paths runs within the expansion budget.
PathSearchResult FindPreferredPath(const CompromiseGraph& graph,
                                   const SearchOptions& options = {});

// Up to k shortest simple paths from `from` to `to` (Yen), ties broken by
// hop order. Nodes with `allowed[i] == false` are skipped; an empty mask
// allows everything.
std::vector<std::vector<int>> KShortestPaths(const CompromiseGraph& graph, int from,
                                             int to, int k,
                                             const std::vector<bool>& allowed = {});

struct SwitchDecision {
  bool switched = false;  // the selected hop sequence changed
  std::optional<PathCandidate> selected;
  bool reward_due = false;  // first time this hop sequence is selected
};

// Re-runs path selection over `graph` and compares the winner with the
// currently selected path. `rewarded` holds hop sequences already paid a
// protocol-path reward this episode.
SwitchDecision DecideSwitch(const CompromiseGraph& graph,
                            const std::optional<PathCandidate>& current,
                            const std::set<std::vector<HostAddress>>& rewarded,
                            const SearchOptions& options = {});

}  // namespace exfil

#endif  // EXFIL_PATHFINDER_H_
