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

#ifndef EXFIL_TESTS_ORACLES_H_
#define EXFIL_TESTS_ORACLES_H_

// Reference implementations used only by tests. They favour obviously
// correct code over speed and share nothing with the library beyond plain
// data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "exfil/neural.h"
#include "exfil/pathfinder.h"
#include "exfil/random.h"
#include "exfil/scenario.h"

namespace exfil::oracle {

struct GraphSpec {
  std::vector<CompromiseGraph::Node> nodes;
  std::vector<std::pair<HostAddress, HostAddress>> edges;
  HostAddress source;
};

struct Path {
  std::vector<HostAddress> hops;
  int protocol = 0;
  int length = 0;
  double reward = 0.0;
};

// Every simple path from the source to a node flagged as exit.
inline std::vector<Path> AllPaths(const GraphSpec& g) {
  std::map<HostAddress, const CompromiseGraph::Node*> by_address;
  for (const auto& n : g.nodes) by_address[n.address] = &n;
  std::map<HostAddress, std::set<HostAddress>> adjacent;
  for (const auto& [a, b] : g.edges) {
    if (a == b || !by_address.contains(a) || !by_address.contains(b)) continue;
    adjacent[a].insert(b);
    adjacent[b].insert(a);
  }
  std::vector<Path> out;
  if (!by_address.contains(g.source)) return out;
  std::vector<HostAddress> stack = {g.source};
  std::function<void()> walk = [&] {
    const auto& last = *by_address.at(stack.back());
    if (last.exit) {
      Path p;
      p.hops = stack;
      for (HostAddress h : stack) {
        const auto& n = *by_address.at(h);
        p.protocol += n.runs_protocol ? 1 : 0;
        p.reward += n.reward;
      }
      p.length = static_cast<int>(stack.size());
      out.push_back(p);
    }
    for (HostAddress next : adjacent[stack.back()]) {
      if (std::find(stack.begin(), stack.end(), next) != stack.end()) continue;
      stack.push_back(next);
      walk();
      stack.pop_back();
    }
  };
  walk();
  return out;
}

// Documented order: coverage (exact rational comparison), then fewer hops,
// then larger path reward, then lexicographically smaller hop list.
inline bool Better(const Path& a, const Path& b) {
  const long long lhs = static_cast<long long>(a.protocol) * b.length;
  const long long rhs = static_cast<long long>(b.protocol) * a.length;
  if (lhs != rhs) return lhs > rhs;
  if (a.length != b.length) return a.length < b.length;
  if (a.reward != b.reward) return a.reward > b.reward;
  return a.hops < b.hops;
}

inline std::optional<Path> Best(const std::vector<Path>& paths) {
  std::optional<Path> best;
  for (const Path& p : paths) {
    if (!best || Better(p, *best)) best = p;
  }
  return best;
}

// Random compromise graph with up to `max_nodes` nodes. Rewards are small
// multiples of 1000 so that reward ties occur.
inline GraphSpec RandomGraph(Rng& rng, int max_nodes) {
  GraphSpec g;
  const int n = UniformInt(rng, 1, max_nodes);
  std::set<HostAddress> used;
  while (static_cast<int>(used.size()) < n) used.insert({UniformInt(rng, 0, 4), UniformInt(rng, 0, 5)});
  const double edge_p = 0.15 + 0.6 * UniformUnit(rng);
  const double protocol_p = UniformUnit(rng);
  for (HostAddress a : used) {
    CompromiseGraph::Node node;
    node.address = a;
    node.runs_protocol = UniformUnit(rng) < protocol_p;
    node.exit = UniformUnit(rng) < 0.3;
    node.reward = 1000.0 * UniformInt(rng, 0, 2);
    g.nodes.push_back(node);
  }
  std::vector<HostAddress> list(used.begin(), used.end());
  g.source = list[UniformIndex(rng, list.size())];
  for (std::size_t i = 0; i < list.size(); ++i) {
    for (std::size_t j = i + 1; j < list.size(); ++j) {
      if (UniformUnit(rng) < edge_p) g.edges.push_back({list[i], list[j]});
    }
  }
  return g;
}

// A_t as the explicit sum over k of (gamma lambda)^k delta_{t+k}, stopping
// after the first terminal transition.
inline std::vector<double> GaeByExpansion(const std::vector<double>& rewards,
                                          const std::vector<double>& values, double bootstrap,
                                          const std::vector<bool>& dones, double gamma,
                                          double lambda) {
  const std::size_t n = rewards.size();
  auto next_value = [&](std::size_t t) {
    if (dones[t]) return 0.0;
    return t + 1 < n ? values[t + 1] : bootstrap;
  };
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; t + k < n; ++k) {
      const std::size_t i = t + k;
      const double delta = rewards[i] + gamma * next_value(i) - values[i];
      sum += std::pow(gamma * lambda, static_cast<double>(k)) * delta;
      if (dones[i]) break;
    }
    adv[t] = sum;
  }
  return adv;
}

// Discounted return minus baseline, the lambda = 1 limit.
inline std::vector<double> MonteCarloAdvantage(const std::vector<double>& rewards,
                                               const std::vector<double>& values,
                                               double bootstrap, const std::vector<bool>& dones,
                                               double gamma) {
  const std::size_t n = rewards.size();
  std::vector<double> adv(n);
  for (std::size_t t = 0; t < n; ++t) {
    double ret = 0.0, discount = 1.0;
    bool ended = false;
    for (std::size_t i = t; i < n; ++i) {
      ret += discount * rewards[i];
      discount *= gamma;
      if (dones[i]) {
        ended = true;
        break;
      }
    }
    if (!ended) ret += discount * bootstrap;
    adv[t] = ret - values[t];
  }
  return adv;
}

// Central difference of `f` with respect to every entry of `params`.
inline MlpParams NumericGradient(MlpParams params, const std::function<double(const MlpParams&)>& f,
                                 double h = 1e-5) {
  MlpParams grad = params.ZerosLike();
  auto probe = [&](double& slot, double& out) {
    const double saved = slot;
    slot = saved + h;
    const double up = f(params);
    slot = saved - h;
    const double down = f(params);
    slot = saved;
    out = (up - down) / (2 * h);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& w = params.layers[l].weight;
    for (Eigen::Index i = 0; i < w.size(); ++i) probe(w.data()[i], grad.layers[l].weight.data()[i]);
    auto& b = params.layers[l].bias;
    for (Eigen::Index i = 0; i < b.size(); ++i) probe(b.data()[i], grad.layers[l].bias.data()[i]);
  }
  return grad;
}

// max |a - b| / max(|a|, |b|, floor) over all coordinates.
inline double MaxRelativeError(const MlpParams& a, const MlpParams& b, double floor = 1e-6) {
  double worst = 0.0;
  auto scan = [&](const double* x, const double* y, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scale = std::max({std::abs(x[i]), std::abs(y[i]), floor});
      worst = std::max(worst, std::abs(x[i] - y[i]) / scale);
    }
  };
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    scan(a.layers[l].weight.data(), b.layers[l].weight.data(), a.layers[l].weight.size());
    scan(a.layers[l].bias.data(), b.layers[l].bias.data(), a.layers[l].bias.size());
  }
  return worst;
}

}  // namespace exfil::oracle

#endif  // EXFIL_TESTS_ORACLES_H_
