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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion names (AC1 ... AC10) to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "exfil/analysis.h"
#include "exfil/benchmark.h"
#include "exfil/environment.h"
#include "exfil/neural.h"
#include "exfil/pathfinder.h"
#include "exfil/ppo.h"
#include "exfil/random.h"
#include "oracles.h"

namespace exfil {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

Action Scan(HostAddress h) { return {ActionKind::kSubnetScan, h, std::nullopt, std::nullopt}; }
Action Exploit(HostAddress h, std::string v) { return {ActionKind::kExploit, h, v, std::nullopt}; }
Action Upload(HostAddress h, UploadRate r) { return {ActionKind::kUpload, h, std::nullopt, r}; }
Action Sleep() { return {}; }

const Action kFast = Upload({0, 0}, UploadRate::kFast);
const Action kSlow = Upload({0, 0}, UploadRate::kSlow);

std::unique_ptr<Environment> OpenRelay() {
  auto env = std::make_unique<Environment>(std::make_shared<const Scenario>(MakeRelayScenario()));
  env->Reset(0);
  env->Step(Scan({0, 0}));
  env->Step(Exploit({1, 0}, "CVE-2018-10933"));
  env->Step(Scan({1, 0}));
  env->Step(Exploit({2, 0}, "CVE-2014-0160"));
  return env;
}

// 1. Path selection against brute force.
void PathOracle(Verdict& v) {
  Rng rng(2024);
  int mismatches = 0, graphs_with_paths = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    oracle::GraphSpec spec = oracle::RandomGraph(rng, 10);
    CompromiseGraph graph(spec.nodes, spec.edges, spec.source);
    std::optional<oracle::Path> expected = oracle::Best(oracle::AllPaths(spec));
    std::optional<PathCandidate> selected = SelectPath(EnumeratePaths(graph));
    PathSearchResult searched = FindPreferredPath(graph);
    auto same = [&](const std::optional<PathCandidate>& got) {
      if (got.has_value() != expected.has_value()) return false;
      if (!got) return true;
      return got->hops == expected->hops && got->protocol_hops == expected->protocol &&
             got->length == expected->length && got->path_reward == expected->reward;
    };
    if (!same(selected) || !same(searched.path) || !searched.exact) ++mismatches;
    if (expected) ++graphs_with_paths;
  }
  v.Require(mismatches == 0, std::to_string(mismatches) + " of 1000 graphs disagree");
  v.Require(graphs_with_paths > 500, "too few graphs with an exit path");
  v.detail << (v.pass ? "1000 graphs agree, " + std::to_string(graphs_with_paths) + " with a path" : "");
}

// 2. Complete protocol path preferred over the shorter one in net1.
void Net1Preference(Verdict& v) {
  auto net1 = std::make_shared<const Scenario>(GenerateBenchmark(BenchmarkId::kNet1, 7));
  Environment env(net1);
  env.Reset(0);
  const std::vector<Action> script = {
      Scan({8, 2}),
      Exploit({4, 2}, "CVE-2017-0144"),
      Scan({4, 2}),
      Exploit({2, 0}, "CVE-2014-0160"),
      Exploit({6, 0}, "CVE-2019-0725"),
      Scan({6, 0}),
      Exploit({5, 1}, "CVE-2019-0725"),
  };
  std::vector<HostAddress> after_short;
  for (std::size_t i = 0; i < script.size(); ++i) {
    StepOutcome o = env.Step(script[i]);
    v.Require(o.info.applicable, "step " + script[i].ToString() + " not applicable");
    if (i == 3 && env.state().selected_path) after_short = env.state().selected_path->hops;
  }
  const std::vector<HostAddress> shorter = {{8, 2}, {4, 2}, {2, 0}};
  const std::vector<HostAddress> complete = {{8, 2}, {6, 0}, {5, 1}, {2, 0}};
  v.Require(after_short == shorter, "shorter route was not selected while it was the only one");
  const auto& chosen = env.state().selected_path;
  v.Require(chosen && chosen->hops == complete, "complete route not selected");
  if (chosen) {
    v.Require(chosen->coverage == 1.0 && chosen->length == 4, "coverage/length wrong");
  }
  v.Require(Coverage(shorter, net1->exfil_protocol, *net1) < 1.0, "shorter route has full coverage");
  if (v.pass) v.detail << "(8,2)->(6,0)->(5,1)->(2,0), coverage 1, length 4";
}

// 3. Firewall thresholds.
void Firewall(Verdict& v) {
  {
    auto env = OpenRelay();
    const int foothold = env->foothold_index();
    bool early = false;
    for (int i = 0; i < 5; ++i) early |= env->Step(kFast).info.detection;
    v.Require(!early, "five fast uploads detected");
    const double banked = env->state().accumulated_reward[foothold];
    StepOutcome o = env->Step(kFast);
    const double gain = 0.1 * 1000, cost = 25.0;
    v.Require(o.info.detection && o.done, "sixth fast upload not detected");
    v.Require(env->state().isolated[foothold], "foothold not isolated");
    v.Require(o.reward == gain - cost - (banked + gain),
              "penalty is not the foothold's accumulated reward");
  }
  {
    auto env = OpenRelay();
    bool early = false;
    for (int i = 0; i < 24; ++i) early |= env->Step(kSlow).info.detection;
    v.Require(!early, "24 slow uploads detected");
    StepOutcome o = env->Step(kSlow);
    v.Require(env->state().firewalls.at(2).window_active_time_s == 250.0, "active time not 250 s");
    v.Require(o.info.detection && env->state().isolated[env->foothold_index()],
              "25th upload not detected by time");
  }
  {
    auto env = OpenRelay();
    bool detected = false;
    for (int i = 0; i < 5; ++i) detected |= env->Step(kFast).info.detection;
    env->Step(Sleep());
    for (int i = 0; i < 4; ++i) detected |= env->Step(kFast).info.detection;
    v.Require(!detected, "volume burst separated by sleep detected");
  }
  {
    auto env = OpenRelay();
    bool detected = false;
    for (int i = 0; i < 24; ++i) detected |= env->Step(kSlow).info.detection;
    env->Step(Sleep());
    for (int i = 0; i < 24; ++i) detected |= env->Step(kSlow).info.detection;
    v.Require(!detected, "time burst separated by sleep detected");
  }
  if (v.pass) v.detail << "5000 MB ok, 6th fast detected, 250 s detected, sleep resets both";
}

// 4. Upload sizes and a single completion bonus.
void UploadArithmetic(Verdict& v) {
  auto env = OpenRelay();
  double payload = env->state().remaining_payload_mb;
  env->Step(kFast);
  v.Require(payload - env->state().remaining_payload_mb == 1000.0, "fast upload is not 1000 MB");
  payload = env->state().remaining_payload_mb;
  env->Step(kSlow);
  v.Require(payload - env->state().remaining_payload_mb == 10.0, "slow upload is not 10 MB");

  int bonuses = 0;
  double bonus_reward = 0.0;
  int guard = 0;
  int in_window = 2;
  while (!env->state().done && guard++ < 100) {
    if (in_window == 4) {
      env->Step(Sleep());
      in_window = 0;
    }
    StepOutcome o = env->Step(kFast);
    ++in_window;
    for (const Event& e : o.info.events) {
      if (e.kind == EventKind::kCompleted) {
        ++bonuses;
        bonus_reward = o.reward;
      }
    }
  }
  v.Require(env->state().completed && !env->state().isolated[env->foothold_index()],
            "payload did not complete undetected");
  v.Require(bonuses == 1, "bonus paid " + std::to_string(bonuses) + " times");
  // Last transfer moves the 990 MB remainder.
  v.Require(bonus_reward == 0.1 * 990 - 25.0 + 10000.0, "final step reward is not gain - cost + 10000");
  if (v.pass) v.detail << "fast 1000 MB, slow 10 MB, bonus 10000 paid once";
}

// 5. GAE against direct expansion.
void Gae(Verdict& v) {
  Rng rng(55);
  double worst = 0.0, worst_limit = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + UniformIndex(rng, 64);
    std::vector<double> rewards(n), values(n);
    std::vector<bool> dones(n);
    for (std::size_t t = 0; t < n; ++t) {
      rewards[t] = 10.0 * StandardNormal(rng);
      values[t] = 10.0 * StandardNormal(rng);
      dones[t] = UniformUnit(rng) < 0.15;
    }
    const double bootstrap = 10.0 * StandardNormal(rng);
    const double gamma = 0.9 + 0.1 * UniformUnit(rng);
    const double lambda = UniformUnit(rng);
    auto check = [&](double lam, const std::vector<double>& expected, double& slot) {
      GaeResult r = ComputeGae(rewards, values, bootstrap, dones, gamma, lam);
      for (std::size_t t = 0; t < n; ++t) {
        slot = std::max(slot, std::abs(r.advantages[t] - expected[t]));
        slot = std::max(slot, std::abs(r.value_targets[t] - (expected[t] + values[t])));
      }
    };
    check(lambda, oracle::GaeByExpansion(rewards, values, bootstrap, dones, gamma, lambda), worst);
    std::vector<double> td(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double next = dones[t] ? 0.0 : (t + 1 < n ? values[t + 1] : bootstrap);
      td[t] = rewards[t] + gamma * next - values[t];
    }
    GaeResult zero = ComputeGae(rewards, values, bootstrap, dones, gamma, 0.0);
    v.Require(zero.advantages == td, "lambda=0 differs from the one-step TD error");
    check(1.0, oracle::MonteCarloAdvantage(rewards, values, bootstrap, dones, gamma), worst_limit);
  }
  v.Require(worst <= 1e-10, "max error " + std::to_string(worst));
  v.Require(worst_limit <= 1e-10, "lambda=1 max error " + std::to_string(worst_limit));
  if (v.pass) {
    v.detail << "200 sequences, max error " << worst << ", lambda=1 max error " << worst_limit;
  }
}

// 6. Loss gradients against central differences.
MlpParams SmallMlp(const std::vector<int>& dims, Rng& rng) {
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{Eigen::MatrixXd(dims[l + 1], dims[l]), Eigen::VectorXd(dims[l + 1])};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = 0.5 * StandardNormal(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = 0.1 * StandardNormal(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

// Ratios kept away from the clip kinks so the loss is smooth within h.
PpoBatch RandomBatch(const ActorCritic& net, int n, Rng& rng, bool with_mask) {
  const int in = net.actor.input_dim(), actions = net.actor.output_dim();
  PpoBatch b;
  b.observations.resize(in, n);
  for (Eigen::Index i = 0; i < b.observations.size(); ++i) b.observations.data()[i] = StandardNormal(rng);
  if (with_mask) {
    b.action_mask = Eigen::MatrixXd::Ones(actions, n);
    for (int j = 0; j < n; ++j) b.action_mask(UniformInt(rng, 0, actions - 1), j) = 0.0;
  }
  Eigen::MatrixXd logits = MlpForward(net.actor, b.observations);
  if (with_mask) logits.array() += (1.0 - b.action_mask.array()) * -1e9;
  Eigen::MatrixXd probs = SoftmaxColumns(logits);
  b.old_log_probs.resize(n);
  b.advantages.resize(n);
  b.value_targets.resize(n);
  for (int j = 0; j < n; ++j) {
    int a;
    do {
      a = UniformInt(rng, 0, actions - 1);
    } while (with_mask && b.action_mask(a, j) == 0.0);
    b.actions.push_back(a);
    const double bands[][2] = {{0.5, 0.75}, {0.85, 1.15}, {1.3, 1.5}};
    const auto& band = bands[UniformIndex(rng, 3)];
    b.old_log_probs[j] = std::log(probs(a, j)) - std::log(band[0] + (band[1] - band[0]) * UniformUnit(rng));
    b.advantages[j] = StandardNormal(rng);
    b.value_targets[j] = StandardNormal(rng);
  }
  return b;
}

void Gradients(Verdict& v) {
  Rng rng(66);
  struct Component {
    const char* name;
    LossCoefficients coef;
    bool zero_advantages;
  };
  const Component components[] = {
      {"policy", {0.2, 0.0, 0.0}, false},
      {"value", {0.2, 0.0, 0.5}, true},
      {"entropy", {0.2, 0.02, 0.0}, true},
      {"combined", {0.2, 0.02, 0.5}, false},
  };
  double worst = 0.0;
  int checks = 0;
  for (const Component& c : components) {
    for (int trial = 0; trial < 6; ++trial) {
      const int in = UniformInt(rng, 1, 8), actions = UniformInt(rng, 2, 8);
      const int hidden_a = UniformInt(rng, 1, 8), hidden_b = UniformInt(rng, 1, 8);
      ActorCritic net{SmallMlp({in, hidden_a, hidden_b, actions}, rng),
                      SmallMlp({in, hidden_a, hidden_b, 1}, rng)};
      PpoBatch batch = RandomBatch(net, UniformInt(rng, 1, 8), rng, trial % 2 == 1);
      if (c.zero_advantages) batch.advantages.setZero();
      LossResult analytic = PpoLoss(batch, net, c.coef);
      auto actor_loss = [&](const MlpParams& p) {
        return PpoLoss(batch, {p, net.critic}, c.coef, false).diagnostics.loss;
      };
      auto critic_loss = [&](const MlpParams& p) {
        return PpoLoss(batch, {net.actor, p}, c.coef, false).diagnostics.loss;
      };
      const double ea = oracle::MaxRelativeError(analytic.actor_grad,
                                                 oracle::NumericGradient(net.actor, actor_loss, 1e-5));
      const double ec = oracle::MaxRelativeError(analytic.critic_grad,
                                                 oracle::NumericGradient(net.critic, critic_loss, 1e-5));
      worst = std::max({worst, ea, ec});
      checks += 2;
      if (ea >= 1e-4 || ec >= 1e-4) {
        v.Require(false, std::string(c.name) + " trial " + std::to_string(trial) + " error " +
                             std::to_string(std::max(ea, ec)));
      }
    }
  }
  if (v.pass) v.detail << checks << " gradient checks, max relative error " << worst;
}

bool GreedyCompletes(const Checkpoint& checkpoint, std::shared_ptr<const Scenario> scenario) {
  EvalOptions options;
  options.episodes = 1;
  options.mode = EvalMode::kGreedy;
  options.record_trajectories = false;
  EpisodeRecord r = Evaluate(checkpoint, scenario, options).at(0);
  return r.completed && !r.detected;
}

// 7. Relay convergence.
void RelayConvergence(Verdict& v) {
  auto relay = std::make_shared<const Scenario>(MakeRelayScenario());
  PpoConfig config;
  config.episodes = 200;
  config.seed = 1;
  std::vector<int> solved_at;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    if (GreedyCompletes(c, relay)) solved_at.push_back(c.updates);
  };
  const auto start = Clock::now();
  TrainResult result = Train(relay, config, hooks);
  const double train_s = Seconds(start);
  const bool final_ok = GreedyCompletes(result.checkpoint, relay);
  int completed = 0;
  for (const auto& m : result.metrics.episodes) completed += m.completed && !m.detected;
  v.Require(train_s < 120.0, "training took " + std::to_string(train_s) + " s");
  v.Require(final_ok || !solved_at.empty(),
            "no greedy policy completed the relay undetected (" + std::to_string(result.checkpoint.updates) +
                " updates, " + std::to_string(completed) + "/200 sampled episodes completed)");
  v.detail << (v.pass ? "" : "; ") << "train " << train_s << " s, " << result.checkpoint.updates
           << " updates, greedy success after update(s):";
  for (int u : solved_at) v.detail << " " << u;
  v.detail << ", final greedy " << (final_ok ? "completes" : "fails");
}

// 8. net1 training trend and greedy sanity band.
void Net1Training(Verdict& v) {
  auto net1 = std::make_shared<const Scenario>(GenerateBenchmark(BenchmarkId::kNet1, 7));
  PpoConfig config = DefaultConfig(BenchmarkId::kNet1);
  config.seed = 7;
  const auto start = Clock::now();
  TrainResult result = Train(net1, config);
  const double train_s = Seconds(start);
  std::vector<double> rewards, steps;
  for (const auto& m : result.metrics.episodes) {
    rewards.push_back(m.reward);
    steps.push_back(m.steps);
  }
  v.Require(rewards.size() == 800, "trained " + std::to_string(rewards.size()) + " episodes");
  v.Require(train_s < 1800.0, "training took " + std::to_string(train_s) + " s");
  if (rewards.size() < 100) return;
  auto avg_reward = MovingAverage(rewards, 100), avg_steps = MovingAverage(steps, 100);
  const double r_first = avg_reward[99], r_last = avg_reward.back();
  const double s_first = avg_steps[99], s_last = avg_steps.back();
  v.Require(r_last > r_first, "moving-average reward did not increase");
  v.Require(s_last < s_first, "moving-average length did not decrease");

  EvalOptions options;
  options.episodes = 100;
  options.mode = EvalMode::kGreedy;
  options.seed = 7;
  options.record_trajectories = false;
  std::vector<EpisodeRecord> records = Evaluate(result.checkpoint, net1, options);
  int completed = 0;
  double completed_reward = 0.0;
  for (const EpisodeRecord& r : records) {
    if (r.completed && !r.detected) {
      ++completed;
      completed_reward += r.reward;
    }
  }
  const double mean_completed = completed ? completed_reward / completed : 0.0;
  v.Require(completed >= 70, "greedy completion " + std::to_string(completed) + "/100");
  if (completed) {
    v.Require(mean_completed >= 5000 && mean_completed <= 15000,
              "completing mean reward " + std::to_string(mean_completed));
  }
  const SummaryStats stats = Summarize(records);

  // Reported for context only.
  options.mode = EvalMode::kStochastic;
  std::vector<EpisodeRecord> sampled = Evaluate(result.checkpoint, net1, options);
  int sampled_completed = 0;
  double sampled_reward = 0.0;
  for (const EpisodeRecord& r : sampled) {
    if (r.completed && !r.detected) {
      ++sampled_completed;
      sampled_reward += r.reward;
    }
  }
  v.detail << (v.pass ? "" : "; ") << "train " << train_s << " s, avg reward " << r_first << " -> "
           << r_last << ", avg steps " << s_first << " -> " << s_last << ", greedy " << completed
           << "/100 completed, greedy mean steps " << stats.steps.mean << " reward "
           << stats.reward.mean << ", stochastic " << sampled_completed << "/100 completed"
           << (sampled_completed ? " with mean reward " + std::to_string(sampled_reward / sampled_completed)
                                 : std::string());
}

// 9. net2 construction and stepping speed.
void Net2Speed(Verdict& v) {
  const auto start = Clock::now();
  auto net2 = std::make_shared<const Scenario>(GenerateBenchmark(BenchmarkId::kNet2, 3));
  Environment env(net2);
  Rng rng(9);
  env.Reset(0);
  int episodes = 1;
  const int n_actions = static_cast<int>(env.actions().size());
  for (int i = 0; i < 10000; ++i) {
    if (env.Step(UniformInt(rng, 0, n_actions - 1)).done) {
      env.Reset(static_cast<std::uint64_t>(episodes++));
    }
  }
  const double elapsed = Seconds(start);
  v.Require(net2->hosts.size() == 1444, "net2 has " + std::to_string(net2->hosts.size()) + " hosts");
  v.Require(elapsed < 60.0, "took " + std::to_string(elapsed) + " s");
  v.detail << (v.pass ? "" : "; ") << "1444 hosts, " << n_actions << " actions, 10000 steps in "
           << elapsed << " s";
}

// 10. Bitwise reproducible training runs through the command-line tool.
std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void Determinism(Verdict& v) {
  const fs::path dir = fs::temp_directory_path() / "exfilpath_acceptance_ac10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string tool = EXFILPATH_BINARY;
  auto sh = [&](const std::string& args) {
    const std::string cmd = "\"" + tool + "\" " + args + " > /dev/null";
    return std::system(cmd.c_str());
  };
  const std::string scenario = (dir / "net1.json").string();
  v.Require(sh("scenario gen --id net1 --seed 7 --out \"" + scenario + "\"") == 0, "scenario gen failed");
  for (const char* run : {"a", "b"}) {
    v.Require(sh("train --scenario \"" + scenario + "\" --episodes 30 --seed 11 --step-cap 400 --quiet --out \"" +
                 (dir / run).string() + "\"") == 0,
              std::string("train ") + run + " failed");
  }
  for (const char* f : {"episodes.csv", "updates.csv", "final.ckpt"}) {
    const std::string a = Slurp(dir / "a" / f), b = Slurp(dir / "b" / f);
    v.Require(!a.empty() && a == b, std::string(f) + " differs");
  }
  const std::string updates_csv = Slurp(dir / "a" / "updates.csv");
  const auto updates = std::count(updates_csv.begin(), updates_csv.end(), '\n');
  fs::remove_all(dir);
  if (v.pass) v.detail << "episodes.csv, updates.csv and final.ckpt identical (" << updates - 1 << " updates)";
}

}  // namespace
}  // namespace exfil

int main(int argc, char** argv) {
  using exfil::Verdict;
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"AC1", exfil::PathOracle},        {"AC2", exfil::Net1Preference},
      {"AC3", exfil::Firewall},          {"AC4", exfil::UploadArithmetic},
      {"AC5", exfil::Gae},               {"AC6", exfil::Gradients},
      {"AC7", exfil::RelayConvergence},  {"AC8", exfil::Net1Training},
      {"AC9", exfil::Net2Speed},         {"AC10", exfil::Determinism},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Verdict v;
    const auto start = exfil::Clock::now();
    try {
      check(v);
    } catch (const std::exception& e) {
      v.Require(false, std::string("exception: ") + e.what());
    }
    std::cout << name << (v.pass ? " PASS " : " FAIL ") << v.detail.str() << " ["
              << exfil::Seconds(start) << " s]" << std::endl;
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
