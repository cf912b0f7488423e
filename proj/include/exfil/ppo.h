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

#ifndef EXFIL_PPO_H_
#define EXFIL_PPO_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exfil/analysis.h"
#include "exfil/benchmark.h"
#include "exfil/environment.h"
#include "exfil/neural.h"
#include "exfil/random.h"

namespace exfil {

struct PpoConfig {
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  int horizon = 2048;
  int minibatch = 32;
  int epochs = 5;
  double clip = 0.2;
  double entropy_coef = 0.02;
  double value_coef = 0.5;
  int episodes = 800;
  std::uint64_t seed = 0;
  // Learning signal only; reported rewards stay unscaled.
  double reward_scale = 1e-3;
  bool normalize_observations = true;
  bool mask_inapplicable = false;
  int step_cap = 10000;

  // Throws std::invalid_argument naming the first offending field.
  void Validate() const;
  bool operator==(const PpoConfig&) const = default;
};

// Standard hyperparameters with the episode budget used for each benchmark.
PpoConfig DefaultConfig(BenchmarkId id);

struct RolloutBuffer {
  explicit RolloutBuffer(int capacity = 2048) : capacity(capacity) {}

  int capacity;
  std::vector<Eigen::VectorXd> observations;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<bool> dones;

  int size() const { return static_cast<int>(actions.size()); }
  bool full() const { return size() >= capacity; }
  // Throws std::length_error when full.
  void Add(Eigen::VectorXd observation, int action, double log_prob, double reward,
           double value, bool done);
  void Clear();
};

struct ActionSample {
  int index = 0;
  double log_prob = 0.0;
};

// Inverse-CDF draw. Throws std::invalid_argument unless `probs` is a finite,
// non-negative vector summing to 1 within 1e-6.
ActionSample SampleAction(const Eigen::VectorXd& probs, Rng& rng);

// First index of the largest probability.
int GreedyAction(const Eigen::VectorXd& probs);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

// `dones[t]` marks s_{t+1} as terminal; `bootstrap_value` is V(s_T) for a
// rollout cut off at the horizon.
GaeResult ComputeGae(const std::vector<double>& rewards, const std::vector<double>& values,
                     double bootstrap_value, const std::vector<bool>& dones, double gamma,
                     double lambda);

// Rescales to zero mean and unit standard deviation (population).
void NormalizeAdvantages(std::vector<double>& advantages);

struct PpoBatch {
  Eigen::MatrixXd observations;  // input_dim x n
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd value_targets;
  Eigen::MatrixXd action_mask;  // actions x n of 0/1, or empty for no mask

  int size() const { return static_cast<int>(actions.size()); }
};

struct LossCoefficients {
  double clip = 0.2;
  double entropy = 0.02;
  double value = 0.5;
};

struct LossDiagnostics {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;  // mean squared error
  double entropy = 0.0;     // mean
  double clip_fraction = 0.0;
};

struct LossResult {
  LossDiagnostics diagnostics;
  GradientSet actor_grad;
  GradientSet critic_grad;
};

// policy + value * mse - entropy * mean_entropy, with gradients of the mean
// batch loss. Advantages are used as given. Throws std::domain_error on
// non-finite ratios.
LossResult PpoLoss(const PpoBatch& batch, const ActorCritic& net, const LossCoefficients& coef,
                   bool with_gradients = true);

struct EpisodeMetrics {
  int episode = 0;
  int steps = 0;
  double reward = 0.0;
  bool detected = false;
  bool completed = false;
  double path_coverage = 0.0;  // last selected path, 0 if none was selected

  bool operator==(const EpisodeMetrics&) const = default;
};

struct UpdateMetrics {
  int update = 0;
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;

  bool operator==(const UpdateMetrics&) const = default;
};

struct TrainingMetrics {
  std::vector<EpisodeMetrics> episodes;
  std::vector<UpdateMetrics> updates;
};

std::string EpisodeMetricsCsv(const std::vector<EpisodeMetrics>& rows);
std::string UpdateMetricsCsv(const std::vector<UpdateMetrics>& rows);
std::vector<EpisodeMetrics> ParseEpisodeMetricsCsv(const std::string& text);

struct TrainResult {
  Checkpoint checkpoint;
  TrainingMetrics metrics;
};

struct TrainHooks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  std::function<void(const UpdateMetrics&)> on_update;
  // Called after every update with the current networks and optimizers.
  std::function<void(const Checkpoint&)> on_checkpoint;
};

// Deterministic in (scenario, config). Throws std::domain_error when the
// loss becomes non-finite.
TrainResult Train(std::shared_ptr<const Scenario> scenario, const PpoConfig& config,
                  const TrainHooks& hooks = {});

// Observation as fed to the networks.
Eigen::VectorXd PrepareInput(const Observation& observation, const std::vector<double>& scale,
                             const std::vector<bool>& logarithmic);

enum class EvalMode { kStochastic, kGreedy };

struct EvalOptions {
  int episodes = 100;
  EvalMode mode = EvalMode::kStochastic;
  std::uint64_t seed = 0;
  int step_cap = 10000;
  bool mask_inapplicable = false;
  bool record_trajectories = true;
};

// Runs episodes without learning. Throws std::invalid_argument when the
// checkpoint does not fit the scenario's observation or action sizes.
std::vector<EpisodeRecord> Evaluate(const Checkpoint& checkpoint,
                                    std::shared_ptr<const Scenario> scenario,
                                    const EvalOptions& options);

}  // namespace exfil

#endif  // EXFIL_PPO_H_
