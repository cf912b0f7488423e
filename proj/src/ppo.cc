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

#include "exfil/ppo.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace exfil {
namespace {

constexpr double kMaskedLogit = -1e9;

std::string FormatDouble(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Eigen::VectorXd ApplicableMask(const Environment& env) {
  const auto& actions = env.actions();
  Eigen::VectorXd mask(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) mask[i] = env.IsApplicable(actions[i]) ? 1.0 : 0.0;
  return mask;
}

// Probabilities under the optional mask, computed from the logits so that
// sampling and the loss agree.
Eigen::VectorXd PolicyProbs(const ActorCritic& net, const Eigen::VectorXd& x,
                            const Eigen::VectorXd* mask) {
  Eigen::MatrixXd logits = MlpForward(net.actor, x);
  if (mask) logits.col(0).array() += (1.0 - mask->array()) * kMaskedLogit;
  return SoftmaxColumns(logits).col(0);
}

double Value(const ActorCritic& net, const Eigen::VectorXd& x) {
  return MlpForward(net.critic, x)(0, 0);
}

struct EpisodeTracker {
  int steps = 0;
  double reward = 0.0;
  double coverage = 0.0;
  std::optional<PathCandidate> last_path;

  void Observe(const Environment& env, double r) {
    ++steps;
    reward += r;
    if (env.state().selected_path) {
      last_path = env.state().selected_path;
      coverage = last_path->coverage;
    }
  }
};

class Trainer {
 public:
  Trainer(std::shared_ptr<const Scenario> scenario, const PpoConfig& config, const TrainHooks& hooks)
      : config_(config),
        hooks_(hooks),
        env_(std::move(scenario), EnvOptions{config.step_cap, {}}),
        rng_(config.seed),
        buffer_(config.horizon) {
    const int input_dim = env_.layout().size;
    const int action_count = static_cast<int>(env_.actions().size());
    checkpoint_.net = InitActorCritic(input_dim, action_count, rng_());
    checkpoint_.actor_optimizer = MakeAdamState(checkpoint_.net.actor, config.actor_lr);
    checkpoint_.critic_optimizer = MakeAdamState(checkpoint_.net.critic, config.critic_lr);
    checkpoint_.input_scale = config.normalize_observations
                                  ? env_.observation_scale()
                                  : std::vector<double>(input_dim, 1.0);
    checkpoint_.input_log = config.normalize_observations ? env_.log_features()
                                                          : std::vector<bool>(input_dim, false);
  }

  TrainResult Run() {
    const LossCoefficients coef{config_.clip, config_.entropy_coef, config_.value_coef};
    Eigen::VectorXd x = PrepareInput(env_.Reset(rng_()), checkpoint_.input_scale, checkpoint_.input_log);
    EpisodeTracker episode;
    int finished = 0;
    while (finished < config_.episodes) {
      Eigen::VectorXd mask;
      if (config_.mask_inapplicable) mask = ApplicableMask(env_);
      Eigen::VectorXd probs =
          PolicyProbs(checkpoint_.net, x, config_.mask_inapplicable ? &mask : nullptr);
      const double value = Value(checkpoint_.net, x);
      ActionSample sample = SampleAction(probs, rng_);
      StepOutcome outcome = env_.Step(sample.index);
      episode.Observe(env_, outcome.reward);
      buffer_.Add(std::move(x), sample.index, sample.log_prob, outcome.reward * config_.reward_scale,
                  value, outcome.done);
      if (config_.mask_inapplicable) masks_.push_back(std::move(mask));

      if (outcome.done) {
        const EnvState& s = env_.state();
        EpisodeMetrics row{finished, episode.steps, episode.reward,
                           s.termination == Termination::kDetected, s.completed, episode.coverage};
        metrics_.episodes.push_back(row);
        if (hooks_.on_episode) hooks_.on_episode(row);
        ++finished;
        episode = EpisodeTracker{};
        x = PrepareInput(env_.Reset(rng_()), checkpoint_.input_scale, checkpoint_.input_log);
      } else {
        x = PrepareInput(outcome.observation, checkpoint_.input_scale, checkpoint_.input_log);
      }

      if (buffer_.full() || finished == config_.episodes) {
        const double bootstrap = outcome.done ? 0.0 : Value(checkpoint_.net, x);
        Update(bootstrap, coef);
      }
    }
    checkpoint_.rng_state = SerializeRng(rng_);
    checkpoint_.episodes = finished;
    return {std::move(checkpoint_), std::move(metrics_)};
  }

 private:
  void Update(double bootstrap, const LossCoefficients& coef) {
    const int n = buffer_.size();
    GaeResult gae = ComputeGae(buffer_.rewards, buffer_.values, bootstrap, buffer_.dones,
                               config_.gamma, config_.lambda);
    NormalizeAdvantages(gae.advantages);

    const int dim = static_cast<int>(buffer_.observations.front().size());
    Eigen::MatrixXd observations(dim, n);
    for (int i = 0; i < n; ++i) observations.col(i) = buffer_.observations[i];
    const int action_count = checkpoint_.net.actor.output_dim();
    Eigen::MatrixXd masks;
    if (config_.mask_inapplicable) {
      masks.resize(action_count, n);
      for (int i = 0; i < n; ++i) masks.col(i) = masks_[i];
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    LossDiagnostics sum;
    int batches = 0;
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
      Shuffle(order, rng_);
      for (int start = 0; start < n; start += config_.minibatch) {
        const int m = std::min(config_.minibatch, n - start);
        PpoBatch batch;
        batch.observations.resize(dim, m);
        batch.old_log_probs.resize(m);
        batch.advantages.resize(m);
        batch.value_targets.resize(m);
        if (config_.mask_inapplicable) batch.action_mask.resize(action_count, m);
        for (int j = 0; j < m; ++j) {
          const int i = order[start + j];
          batch.observations.col(j) = observations.col(i);
          batch.actions.push_back(buffer_.actions[i]);
          batch.old_log_probs[j] = buffer_.log_probs[i];
          batch.advantages[j] = gae.advantages[i];
          batch.value_targets[j] = gae.value_targets[i];
          if (config_.mask_inapplicable) batch.action_mask.col(j) = masks.col(i);
        }
        LossResult result = PpoLoss(batch, checkpoint_.net, coef);
        const LossDiagnostics& d = result.diagnostics;
        if (!std::isfinite(d.loss)) {
          throw std::domain_error("non-finite loss in update " +
                                  std::to_string(metrics_.updates.size()));
        }
        AdamStep(checkpoint_.net.actor, result.actor_grad, checkpoint_.actor_optimizer);
        AdamStep(checkpoint_.net.critic, result.critic_grad, checkpoint_.critic_optimizer);
        sum.loss += d.loss;
        sum.policy_loss += d.policy_loss;
        sum.value_loss += d.value_loss;
        sum.entropy += d.entropy;
        sum.clip_fraction += d.clip_fraction;
        ++batches;
      }
    }
    UpdateMetrics row{static_cast<int>(metrics_.updates.size()), sum.loss / batches,
                      sum.policy_loss / batches, sum.value_loss / batches, sum.entropy / batches,
                      sum.clip_fraction / batches};
    metrics_.updates.push_back(row);
    ++checkpoint_.updates;
    if (hooks_.on_update) hooks_.on_update(row);
    if (hooks_.on_checkpoint) hooks_.on_checkpoint(checkpoint_);
    buffer_.Clear();
    masks_.clear();
  }

  PpoConfig config_;
  TrainHooks hooks_;
  Environment env_;
  Rng rng_;
  RolloutBuffer buffer_;
  std::vector<Eigen::VectorXd> masks_;
  Checkpoint checkpoint_;
  TrainingMetrics metrics_;
};

}  // namespace

void PpoConfig::Validate() const {
  auto require = [](bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
  };
  require(actor_lr > 0 && critic_lr > 0, "learning rates must be positive");
  require(gamma > 0 && gamma <= 1, "gamma must lie in (0, 1]");
  require(lambda >= 0 && lambda <= 1, "lambda must lie in [0, 1]");
  require(horizon > 0, "horizon must be positive");
  require(minibatch > 0 && minibatch <= horizon, "minibatch must lie in [1, horizon]");
  require(epochs > 0, "epochs must be positive");
  require(clip > 0, "clip must be positive");
  require(entropy_coef >= 0 && value_coef >= 0, "loss coefficients must be non-negative");
  require(episodes >= 0, "episodes must be non-negative");
  require(reward_scale > 0, "reward scale must be positive");
  require(step_cap > 0, "step cap must be positive");
}

PpoConfig DefaultConfig(BenchmarkId id) {
  PpoConfig config;
  config.episodes = id == BenchmarkId::kNet1 ? 800 : 1000;
  return config;
}

void RolloutBuffer::Add(Eigen::VectorXd observation, int action, double log_prob, double reward,
                        double value, bool done) {
  if (full()) throw std::length_error("rollout buffer is full");
  observations.push_back(std::move(observation));
  actions.push_back(action);
  log_probs.push_back(log_prob);
  rewards.push_back(reward);
  values.push_back(value);
  dones.push_back(done);
}

void RolloutBuffer::Clear() {
  observations.clear();
  actions.clear();
  log_probs.clear();
  rewards.clear();
  values.clear();
  dones.clear();
}

ActionSample SampleAction(const Eigen::VectorXd& probs, Rng& rng) {
  if (probs.size() == 0 || !probs.allFinite() || probs.minCoeff() < 0.0 ||
      std::abs(probs.sum() - 1.0) > 1e-6) {
    throw std::invalid_argument("action probabilities are not a valid distribution");
  }
  const double u = UniformUnit(rng);
  double cumulative = 0.0;
  int index = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    index = static_cast<int>(i);
    cumulative += probs[i];
    if (u < cumulative) break;
  }
  return {index, std::log(probs[index])};
}

int GreedyAction(const Eigen::VectorXd& probs) {
  Eigen::Index best = 0;
  probs.maxCoeff(&best);
  return static_cast<int>(best);
}

GaeResult ComputeGae(const std::vector<double>& rewards, const std::vector<double>& values,
                     double bootstrap_value, const std::vector<bool>& dones, double gamma,
                     double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("rewards, values and dones must have equal length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.value_targets.assign(n, 0.0);
  double next_advantage = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_advantage = delta + gamma * lambda * live * next_advantage;
    out.advantages[t] = next_advantage;
    out.value_targets[t] = next_advantage + values[t];
    next_value = values[t];
  }
  return out;
}

void NormalizeAdvantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  for (double& a : advantages) a = (a - mean) / (std + 1e-8);
}

LossResult PpoLoss(const PpoBatch& batch, const ActorCritic& net, const LossCoefficients& coef,
                   bool with_gradients) {
  const int n = batch.size();
  if (n == 0) throw std::invalid_argument("empty batch");
  if (batch.observations.cols() != n || batch.old_log_probs.size() != n ||
      batch.advantages.size() != n || batch.value_targets.size() != n) {
    throw std::invalid_argument("batch fields have inconsistent lengths");
  }
  ForwardCache actor_cache, critic_cache;
  Eigen::MatrixXd logits = MlpForward(net.actor, batch.observations, &actor_cache);
  if (batch.action_mask.size() > 0) {
    logits.array() += (1.0 - batch.action_mask.array()) * kMaskedLogit;
  }
  Eigen::MatrixXd values = MlpForward(net.critic, batch.observations, &critic_cache);

  const double inv_n = 1.0 / n;
  Eigen::MatrixXd logit_grad(logits.rows(), n);
  double surrogate_sum = 0.0, entropy_sum = 0.0;
  int clipped = 0;
  for (int j = 0; j < n; ++j) {
    const int a = batch.actions[j];
    if (a < 0 || a >= logits.rows()) throw std::invalid_argument("action index out of range");
    const double max = logits.col(j).maxCoeff();
    const double lse = max + std::log((logits.col(j).array() - max).exp().sum());
    Eigen::VectorXd log_p = logits.col(j).array() - lse;
    Eigen::VectorXd p = log_p.array().exp();
    const double entropy = -(p.array() * log_p.array()).sum();
    const double ratio = std::exp(log_p[a] - batch.old_log_probs[j]);
    if (!std::isfinite(ratio)) throw std::domain_error("non-finite probability ratio");
    const double adv = batch.advantages[j];
    const double unclipped = ratio * adv;
    const double clipped_ratio = std::clamp(ratio, 1.0 - coef.clip, 1.0 + coef.clip);
    surrogate_sum += std::min(unclipped, clipped_ratio * adv);
    entropy_sum += entropy;
    const bool outside = std::abs(ratio - 1.0) > coef.clip;
    if (outside) ++clipped;
    if (!with_gradients) continue;
    // The min takes the clipped branch with a flat ratio only when it is
    // strictly smaller and the ratio is outside the trust region.
    const bool flat = clipped_ratio * adv < unclipped && (ratio <= 1.0 - coef.clip || ratio >= 1.0 + coef.clip);
    const double d_log_pa = flat ? 0.0 : -inv_n * unclipped;
    Eigen::VectorXd g = -d_log_pa * p;
    g[a] += d_log_pa;
    g.array() += coef.entropy * inv_n * p.array() * (log_p.array() + entropy);
    logit_grad.col(j) = g;
  }
  Eigen::ArrayXd err = values.row(0).transpose().array() - batch.value_targets.array();

  LossResult out;
  LossDiagnostics& d = out.diagnostics;
  d.policy_loss = -surrogate_sum * inv_n;
  d.value_loss = err.square().mean();
  d.entropy = entropy_sum * inv_n;
  d.clip_fraction = clipped * inv_n;
  d.loss = d.policy_loss + coef.value * d.value_loss - coef.entropy * d.entropy;
  if (with_gradients) {
    out.actor_grad = MlpBackward(net.actor, actor_cache, logit_grad);
    Eigen::MatrixXd value_grad = (2.0 * coef.value * inv_n * err).matrix().transpose();
    out.critic_grad = MlpBackward(net.critic, critic_cache, value_grad);
  }
  return out;
}

std::string EpisodeMetricsCsv(const std::vector<EpisodeMetrics>& rows) {
  std::string out = "episode,steps,reward,detected,completed,path_coverage\n";
  for (const EpisodeMetrics& r : rows) {
    out += std::to_string(r.episode) + "," + std::to_string(r.steps) + "," +
           FormatDouble(r.reward) + "," + (r.detected ? "1" : "0") + "," +
           (r.completed ? "1" : "0") + "," + FormatDouble(r.path_coverage) + "\n";
  }
  return out;
}

std::string UpdateMetricsCsv(const std::vector<UpdateMetrics>& rows) {
  std::string out = "update,loss,policy_loss,value_loss,entropy,clip_fraction\n";
  for (const UpdateMetrics& r : rows) {
    out += std::to_string(r.update) + "," + FormatDouble(r.loss) + "," +
           FormatDouble(r.policy_loss) + "," + FormatDouble(r.value_loss) + "," +
           FormatDouble(r.entropy) + "," + FormatDouble(r.clip_fraction) + "\n";
  }
  return out;
}

std::vector<EpisodeMetrics> ParseEpisodeMetricsCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "episode,steps,reward,detected,completed,path_coverage") {
    throw std::invalid_argument("missing episode metrics header");
  }
  std::vector<EpisodeMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream fields(line);
    for (std::string cell; std::getline(fields, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw std::invalid_argument("bad metrics row: " + line);
    try {
      rows.push_back({std::stoi(cells[0]), std::stoi(cells[1]), std::stod(cells[2]),
                      cells[3] == "1", cells[4] == "1", std::stod(cells[5])});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bad metrics row: " + line);
    }
  }
  return rows;
}

TrainResult Train(std::shared_ptr<const Scenario> scenario, const PpoConfig& config,
                  const TrainHooks& hooks) {
  config.Validate();
  return Trainer(std::move(scenario), config, hooks).Run();
}

Eigen::VectorXd PrepareInput(const Observation& observation, const std::vector<double>& scale,
                             const std::vector<bool>& logarithmic) {
  if (observation.size() != scale.size() || observation.size() != logarithmic.size()) {
    throw std::invalid_argument("observation and scaling sizes differ");
  }
  Eigen::VectorXd x(observation.size());
  for (std::size_t i = 0; i < observation.size(); ++i) {
    x[i] = observation[i] / scale[i];
    if (logarithmic[i]) x[i] = std::log1p(x[i]);
  }
  return x;
}

std::vector<EpisodeRecord> Evaluate(const Checkpoint& checkpoint,
                                    std::shared_ptr<const Scenario> scenario,
                                    const EvalOptions& options) {
  Environment env(std::move(scenario), EnvOptions{options.step_cap, {}});
  const int input_dim = env.layout().size;
  const int action_count = static_cast<int>(env.actions().size());
  if (checkpoint.net.actor.input_dim() != input_dim ||
      checkpoint.net.actor.output_dim() != action_count ||
      static_cast<int>(checkpoint.input_scale.size()) != input_dim) {
    throw std::invalid_argument("checkpoint expects " + std::to_string(checkpoint.net.actor.input_dim()) +
                                " inputs and " + std::to_string(checkpoint.net.actor.output_dim()) +
                                " actions; scenario has " + std::to_string(input_dim) + " and " +
                                std::to_string(action_count));
  }
  Rng rng(options.seed);
  std::vector<EpisodeRecord> records;
  for (int e = 0; e < options.episodes; ++e) {
    Eigen::VectorXd x = PrepareInput(env.Reset(rng()), checkpoint.input_scale, checkpoint.input_log);
    EpisodeRecord record;
    EpisodeTracker tracker;
    bool done = false;
    while (!done) {
      Eigen::VectorXd mask;
      if (options.mask_inapplicable) mask = ApplicableMask(env);
      Eigen::VectorXd probs =
          PolicyProbs(checkpoint.net, x, options.mask_inapplicable ? &mask : nullptr);
      const int action = options.mode == EvalMode::kGreedy ? GreedyAction(probs)
                                                           : SampleAction(probs, rng).index;
      StepOutcome outcome = env.Step(action);
      tracker.Observe(env, outcome.reward);
      if (options.record_trajectories) {
        record.trajectory.push_back(
            MakeStepRecord(tracker.steps - 1, env.actions()[action], outcome, env.state()));
      }
      done = outcome.done;
      x = PrepareInput(outcome.observation, checkpoint.input_scale, checkpoint.input_log);
    }
    record.steps = tracker.steps;
    record.reward = tracker.reward;
    record.completed = env.state().completed;
    record.detected = env.state().termination == Termination::kDetected;
    record.final_path = tracker.last_path;
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace exfil
