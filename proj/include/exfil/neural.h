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

#ifndef EXFIL_NEURAL_H_
#define EXFIL_NEURAL_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace exfil {

inline constexpr int kHiddenUnits1 = 64;
inline constexpr int kHiddenUnits2 = 32;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  bool operator==(const DenseLayer& other) const {
    return weight == other.weight && bias == other.bias;
  }
};

// Feed-forward network input -> 64 -> 32 -> output with tanh hidden units and
// a linear output layer.
struct MlpParams {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }
  std::size_t parameter_count() const;
  bool AllFinite() const;
  bool SameShape(const MlpParams& other) const;
  MlpParams ZerosLike() const;

  bool operator==(const MlpParams&) const = default;
};

// dLoss/dParameter, laid out like the parameters it differentiates.
using GradientSet = MlpParams;

enum class OutputHead { kPolicy, kValue };

// Orthogonal weights (gain 1, or 0.01 on a policy output layer), zero biases.
// Throws std::invalid_argument for non-positive dimensions.
MlpParams InitMlp(int input_dim, int output_dim, std::uint64_t seed,
                  OutputHead head = OutputHead::kPolicy);

// Activations kept for the backward pass. Column j of every matrix belongs
// to sample j.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // input, hidden 1, hidden 2
};

// Columns of `inputs` are samples; returns output_dim x batch.
Eigen::MatrixXd MlpForward(const MlpParams& params, const Eigen::MatrixXd& inputs,
                           ForwardCache* cache = nullptr);

// Reverse-mode pass: given dLoss/dOutput for the cached batch, returns
// dLoss/dParameter. Throws std::domain_error on non-finite values.
GradientSet MlpBackward(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& output_grad);

// Numerically stable softmax of each column.
Eigen::MatrixXd SoftmaxColumns(const Eigen::MatrixXd& logits);

struct ActorCritic {
  MlpParams actor;   // action logits
  MlpParams critic;  // scalar state value

  bool operator==(const ActorCritic&) const = default;
};

ActorCritic InitActorCritic(int input_dim, int action_count, std::uint64_t seed);

struct PolicyOutput {
  Eigen::VectorXd probs;
  double value = 0.0;
};

// Throws std::invalid_argument on a dimension mismatch or non-finite input.
PolicyOutput Forward(const ActorCritic& net, const Eigen::VectorXd& x);

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 3e-4;

  bool operator==(const AdamState&) const = default;
};

AdamState MakeAdamState(const MlpParams& params, double learning_rate);

// Bias-corrected Adam update in place. Throws std::invalid_argument when the
// shapes differ.
void AdamStep(MlpParams& params, const GradientSet& grads, AdamState& state);

// Everything needed to resume or evaluate a run.
struct Checkpoint {
  ActorCritic net;
  AdamState actor_optimizer;
  AdamState critic_optimizer;
  std::vector<double> input_scale;  // observation divisors
  std::vector<bool> input_log;      // features passed through log1p
  std::string rng_state;
  std::int64_t episodes = 0;
  std::int64_t updates = 0;

  bool operator==(const Checkpoint&) const = default;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void WriteCheckpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint ReadCheckpoint(std::istream& in);
void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace exfil

#endif  // EXFIL_NEURAL_H_
