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

#include "exfil/neural.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "exfil/random.h"

namespace exfil {
namespace {

constexpr char kMagic[8] = {'E', 'X', 'F', 'I', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

Eigen::MatrixXd Orthogonal(int rows, int cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const int r = tall ? rows : cols;
  const int c = tall ? cols : rows;
  Eigen::MatrixXd a(r, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) a(i, j) = StandardNormal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  Eigen::MatrixXd upper = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  // Sign fix makes the draw uniform over orthogonal matrices.
  for (int j = 0; j < c; ++j) {
    if (upper(j, j) < 0) q.col(j) *= -1.0;
  }
  q *= gain;
  return tall ? q : Eigen::MatrixXd(q.transpose());
}

void CheckShape(const MlpParams& a, const MlpParams& b, const char* what) {
  if (!a.SameShape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// Little-endian fixed-width encoding.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void U64(std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(bytes, 8);
  }
  void I64(std::int64_t v) { U64(static_cast<std::uint64_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void String(const std::string& s) {
    U64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void Doubles(const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) F64(data[i]);
  }
  void Params(const MlpParams& p) {
    U64(p.layers.size());
    for (const DenseLayer& layer : p.layers) {
      U64(layer.weight.rows());
      U64(layer.weight.cols());
      Doubles(layer.weight.data(), layer.weight.size());
      Doubles(layer.bias.data(), layer.bias.size());
    }
  }
  void Adam(const AdamState& s) {
    Params(s.first_moment);
    Params(s.second_moment);
    I64(s.step);
    F64(s.beta1);
    F64(s.beta2);
    F64(s.epsilon);
    F64(s.learning_rate);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void Bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CheckpointError("checkpoint truncated");
  }
  std::uint64_t U64() {
    unsigned char bytes[8];
    Bytes(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
  }
  std::int64_t I64() { return static_cast<std::int64_t>(U64()); }
  double F64() { return std::bit_cast<double>(U64()); }
  std::uint64_t Size(std::uint64_t limit) {
    std::uint64_t n = U64();
    if (n > limit) throw CheckpointError("checkpoint field size out of range");
    return n;
  }
  std::string String() {
    std::string s(Size(1 << 26), '\0');
    Bytes(s.data(), s.size());
    return s;
  }
  void Doubles(double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) data[i] = F64();
  }
  MlpParams Params() {
    MlpParams p;
    p.layers.resize(Size(16));
    for (DenseLayer& layer : p.layers) {
      auto rows = static_cast<Eigen::Index>(Size(1 << 20));
      auto cols = static_cast<Eigen::Index>(Size(1 << 20));
      layer.weight.resize(rows, cols);
      layer.bias.resize(rows);
      Doubles(layer.weight.data(), layer.weight.size());
      Doubles(layer.bias.data(), layer.bias.size());
    }
    for (std::size_t i = 1; i < p.layers.size(); ++i) {
      if (p.layers[i].weight.cols() != p.layers[i - 1].weight.rows()) {
        throw CheckpointError("checkpoint layer dimensions do not chain");
      }
    }
    return p;
  }
  AdamState Adam() {
    AdamState s;
    s.first_moment = Params();
    s.second_moment = Params();
    s.step = I64();
    s.beta1 = F64();
    s.beta2 = F64();
    s.epsilon = F64();
    s.learning_rate = F64();
    return s;
  }

 private:
  std::istream& in_;
};

}  // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool MlpParams::AllFinite() const {
  for (const DenseLayer& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool MlpParams::SameShape(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

MlpParams MlpParams::ZerosLike() const {
  MlpParams out;
  for (const DenseLayer& layer : layers) {
    out.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                          Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return out;
}

MlpParams InitMlp(int input_dim, int output_dim, std::uint64_t seed, OutputHead head) {
  if (input_dim <= 0 || output_dim <= 0) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  Rng rng(seed);
  const int dims[] = {input_dim, kHiddenUnits1, kHiddenUnits2, output_dim};
  MlpParams params;
  for (int i = 0; i < 3; ++i) {
    const bool last = (i == 2);
    const double gain = last && head == OutputHead::kPolicy ? 0.01 : 1.0;
    params.layers.push_back({Orthogonal(dims[i + 1], dims[i], gain, rng),
                             Eigen::VectorXd::Zero(dims[i + 1])});
  }
  return params;
}

Eigen::MatrixXd MlpForward(const MlpParams& params, const Eigen::MatrixXd& inputs,
                           ForwardCache* cache) {
  if (inputs.rows() != params.input_dim()) {
    throw std::invalid_argument("input has " + std::to_string(inputs.rows()) +
                                " features, network expects " +
                                std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(inputs);
  }
  Eigen::MatrixXd a = inputs;
  const std::size_t n = params.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const DenseLayer& layer = params.layers[i];
    Eigen::MatrixXd z = layer.weight * a;
    z.colwise() += layer.bias;
    if (i + 1 == n) return z;
    a = z.array().tanh().matrix();
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

GradientSet MlpBackward(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& output_grad) {
  const std::size_t n = params.layers.size();
  if (cache.activations.size() != n) throw std::invalid_argument("forward cache does not match network");
  if (output_grad.rows() != params.output_dim() ||
      output_grad.cols() != cache.activations.front().cols()) {
    throw std::invalid_argument("output gradient has the wrong shape");
  }
  GradientSet grads;
  grads.layers.resize(n);
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t i = n; i-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[i];
    grads.layers[i].weight = delta * input.transpose();
    grads.layers[i].bias = delta.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd upstream = params.layers[i].weight.transpose() * delta;
    delta = upstream.array() * (1.0 - input.array().square());
  }
  if (!grads.AllFinite()) throw std::domain_error("non-finite gradient");
  return grads;
}

Eigen::MatrixXd SoftmaxColumns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::VectorXd e = (logits.col(j).array() - logits.col(j).maxCoeff()).exp();
    out.col(j) = e / e.sum();
  }
  return out;
}

ActorCritic InitActorCritic(int input_dim, int action_count, std::uint64_t seed) {
  Rng rng(seed);
  const std::uint64_t actor_seed = rng();
  const std::uint64_t critic_seed = rng();
  return {InitMlp(input_dim, action_count, actor_seed, OutputHead::kPolicy),
          InitMlp(input_dim, 1, critic_seed, OutputHead::kValue)};
}

PolicyOutput Forward(const ActorCritic& net, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw std::invalid_argument("non-finite network input");
  PolicyOutput out;
  out.probs = SoftmaxColumns(MlpForward(net.actor, x)).col(0);
  out.value = MlpForward(net.critic, x)(0, 0);
  return out;
}

AdamState MakeAdamState(const MlpParams& params, double learning_rate) {
  AdamState state;
  state.first_moment = params.ZerosLike();
  state.second_moment = params.ZerosLike();
  state.learning_rate = learning_rate;
  return state;
}

void AdamStep(MlpParams& params, const GradientSet& grads, AdamState& state) {
  CheckShape(params, grads, "adam gradients");
  CheckShape(params, state.first_moment, "adam first moment");
  CheckShape(params, state.second_moment, "adam second moment");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= state.learning_rate * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight,
           state.first_moment.layers[i].weight, state.second_moment.layers[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias, state.first_moment.layers[i].bias,
           state.second_moment.layers[i].bias);
  }
}

void WriteCheckpoint(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic, sizeof kMagic);
  Writer w(out);
  w.U64(kCheckpointVersion);
  w.Params(c.net.actor);
  w.Params(c.net.critic);
  w.Adam(c.actor_optimizer);
  w.Adam(c.critic_optimizer);
  w.U64(c.input_scale.size());
  w.Doubles(c.input_scale.data(), c.input_scale.size());
  w.U64(c.input_log.size());
  for (bool b : c.input_log) w.U64(b ? 1 : 0);
  w.String(c.rng_state);
  w.I64(c.episodes);
  w.I64(c.updates);
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint ReadCheckpoint(std::istream& in) {
  char magic[sizeof kMagic];
  Reader r(in);
  r.Bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + sizeof magic, kMagic)) throw CheckpointError("not a checkpoint file");
  if (std::uint64_t version = r.U64(); version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.net.actor = r.Params();
  c.net.critic = r.Params();
  c.actor_optimizer = r.Adam();
  c.critic_optimizer = r.Adam();
  c.input_scale.resize(r.Size(1 << 26));
  r.Doubles(c.input_scale.data(), c.input_scale.size());
  c.input_log.resize(r.Size(1 << 26));
  for (std::size_t i = 0; i < c.input_log.size(); ++i) c.input_log[i] = r.U64() != 0;
  c.rng_state = r.String();
  c.episodes = r.I64();
  c.updates = r.I64();
  if (c.net.actor.input_dim() != c.net.critic.input_dim() ||
      static_cast<int>(c.input_scale.size()) != c.net.actor.input_dim() ||
      c.input_log.size() != c.input_scale.size() ||
      c.net.critic.output_dim() != 1) {
    throw CheckpointError("checkpoint networks are inconsistent");
  }
  return c;
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  WriteCheckpoint(out, checkpoint);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return ReadCheckpoint(in);
}

}  // namespace exfil
