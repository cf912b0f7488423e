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

#ifndef EXFIL_RANDOM_H_
#define EXFIL_RANDOM_H_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace exfil {

// The engine's output sequence is fixed by the standard; the distributions in
// <random> are not, so every draw goes through the helpers below.
using Rng = std::mt19937_64;

// Uniform integer in [0, n). n must be positive.
std::uint64_t UniformIndex(Rng& rng, std::uint64_t n);

// Uniform integer in [lo, hi].
int UniformInt(Rng& rng, int lo, int hi);

// Uniform double in [0, 1) with 53 random bits.
double UniformUnit(Rng& rng);

double StandardNormal(Rng& rng);

template <typename T>
void Shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = UniformIndex(rng, i);
    std::swap(values[i - 1], values[j]);
  }
}

std::string SerializeRng(const Rng& rng);
Rng DeserializeRng(const std::string& text);

}  // namespace exfil

#endif  // EXFIL_RANDOM_H_
