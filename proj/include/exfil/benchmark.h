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

#ifndef EXFIL_BENCHMARK_H_
#define EXFIL_BENCHMARK_H_

#include <cstdint>
#include <optional>
#include <string_view>

#include "exfil/scenario.h"

namespace exfil {

enum class BenchmarkId { kNet1, kNet2 };

std::optional<BenchmarkId> ParseBenchmarkId(std::string_view text);

// Builds one of the two reference networks.
//
// net1: 10 subnets, 56 hosts (3-12 per subnet), foothold (8, 2), exfiltration
// target (2, 0) running DHCP server, subnet 2 the only internet-facing one.
// Two routes are planted: (8,2)->(4,2)->(2,0), where (4,2) lacks DHCP, and
// the complete DHCP route (8,2)->(6,0)->(5,1)->(2,0).
//
// net2: 101 subnets, 1444 hosts (3-50 per subnet), foothold (44, 5), target
// (5, 10) running HTTPS, with the complete route (44,5)->(24,18)->(5,10).
//
// Everything else (subnet sizes, extra links, host software) is drawn from
// `seed`; the same (id, seed) always yields the same scenario.
Scenario GenerateBenchmark(BenchmarkId id, std::uint64_t seed);

// Throws std::invalid_argument for ids other than "net1" and "net2".
Scenario GenerateBenchmark(std::string_view id, std::uint64_t seed);

// Three subnets in a line: foothold (0,0) -> relay (1,0) -> target (2,0),
// all running HTTPS. Used for smoke tests and small training runs.
Scenario MakeRelayScenario();

// Risk classes used by the generated scenarios.
ServiceRiskTable DefaultRiskTable();

}  // namespace exfil

#endif  // EXFIL_BENCHMARK_H_
