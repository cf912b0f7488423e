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

#ifndef EXFIL_CLI_H_
#define EXFIL_CLI_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace exfil {

inline constexpr std::string_view kToolName = "exfilpath";
inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode { kExitOk = 0, kExitInvalid = 1, kExitRuntime = 2 };

// 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::string_view bytes);

// Entry point shared by the binary and the tests. `args` excludes the
// program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace exfil

#endif  // EXFIL_CLI_H_
