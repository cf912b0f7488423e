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

#ifndef EXFIL_SCENARIO_H_
#define EXFIL_SCENARIO_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace exfil {

struct HostAddress {
  int subnet = 0;
  int local = 0;

  friend auto operator<=>(const HostAddress&, const HostAddress&) = default;
  // "(8, 2)"
  std::string ToString() const;
};

enum class RiskClass { kLow = 0, kMedium = 1, kHigh = 2 };
enum class ActionKind { kSubnetScan, kExploit, kUpload, kSleep };

std::string_view ToString(RiskClass risk);
std::optional<RiskClass> ParseRiskClass(std::string_view text);
std::string_view ToString(ActionKind kind);
std::optional<ActionKind> ParseActionKind(std::string_view text);

struct HostSpec {
  HostAddress address;
  std::string os;
  std::set<std::string> services;
  std::set<std::string> processes;
  // Vulnerability tag (CVE style) -> the service it targets.
  std::map<std::string, std::string> vulnerabilities;
  double discovery_value = 0.0;
  double infection_value = 0.0;
  bool internet_facing = false;
  bool exfiltration_target = false;

  bool RunsService(const std::string& service) const {
    return services.contains(service);
  }
  bool operator==(const HostSpec&) const = default;
};

struct SubnetSpec {
  int id = 0;
  int host_count = 0;
  std::set<int> connected;
  bool internet_facing = false;

  bool operator==(const SubnetSpec&) const = default;
};

// Thresholds of the egress firewall guarding each subnet.
struct FirewallPolicy {
  double max_upload_volume_mb = 5000.0;
  double max_upload_time_s = 240.0;
  double update_frequency_s = 86400.0;

  bool operator==(const FirewallPolicy&) const = default;
};

struct CostRow {
  double low = 0.0;
  double medium = 0.0;
  double high = 0.0;

  double For(RiskClass risk) const;
  bool operator==(const CostRow&) const = default;
};

// Cyber-terrain model: services are grouped into risk classes and each
// costed action pays according to the riskiest service on its target.
struct ServiceRiskTable {
  std::map<std::string, RiskClass> service_risk;
  CostRow subnet_scan{5.0, 10.0, 20.0};
  CostRow exploit{10.0, 25.0, 50.0};
  CostRow upload{10.0, 25.0, 50.0};

  // Throws std::invalid_argument for kSleep, which has no cost.
  const CostRow& CostsFor(ActionKind kind) const;
  // Unknown services are treated as low risk.
  RiskClass ClassOf(const std::string& service) const;
  bool operator==(const ServiceRiskTable&) const = default;
};

struct RewardTable {
  double discovery = 1000.0;
  double exploit = 1000.0;
  double protocol_path = 1000.0;
  double upload_per_mb = 0.1;
  double completion_bonus = 10000.0;

  bool operator==(const RewardTable&) const = default;
};

// Wall-clock seconds consumed by an applicable action of each kind.
struct ActionTimes {
  double subnet_scan = 30.0;
  double exploit = 10.0;
  double upload = 10.0;
  double sleep = 60.0;

  double For(ActionKind kind) const;
  bool operator==(const ActionTimes&) const = default;
};

struct UploadRates {
  double fast_mb_per_s = 100.0;
  double slow_mb_per_s = 1.0;

  bool operator==(const UploadRates&) const = default;
};

inline constexpr int kScenarioSchemaVersion = 1;

// Immutable description of a network and the attack campaign against it.
// Subnets are kept sorted by id and hosts by address.
struct Scenario {
  std::vector<SubnetSpec> subnets;
  std::vector<HostSpec> hosts;
  FirewallPolicy firewall;
  ServiceRiskTable risk_table;
  HostAddress foothold;
  std::string exfil_protocol;
  double payload_size_mb = 10000.0;
  RewardTable rewards;
  ActionTimes action_times;
  UploadRates upload_rates;

  const HostSpec* FindHost(HostAddress address) const;
  const SubnetSpec* FindSubnet(int id) const;
  bool operator==(const Scenario&) const = default;
};

// Sorts subnets and hosts into canonical order.
void Canonicalize(Scenario& scenario);

struct Violation {
  std::string code;    // e.g. "duplicate_address"
  std::string entity;  // field path of the offending entity, e.g. "hosts[1,0]"
  std::string message;
};

std::vector<Violation> ValidateScenario(const Scenario& scenario);

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { kSyntax, kSchema, kSemantic };

  ScenarioError(Kind kind, std::string field_path, const std::string& message);

  Kind kind() const { return kind_; }
  const std::string& field_path() const { return field_path_; }

 private:
  Kind kind_;
  std::string field_path_;
};

Scenario ParseScenario(std::string_view document);
std::string SerializeScenario(const Scenario& scenario);

Scenario LoadScenarioFile(const std::filesystem::path& path);
void SaveScenarioFile(const Scenario& scenario,
                      const std::filesystem::path& path);

}  // namespace exfil

#endif  // EXFIL_SCENARIO_H_
