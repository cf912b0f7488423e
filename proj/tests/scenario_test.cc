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

#include "exfil/scenario.h"

#include <filesystem>

#include <gtest/gtest.h>

#include "exfil/benchmark.h"
#include "json.hpp"

namespace exfil {
namespace {

using json = nlohmann::ordered_json;

Scenario SingleHost() {
  Scenario s;
  s.subnets.push_back({.id = 0, .host_count = 1, .connected = {}, .internet_facing = true});
  HostSpec h;
  h.address = {0, 0};
  h.os = "linux";
  h.services = {"https"};
  h.internet_facing = true;
  h.exfiltration_target = true;
  s.hosts.push_back(h);
  s.risk_table.service_risk = {{"https", RiskClass::kLow}};
  s.foothold = {0, 0};
  s.exfil_protocol = "https";
  return s;
}

bool HasCode(const std::vector<Violation>& v, const std::string& code) {
  for (const Violation& x : v) {
    if (x.code == code) return true;
  }
  return false;
}

TEST(ScenarioTest, SmallestDocumentParses) {
  Scenario s = ParseScenario(SerializeScenario(SingleHost()));
  EXPECT_EQ(s.subnets.size(), 1u);
  EXPECT_EQ(s.hosts.size(), 1u);
  EXPECT_EQ(s, SingleHost());
}

TEST(ScenarioTest, Net1DocumentRoundTrips) {
  Scenario net1 = GenerateBenchmark(BenchmarkId::kNet1, 7);
  Scenario parsed = ParseScenario(SerializeScenario(net1));
  EXPECT_EQ(parsed.subnets.size(), 10u);
  EXPECT_EQ(parsed.hosts.size(), 56u);
  EXPECT_EQ(parsed, net1);
}

TEST(ScenarioTest, MissingProtocolIsSchemaErrorNamingField) {
  json doc = json::parse(SerializeScenario(SingleHost()));
  doc.erase("exfil_protocol");
  try {
    ParseScenario(doc.dump());
    FAIL() << "expected ScenarioError";
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kSchema);
    EXPECT_EQ(e.field_path(), "exfil_protocol");
  }
}

TEST(ScenarioTest, SyntaxErrorReported) {
  try {
    ParseScenario("{ not json");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kSyntax);
  }
}

TEST(ScenarioTest, UnknownFieldRejected) {
  json doc = json::parse(SerializeScenario(SingleHost()));
  doc["hosts"][0]["colour"] = "red";
  try {
    ParseScenario(doc.dump());
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kSchema);
    EXPECT_EQ(e.field_path(), "hosts[0].colour");
  }
}

TEST(ScenarioTest, WrongVersionRejected) {
  json doc = json::parse(SerializeScenario(SingleHost()));
  doc["schema_version"] = 99;
  EXPECT_THROW(ParseScenario(doc.dump()), ScenarioError);
}

TEST(ScenarioTest, SemanticViolationRaisedByParser) {
  Scenario s = SingleHost();
  s.foothold = {3, 3};
  try {
    ParseScenario(SerializeScenario(s));
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kSemantic);
    EXPECT_EQ(e.field_path(), "foothold");
  }
}

TEST(ValidateTest, GeneratedBenchmarksAreClean) {
  EXPECT_TRUE(ValidateScenario(GenerateBenchmark(BenchmarkId::kNet1, 7)).empty());
  EXPECT_TRUE(ValidateScenario(MakeRelayScenario()).empty());
}

TEST(ValidateTest, DuplicateAddress) {
  Scenario s = SingleHost();
  HostSpec copy = s.hosts[0];
  copy.exfiltration_target = false;
  s.hosts.push_back(copy);
  auto v = ValidateScenario(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].code, "duplicate_address");
  EXPECT_EQ(v[0].entity, "hosts[0,0]");
}

TEST(ValidateTest, TargetInPrivateSubnet) {
  Scenario s = SingleHost();
  s.subnets[0].internet_facing = false;
  auto v = ValidateScenario(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].code, "target_not_internet_facing");
}

TEST(ValidateTest, ReportsEveryKindOfBreakage) {
  Scenario s = SingleHost();
  s.subnets[0].connected = {0, 5};
  s.subnets[0].host_count = 3;
  s.hosts[0].services.insert("telnet");
  s.hosts[0].vulnerabilities["CVE-1"] = "smb";
  s.hosts[0].discovery_value = -1;
  s.firewall.max_upload_time_s = 0;
  s.payload_size_mb = 0;
  s.exfil_protocol = "";
  auto v = ValidateScenario(s);
  for (const char* code :
       {"self_link", "unknown_subnet", "host_count_mismatch", "missing_risk_class",
        "vulnerability_service_missing", "negative_value", "firewall_nonpositive",
        "payload_nonpositive", "missing_protocol", "target_missing_protocol"}) {
    EXPECT_TRUE(HasCode(v, code)) << code;
  }
}

TEST(ValidateTest, AsymmetricLink) {
  Scenario s = SingleHost();
  s.subnets.push_back({.id = 1, .host_count = 0, .connected = {}, .internet_facing = false});
  s.subnets[0].connected = {1};
  auto v = ValidateScenario(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].code, "asymmetric_link");
}

TEST(ValidateTest, NoTarget) {
  Scenario s = SingleHost();
  s.hosts[0].exfiltration_target = false;
  EXPECT_TRUE(HasCode(ValidateScenario(s), "no_exfil_target"));
}

TEST(ScenarioTest, CanonicalizeSortsHostsAndSubnets) {
  Scenario s = GenerateBenchmark(BenchmarkId::kNet1, 3);
  Scenario shuffled = s;
  std::reverse(shuffled.hosts.begin(), shuffled.hosts.end());
  std::reverse(shuffled.subnets.begin(), shuffled.subnets.end());
  Canonicalize(shuffled);
  EXPECT_EQ(shuffled, s);
}

TEST(ScenarioTest, FileRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "exfil_scenario_roundtrip.json";
  Scenario s = MakeRelayScenario();
  SaveScenarioFile(s, path);
  EXPECT_EQ(LoadScenarioFile(path), s);
  std::filesystem::remove(path);
  EXPECT_THROW(LoadScenarioFile(path), std::exception);
}

TEST(RiskTableTest, CostsForSleepThrows) {
  ServiceRiskTable t;
  EXPECT_THROW(t.CostsFor(ActionKind::kSleep), std::invalid_argument);
  EXPECT_EQ(t.ClassOf("never-heard-of-it"), RiskClass::kLow);
}

TEST(ScenarioTest, EnumStringsRoundTrip) {
  for (RiskClass r : {RiskClass::kLow, RiskClass::kMedium, RiskClass::kHigh}) {
    EXPECT_EQ(ParseRiskClass(ToString(r)), r);
  }
  for (ActionKind k : {ActionKind::kSubnetScan, ActionKind::kExploit, ActionKind::kUpload,
                       ActionKind::kSleep}) {
    EXPECT_EQ(ParseActionKind(ToString(k)), k);
  }
  EXPECT_FALSE(ParseRiskClass("extreme"));
  EXPECT_EQ(HostAddress({8, 2}).ToString(), "(8, 2)");
}

}  // namespace
}  // namespace exfil
