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

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace exfil {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void SchemaError(const std::string& path,
                              const std::string& message) {
  throw ScenarioError(ScenarioError::Kind::kSchema, path,
                      path + ": " + message);
}

// Reads the fields of one JSON object and rejects anything it was not asked
// for.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) SchemaError(path_, "expected an object");
  }

  const json& Required(const std::string& key) {
    auto it = node_.find(key);
    if (it == node_.end()) SchemaError(Child(key), "missing required field");
    seen_.insert(key);
    return *it;
  }

  std::string Child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) SchemaError(Child(key), "unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

double ReadNumber(ObjectReader& reader, const std::string& key) {
  const json& node = reader.Required(key);
  if (!node.is_number()) SchemaError(reader.Child(key), "expected a number");
  return node.get<double>();
}

int ReadInt(const json& node, const std::string& path) {
  if (!node.is_number_integer()) SchemaError(path, "expected an integer");
  return node.get<int>();
}

int ReadInt(ObjectReader& reader, const std::string& key) {
  return ReadInt(reader.Required(key), reader.Child(key));
}

bool ReadBool(ObjectReader& reader, const std::string& key) {
  const json& node = reader.Required(key);
  if (!node.is_boolean()) SchemaError(reader.Child(key), "expected a boolean");
  return node.get<bool>();
}

std::string ReadString(const json& node, const std::string& path) {
  if (!node.is_string()) SchemaError(path, "expected a string");
  return node.get<std::string>();
}

std::string ReadString(ObjectReader& reader, const std::string& key) {
  return ReadString(reader.Required(key), reader.Child(key));
}

std::set<std::string> ReadStringSet(ObjectReader& reader,
                                    const std::string& key) {
  const json& node = reader.Required(key);
  std::string path = reader.Child(key);
  if (!node.is_array()) SchemaError(path, "expected an array");
  std::set<std::string> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.insert(ReadString(node[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

HostAddress ReadAddress(const json& node, const std::string& path) {
  if (!node.is_array() || node.size() != 2) {
    SchemaError(path, "expected [subnet_id, local_id]");
  }
  return {ReadInt(node[0], path + "[0]"), ReadInt(node[1], path + "[1]")};
}

json AddressJson(HostAddress a) { return json::array({a.subnet, a.local}); }

CostRow ReadCostRow(const json& node, const std::string& path) {
  ObjectReader reader(node, path);
  CostRow row;
  row.low = ReadNumber(reader, "low");
  row.medium = ReadNumber(reader, "medium");
  row.high = ReadNumber(reader, "high");
  reader.Finish();
  return row;
}

json CostRowJson(const CostRow& row) {
  return {{"low", row.low}, {"medium", row.medium}, {"high", row.high}};
}

SubnetSpec ReadSubnet(const json& node, const std::string& path) {
  ObjectReader reader(node, path);
  SubnetSpec subnet;
  subnet.id = ReadInt(reader, "id");
  subnet.host_count = ReadInt(reader, "host_count");
  const json& links = reader.Required("connected");
  if (!links.is_array()) SchemaError(reader.Child("connected"), "expected an array");
  for (std::size_t i = 0; i < links.size(); ++i) {
    subnet.connected.insert(
        ReadInt(links[i], reader.Child("connected") + "[" + std::to_string(i) + "]"));
  }
  subnet.internet_facing = ReadBool(reader, "internet_facing");
  reader.Finish();
  return subnet;
}

HostSpec ReadHost(const json& node, const std::string& path) {
  ObjectReader reader(node, path);
  HostSpec host;
  host.address = ReadAddress(reader.Required("address"), reader.Child("address"));
  host.os = ReadString(reader, "os");
  host.services = ReadStringSet(reader, "services");
  host.processes = ReadStringSet(reader, "processes");
  const json& vulns = reader.Required("vulnerabilities");
  if (!vulns.is_object()) {
    SchemaError(reader.Child("vulnerabilities"), "expected an object");
  }
  for (const auto& [id, service] : vulns.items()) {
    host.vulnerabilities[id] =
        ReadString(service, reader.Child("vulnerabilities") + "." + id);
  }
  host.discovery_value = ReadNumber(reader, "discovery_value");
  host.infection_value = ReadNumber(reader, "infection_value");
  host.internet_facing = ReadBool(reader, "internet_facing");
  host.exfiltration_target = ReadBool(reader, "exfiltration_target");
  reader.Finish();
  return host;
}

std::string HostEntity(HostAddress a) {
  return "hosts[" + std::to_string(a.subnet) + "," + std::to_string(a.local) + "]";
}

std::string SubnetEntity(int id) {
  return "subnets[" + std::to_string(id) + "]";
}

}  // namespace

std::string HostAddress::ToString() const {
  return "(" + std::to_string(subnet) + ", " + std::to_string(local) + ")";
}

std::string_view ToString(RiskClass risk) {
  switch (risk) {
    case RiskClass::kLow:
      return "low";
    case RiskClass::kMedium:
      return "medium";
    case RiskClass::kHigh:
      return "high";
  }
  return "low";
}

std::optional<RiskClass> ParseRiskClass(std::string_view text) {
  if (text == "low") return RiskClass::kLow;
  if (text == "medium") return RiskClass::kMedium;
  if (text == "high") return RiskClass::kHigh;
  return std::nullopt;
}

std::string_view ToString(ActionKind kind) {
  switch (kind) {
    case ActionKind::kSubnetScan:
      return "subnet_scan";
    case ActionKind::kExploit:
      return "exploit";
    case ActionKind::kUpload:
      return "upload";
    case ActionKind::kSleep:
      return "sleep";
  }
  return "sleep";
}

std::optional<ActionKind> ParseActionKind(std::string_view text) {
  if (text == "subnet_scan") return ActionKind::kSubnetScan;
  if (text == "exploit") return ActionKind::kExploit;
  if (text == "upload") return ActionKind::kUpload;
  if (text == "sleep") return ActionKind::kSleep;
  return std::nullopt;
}

double CostRow::For(RiskClass risk) const {
  switch (risk) {
    case RiskClass::kLow:
      return low;
    case RiskClass::kMedium:
      return medium;
    case RiskClass::kHigh:
      return high;
  }
  return low;
}

const CostRow& ServiceRiskTable::CostsFor(ActionKind kind) const {
  switch (kind) {
    case ActionKind::kSubnetScan:
      return subnet_scan;
    case ActionKind::kExploit:
      return exploit;
    case ActionKind::kUpload:
      return upload;
    case ActionKind::kSleep:
      break;
  }
  throw std::invalid_argument("sleep actions carry no cost");
}

RiskClass ServiceRiskTable::ClassOf(const std::string& service) const {
  auto it = service_risk.find(service);
  return it == service_risk.end() ? RiskClass::kLow : it->second;
}

double ActionTimes::For(ActionKind kind) const {
  switch (kind) {
    case ActionKind::kSubnetScan:
      return subnet_scan;
    case ActionKind::kExploit:
      return exploit;
    case ActionKind::kUpload:
      return upload;
    case ActionKind::kSleep:
      return sleep;
  }
  return sleep;
}

const HostSpec* Scenario::FindHost(HostAddress address) const {
  auto it = std::lower_bound(
      hosts.begin(), hosts.end(), address,
      [](const HostSpec& h, HostAddress a) { return h.address < a; });
  if (it != hosts.end() && it->address == address) return &*it;
  // Fall back to a scan for scenarios that are not canonical yet.
  for (const HostSpec& host : hosts) {
    if (host.address == address) return &host;
  }
  return nullptr;
}

const SubnetSpec* Scenario::FindSubnet(int id) const {
  for (const SubnetSpec& subnet : subnets) {
    if (subnet.id == id) return &subnet;
  }
  return nullptr;
}

void Canonicalize(Scenario& scenario) {
  std::stable_sort(scenario.subnets.begin(), scenario.subnets.end(),
                   [](const SubnetSpec& a, const SubnetSpec& b) { return a.id < b.id; });
  std::stable_sort(scenario.hosts.begin(), scenario.hosts.end(),
                   [](const HostSpec& a, const HostSpec& b) {
                     return a.address < b.address;
                   });
}

std::vector<Violation> ValidateScenario(const Scenario& s) {
  std::vector<Violation> out;
  auto add = [&out](std::string code, std::string entity, std::string message) {
    out.push_back({std::move(code), std::move(entity), std::move(message)});
  };

  if (!(s.firewall.max_upload_volume_mb > 0)) {
    add("firewall_nonpositive", "firewall.max_upload_volume_mb", "must be > 0");
  }
  if (!(s.firewall.max_upload_time_s > 0)) {
    add("firewall_nonpositive", "firewall.max_upload_time_s", "must be > 0");
  }
  if (!(s.firewall.update_frequency_s > 0)) {
    add("firewall_nonpositive", "firewall.update_frequency_s", "must be > 0");
  }
  if (!(s.payload_size_mb > 0)) {
    add("payload_nonpositive", "payload_size_mb", "must be > 0");
  }
  const std::pair<const char*, double> times[] = {
      {"action_times.subnet_scan", s.action_times.subnet_scan},
      {"action_times.exploit", s.action_times.exploit},
      {"action_times.upload", s.action_times.upload},
      {"action_times.sleep", s.action_times.sleep}};
  for (const auto& [path, value] : times) {
    if (!(value > 0)) add("nonpositive_action_time", path, "must be > 0");
  }
  if (!(s.upload_rates.fast_mb_per_s > 0)) {
    add("nonpositive_rate", "upload_rates.fast_mb_per_s", "must be > 0");
  }
  if (!(s.upload_rates.slow_mb_per_s > 0)) {
    add("nonpositive_rate", "upload_rates.slow_mb_per_s", "must be > 0");
  }
  const std::pair<const char*, const CostRow*> rows[] = {
      {"risk_table.costs.subnet_scan", &s.risk_table.subnet_scan},
      {"risk_table.costs.exploit", &s.risk_table.exploit},
      {"risk_table.costs.upload", &s.risk_table.upload}};
  for (const auto& [path, row] : rows) {
    if (row->low < 0 || row->medium < 0 || row->high < 0) {
      add("negative_cost", path, "costs must be >= 0");
    }
  }

  std::map<int, const SubnetSpec*> subnet_by_id;
  for (const SubnetSpec& subnet : s.subnets) {
    if (!subnet_by_id.emplace(subnet.id, &subnet).second) {
      add("duplicate_subnet", SubnetEntity(subnet.id), "subnet id repeated");
    }
  }
  std::map<int, int> hosts_per_subnet;
  for (const SubnetSpec& subnet : s.subnets) {
    for (int other : subnet.connected) {
      if (other == subnet.id) {
        add("self_link", SubnetEntity(subnet.id), "subnet lists itself as connected");
        continue;
      }
      auto it = subnet_by_id.find(other);
      if (it == subnet_by_id.end()) {
        add("unknown_subnet", SubnetEntity(subnet.id),
            "connected to missing subnet " + std::to_string(other));
      } else if (!it->second->connected.contains(subnet.id)) {
        add("asymmetric_link", SubnetEntity(subnet.id),
            "link to " + std::to_string(other) + " is not mirrored");
      }
    }
  }

  std::set<HostAddress> seen;
  std::set<std::string> services;
  bool has_target = false;
  for (const HostSpec& host : s.hosts) {
    const std::string entity = HostEntity(host.address);
    if (!seen.insert(host.address).second) {
      add("duplicate_address", entity, "address " + host.address.ToString() + " repeated");
      continue;
    }
    auto subnet = subnet_by_id.find(host.address.subnet);
    if (subnet == subnet_by_id.end()) {
      add("unknown_subnet", entity, "host references a missing subnet");
    } else {
      ++hosts_per_subnet[host.address.subnet];
    }
    if (host.address.subnet < 0 || host.address.local < 0) {
      add("negative_address", entity, "address components must be >= 0");
    }
    if (host.discovery_value < 0 || host.infection_value < 0) {
      add("negative_value", entity, "discovery/infection values must be >= 0");
    }
    for (const auto& [vuln, service] : host.vulnerabilities) {
      if (!host.RunsService(service)) {
        add("vulnerability_service_missing", entity,
            vuln + " targets " + service + " which the host does not run");
      }
    }
    services.insert(host.services.begin(), host.services.end());
    if (host.exfiltration_target) {
      has_target = true;
      if (subnet != subnet_by_id.end() && !subnet->second->internet_facing) {
        add("target_not_internet_facing", entity,
            "exfiltration target sits in a private subnet");
      }
      if (!host.RunsService(s.exfil_protocol)) {
        add("target_missing_protocol", entity,
            "exfiltration target does not run " + s.exfil_protocol);
      }
    }
  }
  for (const SubnetSpec& subnet : s.subnets) {
    int actual = hosts_per_subnet[subnet.id];
    if (actual != subnet.host_count) {
      add("host_count_mismatch", SubnetEntity(subnet.id),
          "declares " + std::to_string(subnet.host_count) + " hosts, has " +
              std::to_string(actual));
    }
  }
  for (const std::string& service : services) {
    if (!s.risk_table.service_risk.contains(service)) {
      add("missing_risk_class", "risk_table.services." + service,
          "service has no risk class");
    }
  }
  if (!seen.contains(s.foothold)) {
    add("foothold_missing", "foothold", s.foothold.ToString() + " is not a host");
  }
  if (!has_target) {
    add("no_exfil_target", "hosts", "no host is marked as exfiltration target");
  }
  if (s.exfil_protocol.empty()) {
    add("missing_protocol", "exfil_protocol", "exfiltration protocol is empty");
  }
  return out;
}

ScenarioError::ScenarioError(Kind kind, std::string field_path,
                             const std::string& message)
    : std::runtime_error(message), kind_(kind), field_path_(std::move(field_path)) {}

Scenario ParseScenario(std::string_view document) {
  json root;
  try {
    root = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ScenarioError(ScenarioError::Kind::kSyntax, "", e.what());
  }

  ObjectReader reader(root, "");
  int version = ReadInt(reader, "schema_version");
  if (version != kScenarioSchemaVersion) {
    SchemaError("schema_version", "unsupported version " + std::to_string(version));
  }

  Scenario s;
  const json& subnets = reader.Required("subnets");
  if (!subnets.is_array()) SchemaError("subnets", "expected an array");
  for (std::size_t i = 0; i < subnets.size(); ++i) {
    s.subnets.push_back(ReadSubnet(subnets[i], "subnets[" + std::to_string(i) + "]"));
  }
  const json& hosts = reader.Required("hosts");
  if (!hosts.is_array()) SchemaError("hosts", "expected an array");
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    s.hosts.push_back(ReadHost(hosts[i], "hosts[" + std::to_string(i) + "]"));
  }

  {
    ObjectReader fw(reader.Required("firewall"), "firewall");
    s.firewall.max_upload_volume_mb = ReadNumber(fw, "max_upload_volume_mb");
    s.firewall.max_upload_time_s = ReadNumber(fw, "max_upload_time_s");
    s.firewall.update_frequency_s = ReadNumber(fw, "update_frequency_s");
    fw.Finish();
  }
  {
    ObjectReader risk(reader.Required("risk_table"), "risk_table");
    ObjectReader classes(risk.Required("services"), "risk_table.services");
    for (const auto& [service, level] : risk.Required("services").items()) {
      classes.Required(service);
      std::string path = "risk_table.services." + service;
      auto parsed = ParseRiskClass(ReadString(level, path));
      if (!parsed) SchemaError(path, "expected low, medium or high");
      s.risk_table.service_risk[service] = *parsed;
    }
    ObjectReader costs(risk.Required("costs"), "risk_table.costs");
    s.risk_table.subnet_scan =
        ReadCostRow(costs.Required("subnet_scan"), "risk_table.costs.subnet_scan");
    s.risk_table.exploit = ReadCostRow(costs.Required("exploit"), "risk_table.costs.exploit");
    s.risk_table.upload = ReadCostRow(costs.Required("upload"), "risk_table.costs.upload");
    costs.Finish();
    risk.Finish();
  }
  s.foothold = ReadAddress(reader.Required("foothold"), "foothold");
  s.exfil_protocol = ReadString(reader, "exfil_protocol");
  s.payload_size_mb = ReadNumber(reader, "payload_size_mb");
  {
    ObjectReader rw(reader.Required("rewards"), "rewards");
    s.rewards.discovery = ReadNumber(rw, "discovery");
    s.rewards.exploit = ReadNumber(rw, "exploit");
    s.rewards.protocol_path = ReadNumber(rw, "protocol_path");
    s.rewards.upload_per_mb = ReadNumber(rw, "upload_per_mb");
    s.rewards.completion_bonus = ReadNumber(rw, "completion_bonus");
    rw.Finish();
  }
  {
    ObjectReader at(reader.Required("action_times"), "action_times");
    s.action_times.subnet_scan = ReadNumber(at, "subnet_scan");
    s.action_times.exploit = ReadNumber(at, "exploit");
    s.action_times.upload = ReadNumber(at, "upload");
    s.action_times.sleep = ReadNumber(at, "sleep");
    at.Finish();
  }
  {
    ObjectReader ur(reader.Required("upload_rates"), "upload_rates");
    s.upload_rates.fast_mb_per_s = ReadNumber(ur, "fast_mb_per_s");
    s.upload_rates.slow_mb_per_s = ReadNumber(ur, "slow_mb_per_s");
    ur.Finish();
  }
  reader.Finish();

  Canonicalize(s);
  std::vector<Violation> violations = ValidateScenario(s);
  if (!violations.empty()) {
    std::ostringstream message;
    message << violations.size() << " invariant violation(s):";
    for (const Violation& v : violations) {
      message << "\n  " << v.entity << " [" << v.code << "] " << v.message;
    }
    throw ScenarioError(ScenarioError::Kind::kSemantic, violations.front().entity,
                        message.str());
  }
  return s;
}

std::string SerializeScenario(const Scenario& input) {
  Scenario s = input;
  Canonicalize(s);

  json root;
  root["schema_version"] = kScenarioSchemaVersion;
  json subnets = json::array();
  for (const SubnetSpec& subnet : s.subnets) {
    subnets.push_back({{"id", subnet.id},
                       {"host_count", subnet.host_count},
                       {"connected", subnet.connected},
                       {"internet_facing", subnet.internet_facing}});
  }
  root["subnets"] = std::move(subnets);
  json hosts = json::array();
  for (const HostSpec& host : s.hosts) {
    json vulns = json::object();
    for (const auto& [id, service] : host.vulnerabilities) vulns[id] = service;
    hosts.push_back({{"address", AddressJson(host.address)},
                     {"os", host.os},
                     {"services", host.services},
                     {"processes", host.processes},
                     {"vulnerabilities", std::move(vulns)},
                     {"discovery_value", host.discovery_value},
                     {"infection_value", host.infection_value},
                     {"internet_facing", host.internet_facing},
                     {"exfiltration_target", host.exfiltration_target}});
  }
  root["hosts"] = std::move(hosts);
  root["firewall"] = {{"max_upload_volume_mb", s.firewall.max_upload_volume_mb},
                      {"max_upload_time_s", s.firewall.max_upload_time_s},
                      {"update_frequency_s", s.firewall.update_frequency_s}};
  json classes = json::object();
  for (const auto& [service, risk] : s.risk_table.service_risk) {
    classes[service] = std::string(ToString(risk));
  }
  root["risk_table"] = {
      {"services", std::move(classes)},
      {"costs",
       {{"subnet_scan", CostRowJson(s.risk_table.subnet_scan)},
        {"exploit", CostRowJson(s.risk_table.exploit)},
        {"upload", CostRowJson(s.risk_table.upload)}}}};
  root["foothold"] = AddressJson(s.foothold);
  root["exfil_protocol"] = s.exfil_protocol;
  root["payload_size_mb"] = s.payload_size_mb;
  root["rewards"] = {{"discovery", s.rewards.discovery},
                     {"exploit", s.rewards.exploit},
                     {"protocol_path", s.rewards.protocol_path},
                     {"upload_per_mb", s.rewards.upload_per_mb},
                     {"completion_bonus", s.rewards.completion_bonus}};
  root["action_times"] = {{"subnet_scan", s.action_times.subnet_scan},
                          {"exploit", s.action_times.exploit},
                          {"upload", s.action_times.upload},
                          {"sleep", s.action_times.sleep}};
  root["upload_rates"] = {{"fast_mb_per_s", s.upload_rates.fast_mb_per_s},
                          {"slow_mb_per_s", s.upload_rates.slow_mb_per_s}};
  return root.dump(2) + "\n";
}

Scenario LoadScenarioFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseScenario(buffer.str());
}

void SaveScenarioFile(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scenario file " + path.string());
  out << SerializeScenario(scenario);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace exfil
