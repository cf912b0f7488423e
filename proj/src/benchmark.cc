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

#include "exfil/benchmark.h"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "exfil/random.h"

namespace exfil {
namespace {

struct ServiceInfo {
  const char* service;
  const char* vulnerability;
  const char* process;
};

constexpr std::array<ServiceInfo, 9> kServiceCatalog = {{
    {"dhcps", "CVE-2019-0725", "dhcpd"},
    {"dns", "CVE-2020-1350", "named"},
    {"ftp", "CVE-2015-3306", "proftpd"},
    {"http", "CVE-2021-41773", "httpd"},
    {"https", "CVE-2014-0160", "httpd"},
    {"mysql", "CVE-2012-2122", "mysqld"},
    {"rdp", "CVE-2019-0708", "termsrv"},
    {"smb", "CVE-2017-0144", "smbd"},
    {"ssh", "CVE-2018-10933", "sshd"},
}};

const ServiceInfo& Lookup(const std::string& service) {
  for (const ServiceInfo& info : kServiceCatalog) {
    if (service == info.service) return info;
  }
  throw std::logic_error("service missing from catalog: " + service);
}

struct PlantedHost {
  HostAddress address;
  std::string os;
  std::vector<std::string> services;
  std::vector<std::string> vulnerable_services;
  bool target = false;
};

struct Layout {
  int subnet_count = 0;
  int host_total = 0;
  int min_hosts = 0;
  int max_hosts = 0;
  int internet_subnet = 0;
  int extra_links = 0;
  HostAddress foothold;
  std::string protocol;
  // Subnets whose mutual connectivity is fully fixed by `core_links`.
  std::vector<int> core;
  std::vector<std::pair<int, int>> core_links;
  std::vector<PlantedHost> planted;
};

Layout Net1Layout() {
  Layout layout;
  layout.subnet_count = 10;
  layout.host_total = 56;
  layout.min_hosts = 3;
  layout.max_hosts = 12;
  layout.internet_subnet = 2;
  layout.extra_links = 3;
  layout.foothold = {8, 2};
  layout.protocol = "dhcps";
  layout.core = {2, 4, 5, 6, 8};
  layout.core_links = {{8, 4}, {8, 6}, {4, 2}, {6, 5}, {5, 2}};
  layout.planted = {
      {{8, 2}, "linux", {"dhcps", "ssh"}, {"ssh"}, false},
      {{4, 2}, "windows", {"http", "smb"}, {"smb"}, false},
      {{6, 0}, "linux", {"dhcps", "ssh"}, {"dhcps"}, false},
      {{5, 1}, "linux", {"dhcps"}, {"dhcps"}, false},
      {{2, 0}, "linux", {"dhcps", "https"}, {"https"}, true},
  };
  return layout;
}

Layout Net2Layout() {
  Layout layout;
  layout.subnet_count = 101;
  layout.host_total = 1444;
  layout.min_hosts = 3;
  layout.max_hosts = 50;
  layout.internet_subnet = 5;
  layout.extra_links = 60;
  layout.foothold = {44, 5};
  layout.protocol = "https";
  layout.core = {5, 24, 44};
  layout.core_links = {{44, 24}, {24, 5}};
  layout.planted = {
      {{44, 5}, "windows", {"https", "rdp"}, {"rdp"}, false},
      {{24, 18}, "linux", {"http", "https"}, {"http"}, false},
      {{5, 10}, "linux", {"https"}, {"https"}, true},
  };
  return layout;
}

std::set<std::string> ProcessesFor(const std::string& os,
                                   const std::set<std::string>& services) {
  std::set<std::string> processes = {os == "windows" ? "svchost" : "systemd"};
  for (const std::string& service : services) processes.insert(Lookup(service).process);
  return processes;
}

HostSpec MakePlanted(const PlantedHost& planted, const Scenario& scenario) {
  HostSpec host;
  host.address = planted.address;
  host.os = planted.os;
  host.services = {planted.services.begin(), planted.services.end()};
  host.processes = ProcessesFor(host.os, host.services);
  for (const std::string& service : planted.vulnerable_services) {
    host.vulnerabilities[Lookup(service).vulnerability] = service;
  }
  host.exfiltration_target = planted.target;
  if (planted.target) {
    host.discovery_value = scenario.rewards.discovery;
    host.infection_value = scenario.rewards.exploit;
  }
  return host;
}

HostSpec MakeOrdinary(HostAddress address, const std::string& protocol, Rng& rng) {
  HostSpec host;
  host.address = address;
  host.os = UniformIndex(rng, 2) == 0 ? "linux" : "windows";
  std::vector<std::string> pool;
  for (const ServiceInfo& info : kServiceCatalog) {
    // The exfiltration protocol only runs on planted hosts, which keeps the
    // planted complete route the unique complete one.
    if (info.service != protocol) pool.push_back(info.service);
  }
  Shuffle(pool, rng);
  int count = UniformInt(rng, 1, 3);
  for (int i = 0; i < count; ++i) host.services.insert(pool[i]);
  for (const std::string& service : host.services) {
    if (UniformIndex(rng, 2) == 0) {
      host.vulnerabilities[Lookup(service).vulnerability] = service;
    }
  }
  host.processes = ProcessesFor(host.os, host.services);
  return host;
}

Scenario Build(const Layout& layout, std::uint64_t seed) {
  Rng rng(seed);
  Scenario scenario;
  scenario.risk_table = DefaultRiskTable();
  scenario.foothold = layout.foothold;
  scenario.exfil_protocol = layout.protocol;
  scenario.payload_size_mb = 10000.0;

  // Subnet sizes: start at the minimum (or what planted hosts need) and hand
  // out the remaining hosts one at a time.
  std::vector<int> counts(layout.subnet_count, layout.min_hosts);
  for (const PlantedHost& planted : layout.planted) {
    int& c = counts[planted.address.subnet];
    c = std::max(c, planted.address.local + 1);
  }
  int assigned = 0;
  for (int c : counts) assigned += c;
  for (int remaining = layout.host_total - assigned; remaining > 0; --remaining) {
    std::vector<int> open;
    for (int i = 0; i < layout.subnet_count; ++i) {
      if (counts[i] < layout.max_hosts) open.push_back(i);
    }
    if (open.empty()) throw std::logic_error("benchmark layout over capacity");
    ++counts[open[UniformIndex(rng, open.size())]];
  }

  std::set<std::pair<int, int>> links;
  auto link = [&links](int a, int b) { links.insert({std::min(a, b), std::max(a, b)}); };
  for (const auto& [a, b] : layout.core_links) link(a, b);
  std::set<int> core(layout.core.begin(), layout.core.end());
  std::vector<int> attached(layout.core.begin(), layout.core.end());
  std::vector<int> loose;
  for (int i = 0; i < layout.subnet_count; ++i) {
    if (!core.contains(i)) loose.push_back(i);
  }
  Shuffle(loose, rng);
  for (int id : loose) {
    link(id, attached[UniformIndex(rng, attached.size())]);
    attached.push_back(id);
  }
  for (int added = 0, attempts = 0;
       added < layout.extra_links && attempts < 100 * layout.extra_links; ++attempts) {
    int a = UniformInt(rng, 0, layout.subnet_count - 1);
    int b = UniformInt(rng, 0, layout.subnet_count - 1);
    if (a == b || (core.contains(a) && core.contains(b))) continue;
    if (links.contains({std::min(a, b), std::max(a, b)})) continue;
    link(a, b);
    ++added;
  }

  for (int i = 0; i < layout.subnet_count; ++i) {
    SubnetSpec subnet;
    subnet.id = i;
    subnet.host_count = counts[i];
    subnet.internet_facing = (i == layout.internet_subnet);
    scenario.subnets.push_back(subnet);
  }
  for (const auto& [a, b] : links) {
    scenario.subnets[a].connected.insert(b);
    scenario.subnets[b].connected.insert(a);
  }

  for (int i = 0; i < layout.subnet_count; ++i) {
    for (int local = 0; local < counts[i]; ++local) {
      HostAddress address{i, local};
      auto planted = std::find_if(
          layout.planted.begin(), layout.planted.end(),
          [&](const PlantedHost& p) { return p.address == address; });
      HostSpec host = planted != layout.planted.end()
                          ? MakePlanted(*planted, scenario)
                          : MakeOrdinary(address, layout.protocol, rng);
      host.internet_facing = scenario.subnets[i].internet_facing;
      scenario.hosts.push_back(std::move(host));
    }
  }
  Canonicalize(scenario);
  return scenario;
}

}  // namespace

std::optional<BenchmarkId> ParseBenchmarkId(std::string_view text) {
  if (text == "net1") return BenchmarkId::kNet1;
  if (text == "net2") return BenchmarkId::kNet2;
  return std::nullopt;
}

ServiceRiskTable DefaultRiskTable() {
  ServiceRiskTable table;
  table.service_risk = {
      {"dhcps", RiskClass::kLow},    {"dns", RiskClass::kLow},
      {"https", RiskClass::kLow},    {"ftp", RiskClass::kMedium},
      {"http", RiskClass::kMedium},  {"ssh", RiskClass::kMedium},
      {"mysql", RiskClass::kHigh},   {"rdp", RiskClass::kHigh},
      {"smb", RiskClass::kHigh},
  };
  return table;
}

Scenario GenerateBenchmark(BenchmarkId id, std::uint64_t seed) {
  return Build(id == BenchmarkId::kNet1 ? Net1Layout() : Net2Layout(), seed);
}

Scenario GenerateBenchmark(std::string_view id, std::uint64_t seed) {
  auto parsed = ParseBenchmarkId(id);
  if (!parsed) throw std::invalid_argument("unknown benchmark id: " + std::string(id));
  return GenerateBenchmark(*parsed, seed);
}

Scenario MakeRelayScenario() {
  Scenario scenario;
  scenario.risk_table = DefaultRiskTable();
  scenario.foothold = {0, 0};
  scenario.exfil_protocol = "https";
  for (int i = 0; i < 3; ++i) {
    SubnetSpec subnet;
    subnet.id = i;
    subnet.host_count = 1;
    subnet.internet_facing = (i == 2);
    if (i > 0) subnet.connected.insert(i - 1);
    if (i < 2) subnet.connected.insert(i + 1);
    scenario.subnets.push_back(subnet);
  }
  const std::vector<PlantedHost> planted = {
      {{0, 0}, "linux", {"https", "ssh"}, {}, false},
      {{1, 0}, "linux", {"https", "ssh"}, {"ssh"}, false},
      {{2, 0}, "linux", {"https"}, {"https"}, true},
  };
  for (const PlantedHost& p : planted) {
    HostSpec host = MakePlanted(p, scenario);
    host.internet_facing = scenario.subnets[p.address.subnet].internet_facing;
    scenario.hosts.push_back(std::move(host));
  }
  return scenario;
}

}  // namespace exfil
