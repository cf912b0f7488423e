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

#include "exfil/environment.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace exfil {
namespace {

using json = nlohmann::ordered_json;

constexpr double kInapplicableSeconds = 1.0;

int IndexIn(const std::vector<std::string>& sorted, const std::string& value) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  return static_cast<int>(it - sorted.begin());
}

json AddressJson(HostAddress a) { return json::array({a.subnet, a.local}); }

HostAddress AddressFrom(const json& node) {
  return {node.at(0).get<int>(), node.at(1).get<int>()};
}

json PathJson(const std::vector<HostAddress>& hops) {
  json out = json::array();
  for (HostAddress h : hops) out.push_back(AddressJson(h));
  return out;
}

std::vector<HostAddress> PathFrom(const json& node) {
  std::vector<HostAddress> out;
  for (const json& h : node) out.push_back(AddressFrom(h));
  return out;
}

std::string DescribeViolations(const std::vector<Violation>& violations) {
  std::ostringstream out;
  out << "invalid scenario:";
  for (const Violation& v : violations) out << " " << v.entity << " [" << v.code << "]";
  return out.str();
}

}  // namespace

std::string_view ToString(UploadRate rate) {
  return rate == UploadRate::kFast ? "fast" : "slow";
}

std::string_view ToString(Termination termination) {
  switch (termination) {
    case Termination::kNone:
      return "none";
    case Termination::kCompleted:
      return "completed";
    case Termination::kDetected:
      return "detected";
    case Termination::kRegularUpdate:
      return "regular_update";
    case Termination::kStepCap:
      return "step_cap";
  }
  return "none";
}

std::string_view ToString(EventKind kind) {
  switch (kind) {
    case EventKind::kDiscovered:
      return "discovered";
    case EventKind::kCompromised:
      return "compromised";
    case EventKind::kPathSelected:
      return "path_selected";
    case EventKind::kPathLost:
      return "path_lost";
    case EventKind::kUploaded:
      return "uploaded";
    case EventKind::kCompleted:
      return "completed";
    case EventKind::kDetection:
      return "detection";
    case EventKind::kIsolated:
      return "isolated";
    case EventKind::kRegularUpdate:
      return "regular_update";
    case EventKind::kStepCap:
      return "step_cap";
  }
  return "";
}

std::string Action::ToString() const {
  std::string out(exfil::ToString(kind));
  if (rate) out += "(" + std::string(exfil::ToString(*rate)) + ")";
  if (vulnerability) out += "[" + *vulnerability + "]";
  if (target) out += " " + target->ToString();
  return out;
}

InvalidScenarioError::InvalidScenarioError(const std::vector<Violation>& violations)
    : std::invalid_argument(DescribeViolations(violations)), violations_(violations) {}

double ActionCost(ActionKind kind, const std::set<std::string>& services,
                  const ServiceRiskTable& table) {
  RiskClass worst = RiskClass::kLow;
  for (const std::string& service : services) worst = std::max(worst, table.ClassOf(service));
  return table.CostsFor(kind).For(worst);
}

std::vector<Action> EnumerateActions(const Scenario& scenario) {
  std::vector<Action> actions;
  for (const HostSpec& host : scenario.hosts) {
    actions.push_back({ActionKind::kSubnetScan, host.address, std::nullopt, std::nullopt});
    for (const auto& [vuln, service] : host.vulnerabilities) {
      actions.push_back({ActionKind::kExploit, host.address, vuln, std::nullopt});
    }
    actions.push_back({ActionKind::kUpload, host.address, std::nullopt, UploadRate::kFast});
    actions.push_back({ActionKind::kUpload, host.address, std::nullopt, UploadRate::kSlow});
  }
  actions.push_back({ActionKind::kSleep, std::nullopt, std::nullopt, std::nullopt});
  return actions;
}

int ObservationLayout::discovery_value_offset() const {
  return static_cast<int>(os.size() + services.size() + processes.size());
}
int ObservationLayout::infection_value_offset() const { return discovery_value_offset() + 2; }
int ObservationLayout::access_offset() const { return discovery_value_offset() + 4; }
int ObservationLayout::target_offset(int k) const {
  return size - static_cast<int>(targets.size() - k) * target_block;
}

ObservationLayout MakeObservationLayout(const Scenario& scenario) {
  ObservationLayout layout;
  std::set<std::string> os, services, processes;
  for (std::size_t i = 0; i < scenario.hosts.size(); ++i) {
    const HostSpec& host = scenario.hosts[i];
    os.insert(host.os);
    services.insert(host.services.begin(), host.services.end());
    processes.insert(host.processes.begin(), host.processes.end());
    if (host.exfiltration_target) layout.targets.push_back(static_cast<int>(i));
  }
  layout.os.assign(os.begin(), os.end());
  layout.services.assign(services.begin(), services.end());
  layout.processes.assign(processes.begin(), processes.end());
  layout.host_block = layout.discovery_value_offset() + 5;
  layout.size = static_cast<int>(scenario.hosts.size()) * layout.host_block +
                static_cast<int>(layout.targets.size()) * layout.target_block;
  return layout;
}

Environment::Environment(std::shared_ptr<const Scenario> scenario, EnvOptions options)
    : scenario_(std::move(scenario)), options_(std::move(options)) {
  if (!scenario_) throw std::invalid_argument("null scenario");
  if (auto violations = ValidateScenario(*scenario_); !violations.empty()) {
    throw InvalidScenarioError(violations);
  }
  if (!std::is_sorted(scenario_->hosts.begin(), scenario_->hosts.end(),
                      [](const HostSpec& a, const HostSpec& b) { return a.address < b.address; })) {
    throw std::invalid_argument("scenario hosts are not in canonical order");
  }
  const Scenario& s = *scenario_;
  actions_ = EnumerateActions(s);
  layout_ = MakeObservationLayout(s);

  std::map<int, std::vector<int>> members;
  for (std::size_t i = 0; i < s.hosts.size(); ++i) {
    host_index_[s.hosts[i].address] = static_cast<int>(i);
    members[s.hosts[i].address.subnet].push_back(static_cast<int>(i));
  }
  foothold_ = host_index_.at(s.foothold);
  hosts_.resize(s.hosts.size());
  for (std::size_t i = 0; i < s.hosts.size(); ++i) {
    const HostSpec& host = s.hosts[i];
    HostCache& cache = hosts_[i];
    cache.scan_cost = ActionCost(ActionKind::kSubnetScan, host.services, s.risk_table);
    cache.exploit_cost = ActionCost(ActionKind::kExploit, host.services, s.risk_table);
    cache.upload_cost = ActionCost(ActionKind::kUpload, host.services, s.risk_table);
    cache.runs_protocol = host.RunsService(s.exfil_protocol);
    std::vector<int> subnets = {host.address.subnet};
    const SubnetSpec* subnet = s.FindSubnet(host.address.subnet);
    subnets.insert(subnets.end(), subnet->connected.begin(), subnet->connected.end());
    for (int id : subnets) {
      const auto& list = members[id];
      cache.scan_reach.insert(cache.scan_reach.end(), list.begin(), list.end());
    }
    std::sort(cache.scan_reach.begin(), cache.scan_reach.end());
  }

  double max_value = 1.0;
  for (const HostSpec& host : s.hosts) {
    max_value = std::max({max_value, host.discovery_value, host.infection_value});
  }
  observation_scale_.assign(layout_.size, 1.0);
  log_features_.assign(layout_.size, false);
  for (std::size_t i = 0; i < s.hosts.size(); ++i) {
    int base = static_cast<int>(i) * layout_.host_block;
    observation_scale_[base + layout_.discovery_value_offset()] = max_value;
    observation_scale_[base + layout_.infection_value_offset()] = max_value;
  }
  for (std::size_t k = 0; k < layout_.targets.size(); ++k) {
    int off = layout_.target_offset(static_cast<int>(k));
    observation_scale_[off + 3] = s.firewall.max_upload_time_s;
    log_features_[off + 3] = true;
    observation_scale_[off + 4] = s.payload_size_mb;
  }
  Reset(0);
}

Observation Environment::Reset(std::uint64_t seed) {
  const Scenario& s = *scenario_;
  const std::size_t n = s.hosts.size();
  seed_ = seed;
  state_ = EnvState{};
  state_.discovered.assign(n, false);
  state_.compromised.assign(n, false);
  state_.isolated.assign(n, false);
  state_.infection_time_s.assign(n, 0.0);
  state_.accumulated_reward.assign(n, 0.0);
  for (const SubnetSpec& subnet : s.subnets) state_.firewalls[subnet.id] = FirewallCounters{};
  state_.remaining_payload_mb = s.payload_size_mb;
  state_.discovered[foothold_] = true;
  state_.compromised[foothold_] = true;
  // A foothold that is itself an exit already forms a one-hop path.
  std::vector<Event> ignored;
  ReselectPath(ignored, -1);
  state_.rewarded_paths.clear();
  if (state_.selected_path) state_.rewarded_paths.insert(state_.selected_path->hops);
  return EncodeObservation();
}

int Environment::HostIndex(HostAddress address) const {
  auto it = host_index_.find(address);
  if (it == host_index_.end()) {
    throw std::invalid_argument("unknown host " + address.ToString());
  }
  return it->second;
}

ConnectionStatus Environment::Connection(int host) const {
  if (state_.isolated[host]) return ConnectionStatus::kIsolated;
  return state_.compromised[host] ? ConnectionStatus::kConnected
                                  : ConnectionStatus::kNotConnected;
}

int Environment::ActionIndex(const Action& action) const {
  auto it = std::find(actions_.begin(), actions_.end(), action);
  if (it == actions_.end()) throw std::invalid_argument("action not in action list: " + action.ToString());
  return static_cast<int>(it - actions_.begin());
}

bool Environment::IsApplicable(const Action& action) const {
  if (action.kind == ActionKind::kSleep) return true;
  const int t = HostIndex(*action.target);
  switch (action.kind) {
    case ActionKind::kSubnetScan:
      return state_.compromised[t] && !state_.isolated[t];
    case ActionKind::kExploit:
      return state_.discovered[t] && !state_.compromised[t] && !state_.vulnerabilities_patched &&
             scenario_->hosts[t].vulnerabilities.contains(*action.vulnerability);
    case ActionKind::kUpload: {
      if (t != foothold_ || state_.isolated[t] || !state_.selected_path) return false;
      int exit = HostIndex(state_.selected_path->hops.back());
      return Connection(exit) == ConnectionStatus::kConnected;
    }
    case ActionKind::kSleep:
      break;
  }
  return true;
}

void Environment::Credit(int host, double amount) {
  if (amount > 0) state_.accumulated_reward[host] += amount;
}

double Environment::ReselectPath(std::vector<Event>& events, int credited_host) {
  const Scenario& s = *scenario_;
  std::vector<CompromiseGraph::Node> nodes;
  for (std::size_t i = 0; i < s.hosts.size(); ++i) {
    if (!state_.compromised[i] || state_.isolated[i]) continue;
    nodes.push_back({s.hosts[i].address, hosts_[i].runs_protocol,
                     s.hosts[i].exfiltration_target, state_.accumulated_reward[i]});
  }
  CompromiseGraph graph = BuildSubnetGraph(s, std::move(nodes), s.foothold);
  SwitchDecision decision =
      DecideSwitch(graph, state_.selected_path, state_.rewarded_paths, options_.path_search);
  double reward = 0.0;
  if (!decision.switched) {
    state_.selected_path = std::move(decision.selected);
    return reward;
  }
  state_.selected_path = std::move(decision.selected);
  if (!state_.selected_path) {
    events.push_back({EventKind::kPathLost, std::nullopt, 0.0});
    return reward;
  }
  state_.remaining_payload_mb = s.payload_size_mb;
  events.push_back({EventKind::kPathSelected, state_.selected_path->hops.back(),
                    state_.selected_path->coverage});
  if (decision.reward_due) {
    state_.rewarded_paths.insert(state_.selected_path->hops);
    reward = s.rewards.protocol_path * state_.selected_path->coverage;
    if (credited_host >= 0) Credit(credited_host, reward);
  }
  return reward;
}

void Environment::IsolateAllCompromised(std::vector<Event>& events) {
  for (std::size_t i = 0; i < state_.compromised.size(); ++i) {
    if (state_.compromised[i] && !state_.isolated[i]) {
      state_.isolated[i] = true;
      events.push_back({EventKind::kIsolated, scenario_->hosts[i].address, 0.0});
    }
  }
}

FirewallCheckResult Environment::FirewallCheck() {
  FirewallCheckResult result;
  const FirewallPolicy& policy = scenario_->firewall;
  for (const auto& [subnet, counters] : state_.firewalls) {
    bool over = counters.window_volume_mb > policy.max_upload_volume_mb ||
                counters.window_active_time_s > policy.max_upload_time_s;
    if (!over) continue;
    result.detected = true;
    result.events.push_back({EventKind::kDetection, HostAddress{subnet, -1}, 0.0});
  }
  if (!result.detected) return result;
  // Uploads always originate at the foothold.
  if (!state_.isolated[foothold_]) {
    state_.isolated[foothold_] = true;
    result.penalty = -state_.accumulated_reward[foothold_];
    state_.accumulated_reward[foothold_] = 0.0;
    result.events.push_back({EventKind::kIsolated, scenario_->foothold, result.penalty});
  }
  state_.vulnerabilities_patched = true;
  if (state_.selected_path) {
    state_.selected_path.reset();
    result.events.push_back({EventKind::kPathLost, std::nullopt, 0.0});
  }
  state_.done = true;
  state_.termination = Termination::kDetected;
  return result;
}

std::vector<Event> Environment::RegularUpdate() {
  std::vector<Event> events;
  const double period = scenario_->firewall.update_frequency_s;
  double last = 0.0;
  for (const auto& [subnet, counters] : state_.firewalls) last = std::max(last, counters.last_regular_update_s);
  if (state_.clock_s < last + period) return events;
  const double now = std::floor(state_.clock_s / period) * period;
  for (auto& [subnet, counters] : state_.firewalls) counters.last_regular_update_s = now;
  events.push_back({EventKind::kRegularUpdate, std::nullopt, 0.0});
  state_.vulnerabilities_patched = true;
  IsolateAllCompromised(events);
  if (state_.selected_path) {
    state_.selected_path.reset();
    events.push_back({EventKind::kPathLost, std::nullopt, 0.0});
  }
  if (!state_.done) {
    state_.done = true;
    state_.termination = Termination::kRegularUpdate;
  }
  return events;
}

StepOutcome Environment::Step(const Action& action) { return Step(ActionIndex(action)); }

StepOutcome Environment::Step(int action_index) {
  if (state_.done) throw EpisodeFinishedError("step called on a finished episode");
  if (action_index < 0 || action_index >= static_cast<int>(actions_.size())) {
    throw std::out_of_range("action index " + std::to_string(action_index) + " out of range");
  }
  const Scenario& s = *scenario_;
  const Action& action = actions_[action_index];
  StepOutcome out;
  StepInfo& info = out.info;
  info.applicable = IsApplicable(action);
  const double before = state_.clock_s;
  double reward = 0.0;

  if (!info.applicable) {
    state_.clock_s += kInapplicableSeconds;
  } else {
    state_.clock_s += s.action_times.For(action.kind);
    const int t = action.target ? HostIndex(*action.target) : -1;
    switch (action.kind) {
      case ActionKind::kSubnetScan: {
        double gain = 0.0;
        for (int h : hosts_[t].scan_reach) {
          if (state_.discovered[h]) continue;
          state_.discovered[h] = true;
          gain += s.hosts[h].discovery_value;
          info.events.push_back({EventKind::kDiscovered, s.hosts[h].address, 0.0});
        }
        Credit(t, gain);
        reward = gain - hosts_[t].scan_cost;
        break;
      }
      case ActionKind::kExploit: {
        state_.compromised[t] = true;
        state_.infection_time_s[t] = state_.clock_s;
        info.events.push_back({EventKind::kCompromised, s.hosts[t].address, 0.0});
        const double value = s.hosts[t].infection_value;
        Credit(t, value);
        reward = value - hosts_[t].exploit_cost;
        reward += ReselectPath(info.events, t);
        break;
      }
      case ActionKind::kUpload: {
        const double rate = *action.rate == UploadRate::kFast ? s.upload_rates.fast_mb_per_s
                                                              : s.upload_rates.slow_mb_per_s;
        const double duration = s.action_times.upload;
        const double volume = std::min(rate * duration, state_.remaining_payload_mb);
        state_.remaining_payload_mb -= volume;
        const double gain = s.rewards.upload_per_mb * volume;
        Credit(t, gain);
        reward = gain - hosts_[t].upload_cost;
        FirewallCounters& fw = state_.firewalls.at(state_.selected_path->hops.back().subnet);
        fw.window_volume_mb += volume;
        fw.window_active_time_s += duration;
        fw.total_volume_mb += volume;
        fw.total_active_time_s += duration;
        info.events.push_back({EventKind::kUploaded, s.hosts[t].address, volume});
        break;
      }
      case ActionKind::kSleep:
        for (auto& [subnet, counters] : state_.firewalls) {
          counters.window_volume_mb = 0.0;
          counters.window_active_time_s = 0.0;
        }
        break;
    }

    FirewallCheckResult check = FirewallCheck();
    info.detection = check.detected;
    reward += check.penalty;
    info.events.insert(info.events.end(), check.events.begin(), check.events.end());
    if (!state_.done && action.kind == ActionKind::kUpload && state_.remaining_payload_mb <= 0.0) {
      state_.remaining_payload_mb = 0.0;
      reward += s.rewards.completion_bonus;
      Credit(foothold_, s.rewards.completion_bonus);
      state_.completed = true;
      state_.done = true;
      state_.termination = Termination::kCompleted;
      info.events.push_back({EventKind::kCompleted, s.foothold, 0.0});
    }
  }
  if (!state_.done) {
    auto events = RegularUpdate();
    info.events.insert(info.events.end(), events.begin(), events.end());
  }

  ++state_.steps;
  if (!state_.done && state_.steps >= options_.step_cap) {
    state_.done = true;
    state_.termination = Termination::kStepCap;
    info.events.push_back({EventKind::kStepCap, std::nullopt, 0.0});
  }
  info.clock_delta_s = state_.clock_s - before;
  state_.episode_return += reward;
  out.reward = reward;
  out.done = state_.done;
  out.observation = EncodeObservation();
  return out;
}

Observation Environment::EncodeObservation() const {
  const Scenario& s = *scenario_;
  const ObservationLayout& L = layout_;
  Observation obs(L.size, 0.0);
  const int services_at = static_cast<int>(L.os.size());
  const int processes_at = services_at + static_cast<int>(L.services.size());
  const int values_at = L.discovery_value_offset();
  for (std::size_t i = 0; i < s.hosts.size(); ++i) {
    const HostSpec& host = s.hosts[i];
    double* block = obs.data() + i * L.host_block;
    block[IndexIn(L.os, host.os)] = 1.0;
    for (const std::string& svc : host.services) block[services_at + IndexIn(L.services, svc)] = 1.0;
    for (const std::string& p : host.processes) block[processes_at + IndexIn(L.processes, p)] = 1.0;
    block[values_at] = host.discovery_value;
    block[values_at + 1] = state_.discovered[i] ? 1.0 : 0.0;
    block[values_at + 2] = host.infection_value;
    block[values_at + 3] = state_.compromised[i] ? 1.0 : 0.0;
    block[values_at + 4] = state_.compromised[i] && !state_.isolated[i] ? 1.0 : 0.0;
  }
  for (std::size_t k = 0; k < L.targets.size(); ++k) {
    const int t = L.targets[k];
    double* block = obs.data() + L.target_offset(static_cast<int>(k));
    block[static_cast<int>(Connection(t))] = 1.0;
    block[3] = state_.compromised[t] ? state_.clock_s - state_.infection_time_s[t] : 0.0;
    block[4] = state_.remaining_payload_mb;
  }
  return obs;
}

StepRecord MakeStepRecord(int index, const Action& action, const StepOutcome& outcome,
                          const EnvState& state_after) {
  StepRecord r;
  r.index = index;
  r.action = action;
  r.applicable = outcome.info.applicable;
  r.clock_s = state_after.clock_s;
  r.reward = outcome.reward;
  r.remaining_payload_mb = state_after.remaining_payload_mb;
  r.detection = outcome.info.detection;
  r.done = outcome.done;
  for (const Event& e : outcome.info.events) {
    if (e.kind == EventKind::kDiscovered && e.host) r.discovered.push_back(*e.host);
    if (e.kind == EventKind::kPathSelected && state_after.selected_path) {
      r.selected_path = state_after.selected_path->hops;
    }
  }
  return r;
}

std::string ToJsonLine(const StepRecord& r) {
  json line;
  line["step"] = r.index;
  line["action"] = std::string(ToString(r.action.kind));
  line["target"] = r.action.target ? AddressJson(*r.action.target) : json(nullptr);
  if (r.action.vulnerability) line["vulnerability"] = *r.action.vulnerability;
  if (r.action.rate) line["rate"] = std::string(ToString(*r.action.rate));
  line["applicable"] = r.applicable;
  line["clock"] = r.clock_s;
  line["reward"] = r.reward;
  line["remaining_payload"] = r.remaining_payload_mb;
  line["detection"] = r.detection;
  line["done"] = r.done;
  if (!r.discovered.empty()) line["discovered"] = PathJson(r.discovered);
  if (r.selected_path) line["selected_path"] = PathJson(*r.selected_path);
  return line.dump();
}

StepRecord ParseStepRecord(const std::string& text) {
  json line;
  try {
    line = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed trajectory line: ") + e.what());
  }
  try {
    StepRecord r;
    r.index = line.at("step").get<int>();
    auto kind = ParseActionKind(line.at("action").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown action kind");
    r.action.kind = *kind;
    if (!line.at("target").is_null()) r.action.target = AddressFrom(line.at("target"));
    if (line.contains("vulnerability")) r.action.vulnerability = line["vulnerability"].get<std::string>();
    if (line.contains("rate")) {
      r.action.rate = line["rate"].get<std::string>() == "fast" ? UploadRate::kFast : UploadRate::kSlow;
    }
    r.applicable = line.at("applicable").get<bool>();
    r.clock_s = line.at("clock").get<double>();
    r.reward = line.at("reward").get<double>();
    r.remaining_payload_mb = line.at("remaining_payload").get<double>();
    r.detection = line.at("detection").get<bool>();
    r.done = line.at("done").get<bool>();
    if (line.contains("discovered")) r.discovered = PathFrom(line["discovered"]);
    if (line.contains("selected_path")) r.selected_path = PathFrom(line["selected_path"]);
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad trajectory line: ") + e.what());
  }
}

}  // namespace exfil
