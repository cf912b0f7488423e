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

#ifndef EXFIL_ENVIRONMENT_H_
#define EXFIL_ENVIRONMENT_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "exfil/pathfinder.h"
#include "exfil/scenario.h"

namespace exfil {

enum class UploadRate { kFast, kSlow };
enum class ConnectionStatus { kNotConnected = 0, kConnected = 1, kIsolated = 2 };

enum class Termination {
  kNone,
  kCompleted,      // payload fully uploaded
  kDetected,       // emergency firewall update isolated the foothold
  kRegularUpdate,  // periodic firewall update blocked every compromised host
  kStepCap,
};

std::string_view ToString(UploadRate rate);
std::string_view ToString(Termination termination);

struct Action {
  ActionKind kind = ActionKind::kSleep;
  std::optional<HostAddress> target;         // absent only for sleep
  std::optional<std::string> vulnerability;  // exploit only
  std::optional<UploadRate> rate;            // upload only

  std::string ToString() const;
  bool operator==(const Action&) const = default;
};

// Egress counters of one subnet firewall. The window counters are cleared by
// a sleep; the totals never are.
struct FirewallCounters {
  double window_volume_mb = 0.0;
  double window_active_time_s = 0.0;
  double last_regular_update_s = 0.0;
  double total_volume_mb = 0.0;
  double total_active_time_s = 0.0;
};

// Mutable episode state. Per-host vectors are indexed like Scenario::hosts.
struct EnvState {
  std::vector<bool> discovered;
  std::vector<bool> compromised;
  std::vector<bool> isolated;
  std::vector<double> infection_time_s;  // clock at compromise
  std::vector<double> accumulated_reward;
  std::map<int, FirewallCounters> firewalls;  // by subnet id
  double clock_s = 0.0;
  double remaining_payload_mb = 0.0;
  std::optional<PathCandidate> selected_path;
  std::set<std::vector<HostAddress>> rewarded_paths;
  bool vulnerabilities_patched = false;
  int steps = 0;
  double episode_return = 0.0;
  bool done = false;
  bool completed = false;
  Termination termination = Termination::kNone;
};

enum class EventKind {
  kDiscovered,
  kCompromised,
  kPathSelected,
  kPathLost,
  kUploaded,
  kCompleted,
  kDetection,
  kIsolated,
  kRegularUpdate,
  kStepCap,
};

std::string_view ToString(EventKind kind);

struct Event {
  EventKind kind;
  std::optional<HostAddress> host;
  double amount = 0.0;  // megabytes for uploads, reward units for penalties

  bool operator==(const Event&) const = default;
};

using Observation = std::vector<double>;

struct StepInfo {
  bool applicable = false;
  bool detection = false;
  double clock_delta_s = 0.0;
  std::vector<Event> events;
};

struct StepOutcome {
  double reward = 0.0;
  Observation observation;
  bool done = false;
  StepInfo info;
};

struct FirewallCheckResult {
  bool detected = false;
  double penalty = 0.0;  // <= 0, added to the step reward
  std::vector<Event> events;
};

class EpisodeFinishedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvalidScenarioError : public std::invalid_argument {
 public:
  explicit InvalidScenarioError(const std::vector<Violation>& violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// Cost of `kind` against a host running `services`: the configured cost of
// the riskiest service, low when the host runs nothing.
double ActionCost(ActionKind kind, const std::set<std::string>& services,
                  const ServiceRiskTable& table);

// Per host in address order: subnet scan, one exploit per vulnerability, fast
// upload, slow upload. A single sleep closes the list.
std::vector<Action> EnumerateActions(const Scenario& scenario);

// Layout of the flat observation vector.
struct ObservationLayout {
  std::vector<std::string> os;
  std::vector<std::string> services;
  std::vector<std::string> processes;
  std::vector<int> targets;  // host indices of exfiltration targets
  int host_block = 0;        // width of one host's features
  int target_block = 5;      // connection one-hot (3), time since infection, payload
  int size = 0;

  // Offsets inside a host block.
  int discovery_value_offset() const;
  int infection_value_offset() const;
  int access_offset() const;
  // Start of the block for the k-th exfiltration target.
  int target_offset(int k) const;
};

ObservationLayout MakeObservationLayout(const Scenario& scenario);

struct EnvOptions {
  int step_cap = 10000;
  SearchOptions path_search;
};

// The episodic exfiltration MDP over one scenario. Instances are owned by a
// single thread of control; the scenario is shared read-only.
class Environment {
 public:
  // Throws InvalidScenarioError when the scenario has violations.
  explicit Environment(std::shared_ptr<const Scenario> scenario, EnvOptions options = {});

  Observation Reset(std::uint64_t seed);

  // Throws EpisodeFinishedError after the episode ended and
  // std::out_of_range / std::invalid_argument for actions not in actions().
  StepOutcome Step(int action_index);
  StepOutcome Step(const Action& action);

  // Detection check and periodic update, applied to the current state. Step
  // runs both; they are public for inspection and tests.
  FirewallCheckResult FirewallCheck();
  std::vector<Event> RegularUpdate();

  bool IsApplicable(const Action& action) const;
  Observation EncodeObservation() const;
  // Network input i is observation[i] / observation_scale()[i], passed
  // through log1p where log_features()[i] is set. Values and payload are
  // divided by their scenario maxima; time since infection is measured in
  // firewall windows on a log scale so that a single sleep stays visible.
  const std::vector<double>& observation_scale() const { return observation_scale_; }
  const std::vector<bool>& log_features() const { return log_features_; }

  const Scenario& scenario() const { return *scenario_; }
  std::shared_ptr<const Scenario> shared_scenario() const { return scenario_; }
  const std::vector<Action>& actions() const { return actions_; }
  const ObservationLayout& layout() const { return layout_; }
  const EnvState& state() const { return state_; }
  const EnvOptions& options() const { return options_; }
  std::uint64_t seed() const { return seed_; }

  int HostIndex(HostAddress address) const;
  int foothold_index() const { return foothold_; }
  ConnectionStatus Connection(int host_index) const;
  int ActionIndex(const Action& action) const;

 private:
  struct HostCache {
    double scan_cost = 0.0;
    double exploit_cost = 0.0;
    double upload_cost = 0.0;
    bool runs_protocol = false;
    std::vector<int> scan_reach;  // hosts revealed by a scan from this host
  };

  void Credit(int host, double amount);
  double ReselectPath(std::vector<Event>& events, int credited_host);
  void IsolateAllCompromised(std::vector<Event>& events);

  std::shared_ptr<const Scenario> scenario_;
  EnvOptions options_;
  std::vector<Action> actions_;
  ObservationLayout layout_;
  std::vector<double> observation_scale_;
  std::vector<bool> log_features_;
  std::vector<HostCache> hosts_;
  std::map<HostAddress, int> host_index_;
  int foothold_ = -1;
  std::uint64_t seed_ = 0;
  EnvState state_;
};

// One line of the trajectory log.
struct StepRecord {
  int index = 0;
  Action action;
  bool applicable = false;
  double clock_s = 0.0;
  double reward = 0.0;
  double remaining_payload_mb = 0.0;
  bool detection = false;
  bool done = false;
  std::vector<HostAddress> discovered;  // hosts newly discovered by this step
  std::optional<std::vector<HostAddress>> selected_path;  // set when the path changed

  bool operator==(const StepRecord&) const = default;
};

StepRecord MakeStepRecord(int index, const Action& action, const StepOutcome& outcome,
                          const EnvState& state_after);
std::string ToJsonLine(const StepRecord& record);
StepRecord ParseStepRecord(const std::string& line);

}  // namespace exfil

#endif  // EXFIL_ENVIRONMENT_H_
