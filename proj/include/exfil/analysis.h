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

#ifndef EXFIL_ANALYSIS_H_
#define EXFIL_ANALYSIS_H_

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "exfil/environment.h"
#include "exfil/pathfinder.h"
#include "exfil/scenario.h"

namespace exfil {

inline constexpr int kReportSchemaVersion = 1;

struct EpisodeRecord {
  int steps = 0;
  double reward = 0.0;
  bool completed = false;
  bool detected = false;
  std::optional<PathCandidate> final_path;  // last path selected in the episode
  std::vector<StepRecord> trajectory;

  bool operator==(const EpisodeRecord&) const = default;
};

// One-line JSON encoding used for evaluation logs.
std::string EpisodeRecordToJson(const EpisodeRecord& record);
// Throws std::invalid_argument on malformed input.
EpisodeRecord ParseEpisodeRecord(const std::string& line);

struct Moments {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;

  bool operator==(const Moments&) const = default;
};

struct SummaryStats {
  Moments steps;
  Moments reward;

  bool operator==(const SummaryStats&) const = default;
};

// Key steps of a finished episode, in order: scans that revealed a host on a
// selected path or in `exits`, exploits of such hosts, every upload, and
// sleeps next to an upload. Inapplicable actions are dropped.
std::vector<StepRecord> PruneTrajectory(const EpisodeRecord& record,
                                        const std::set<HostAddress>& exits = {});

// Throws std::invalid_argument on an empty input.
SummaryStats Summarize(const std::vector<EpisodeRecord>& records);

struct CurvePoint {
  int episode = 0;
  int steps = 0;
  double reward = 0.0;
};

// CSV `episode,steps,reward,avg_steps,avg_reward`; averages cover the
// trailing `window` episodes (fewer at the start). Throws
// std::invalid_argument when window < 1.
std::string ExportCurves(const std::vector<CurvePoint>& points, int window);

// Trailing moving average, same length as `values`.
std::vector<double> MovingAverage(const std::vector<double>& values, int window);

// Machine-readable JSON report: paths with per-hop protocol annotations,
// pruned key steps of each episode, summary statistics and outcome counts.
std::string RenderReport(const Scenario& scenario, const std::vector<EpisodeRecord>& records);

struct ReportPath {
  std::vector<HostAddress> hops;
  std::vector<bool> runs_protocol;
  double coverage = 0.0;
  int episodes = 0;  // episodes that ended on this path

  bool operator==(const ReportPath&) const = default;
};

struct Report {
  int schema_version = kReportSchemaVersion;
  std::string protocol;
  int episodes = 0;
  int completed = 0;
  int detected = 0;
  std::optional<SummaryStats> stats;
  std::vector<ReportPath> paths;
  std::vector<std::vector<StepRecord>> key_steps;  // per episode

  bool operator==(const Report&) const = default;
};

Report BuildReport(const Scenario& scenario, const std::vector<EpisodeRecord>& records);
std::string SerializeReport(const Report& report);
// Throws std::invalid_argument on malformed input or a schema version
// mismatch.
Report ParseReport(const std::string& text);

// Plain-text table of the statistics.
std::string FormatStatsTable(const SummaryStats& stats);

}  // namespace exfil

#endif  // EXFIL_ANALYSIS_H_
