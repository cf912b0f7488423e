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

#include "exfil/analysis.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace exfil {
namespace {

using json = nlohmann::ordered_json;

std::string FormatDouble(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Moments MomentsOf(const std::vector<double>& values) {
  Moments m;
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(var / n);
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  m.min = *lo;
  m.max = *hi;
  // Rounding can push the mean of identical values just outside [min, max].
  m.mean = std::clamp(m.mean, m.min, m.max);
  return m;
}

json MomentsJson(const Moments& m) {
  return {{"mean", m.mean}, {"std", m.std}, {"min", m.min}, {"max", m.max}};
}

Moments MomentsFrom(const json& node) {
  return {node.at("mean").get<double>(), node.at("std").get<double>(),
          node.at("min").get<double>(), node.at("max").get<double>()};
}

json AddressJson(HostAddress a) { return json::array({a.subnet, a.local}); }

HostAddress AddressFrom(const json& node) {
  if (!node.is_array() || node.size() != 2) throw std::invalid_argument("address must be [subnet, local]");
  return {node.at(0).get<int>(), node.at(1).get<int>()};
}

json PathJson(const std::vector<HostAddress>& hops) {
  json out = json::array();
  for (HostAddress h : hops) out.push_back(AddressJson(h));
  return out;
}

}  // namespace

std::string EpisodeRecordToJson(const EpisodeRecord& record) {
  json doc;
  doc["steps"] = record.steps;
  doc["reward"] = record.reward;
  doc["completed"] = record.completed;
  doc["detected"] = record.detected;
  if (record.final_path) {
    const PathCandidate& p = *record.final_path;
    doc["final_path"] = {{"hops", PathJson(p.hops)},
                         {"protocol_hops", p.protocol_hops},
                         {"coverage", p.coverage},
                         {"length", p.length},
                         {"path_reward", p.path_reward}};
  } else {
    doc["final_path"] = nullptr;
  }
  json trajectory = json::array();
  for (const StepRecord& s : record.trajectory) trajectory.push_back(json::parse(ToJsonLine(s)));
  doc["trajectory"] = trajectory;
  return doc.dump();
}

EpisodeRecord ParseEpisodeRecord(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed episode record: ") + e.what());
  }
  try {
    EpisodeRecord record;
    record.steps = doc.at("steps").get<int>();
    record.reward = doc.at("reward").get<double>();
    record.completed = doc.at("completed").get<bool>();
    record.detected = doc.at("detected").get<bool>();
    if (const json& p = doc.at("final_path"); !p.is_null()) {
      PathCandidate path;
      for (const json& h : p.at("hops")) path.hops.push_back(AddressFrom(h));
      path.protocol_hops = p.at("protocol_hops").get<int>();
      path.coverage = p.at("coverage").get<double>();
      path.length = p.at("length").get<int>();
      path.path_reward = p.at("path_reward").get<double>();
      record.final_path = std::move(path);
    }
    for (const json& s : doc.at("trajectory")) record.trajectory.push_back(ParseStepRecord(s.dump()));
    return record;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed episode record: ") + e.what());
  }
}

std::vector<StepRecord> PruneTrajectory(const EpisodeRecord& record,
                                        const std::set<HostAddress>& exits) {
  std::set<HostAddress> on_path = exits;
  if (record.final_path) on_path.insert(record.final_path->hops.begin(), record.final_path->hops.end());
  for (const StepRecord& step : record.trajectory) {
    if (step.selected_path) on_path.insert(step.selected_path->begin(), step.selected_path->end());
  }
  std::vector<const StepRecord*> applicable;
  for (const StepRecord& step : record.trajectory) {
    if (step.applicable) applicable.push_back(&step);
  }
  auto is_upload = [&](std::size_t i) {
    return i < applicable.size() && applicable[i]->action.kind == ActionKind::kUpload;
  };
  std::vector<StepRecord> kept;
  for (std::size_t i = 0; i < applicable.size(); ++i) {
    const StepRecord& step = *applicable[i];
    bool keep = false;
    switch (step.action.kind) {
      case ActionKind::kSubnetScan:
        keep = std::any_of(step.discovered.begin(), step.discovered.end(),
                           [&](HostAddress h) { return on_path.contains(h); });
        break;
      case ActionKind::kExploit:
        keep = on_path.contains(*step.action.target);
        break;
      case ActionKind::kUpload:
        keep = true;
        break;
      case ActionKind::kSleep:
        keep = (i > 0 && is_upload(i - 1)) || is_upload(i + 1);
        break;
    }
    if (keep) kept.push_back(step);
  }
  return kept;
}

SummaryStats Summarize(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("cannot summarize zero episodes");
  std::vector<double> steps, rewards;
  for (const EpisodeRecord& r : records) {
    steps.push_back(r.steps);
    rewards.push_back(r.reward);
  }
  return {MomentsOf(steps), MomentsOf(rewards)};
}

std::vector<double> MovingAverage(const std::vector<double>& values, int window) {
  if (window < 1) throw std::invalid_argument("window must be at least 1");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t begin = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = begin; j <= i; ++j) sum += values[j];
    out[i] = sum / static_cast<double>(i + 1 - begin);
  }
  return out;
}

std::string ExportCurves(const std::vector<CurvePoint>& points, int window) {
  std::vector<double> steps, rewards;
  for (const CurvePoint& p : points) {
    steps.push_back(p.steps);
    rewards.push_back(p.reward);
  }
  std::vector<double> avg_steps = MovingAverage(steps, window);
  std::vector<double> avg_rewards = MovingAverage(rewards, window);
  std::string out = "episode,steps,reward,avg_steps,avg_reward\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out += std::to_string(points[i].episode) + "," + std::to_string(points[i].steps) + "," +
           FormatDouble(points[i].reward) + "," + FormatDouble(avg_steps[i]) + "," +
           FormatDouble(avg_rewards[i]) + "\n";
  }
  return out;
}

Report BuildReport(const Scenario& scenario, const std::vector<EpisodeRecord>& records) {
  Report report;
  report.protocol = scenario.exfil_protocol;
  report.episodes = static_cast<int>(records.size());
  std::set<HostAddress> exits;
  for (const HostSpec& host : scenario.hosts) {
    if (host.exfiltration_target) exits.insert(host.address);
  }
  std::map<std::vector<HostAddress>, int> path_counts;
  for (const EpisodeRecord& r : records) {
    report.completed += r.completed ? 1 : 0;
    report.detected += r.detected ? 1 : 0;
    if (r.final_path) ++path_counts[r.final_path->hops];
    report.key_steps.push_back(PruneTrajectory(r, exits));
  }
  if (!records.empty()) report.stats = Summarize(records);
  for (const auto& [hops, count] : path_counts) {
    ReportPath path;
    path.hops = hops;
    for (HostAddress h : hops) {
      const HostSpec* host = scenario.FindHost(h);
      path.runs_protocol.push_back(host && host->RunsService(scenario.exfil_protocol));
    }
    path.coverage = Coverage(hops, scenario.exfil_protocol, scenario);
    path.episodes = count;
    report.paths.push_back(std::move(path));
  }
  std::stable_sort(report.paths.begin(), report.paths.end(),
                   [](const ReportPath& a, const ReportPath& b) { return a.episodes > b.episodes; });
  return report;
}

std::string SerializeReport(const Report& report) {
  json doc;
  doc["schema_version"] = report.schema_version;
  doc["std_kind"] = "population";
  doc["protocol"] = report.protocol;
  doc["episodes"] = report.episodes;
  doc["completed"] = report.completed;
  doc["detected"] = report.detected;
  doc["stats"] = report.stats ? json{{"steps", MomentsJson(report.stats->steps)},
                                     {"reward", MomentsJson(report.stats->reward)}}
                              : json(nullptr);
  json paths = json::array();
  for (const ReportPath& p : report.paths) {
    json hops = PathJson(p.hops);
    json edges = json::array();
    for (std::size_t i = 0; i + 1 < p.hops.size(); ++i) {
      edges.push_back({{"from", AddressJson(p.hops[i])},
                       {"to", AddressJson(p.hops[i + 1])},
                       {"protocol", p.runs_protocol[i] && p.runs_protocol[i + 1]}});
    }
    paths.push_back({{"hops", hops},
                     {"runs_protocol", p.runs_protocol},
                     {"edges", edges},
                     {"coverage", p.coverage},
                     {"episodes", p.episodes}});
  }
  doc["paths"] = paths;
  json key_steps = json::array();
  for (const auto& steps : report.key_steps) {
    json episode = json::array();
    for (const StepRecord& s : steps) episode.push_back(json::parse(ToJsonLine(s)));
    key_steps.push_back(episode);
  }
  doc["key_steps"] = key_steps;
  return doc.dump(2) + "\n";
}

Report ParseReport(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    Report report;
    report.schema_version = doc.at("schema_version").get<int>();
    if (report.schema_version != kReportSchemaVersion) {
      throw std::invalid_argument("unsupported report schema version " +
                                  std::to_string(report.schema_version));
    }
    report.protocol = doc.at("protocol").get<std::string>();
    report.episodes = doc.at("episodes").get<int>();
    report.completed = doc.at("completed").get<int>();
    report.detected = doc.at("detected").get<int>();
    if (!doc.at("stats").is_null()) {
      report.stats = SummaryStats{MomentsFrom(doc["stats"].at("steps")),
                                  MomentsFrom(doc["stats"].at("reward"))};
    }
    for (const json& p : doc.at("paths")) {
      ReportPath path;
      for (const json& h : p.at("hops")) path.hops.push_back(AddressFrom(h));
      path.runs_protocol = p.at("runs_protocol").get<std::vector<bool>>();
      if (path.runs_protocol.size() != path.hops.size()) {
        throw std::invalid_argument("runs_protocol length differs from hops");
      }
      path.coverage = p.at("coverage").get<double>();
      path.episodes = p.at("episodes").get<int>();
      report.paths.push_back(std::move(path));
    }
    for (const json& episode : doc.at("key_steps")) {
      std::vector<StepRecord> steps;
      for (const json& s : episode) steps.push_back(ParseStepRecord(s.dump()));
      report.key_steps.push_back(std::move(steps));
    }
    return report;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
}

std::string RenderReport(const Scenario& scenario, const std::vector<EpisodeRecord>& records) {
  return SerializeReport(BuildReport(scenario, records));
}

std::string FormatStatsTable(const SummaryStats& stats) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof line, "%-8s %12s %12s\n", "", "steps", "reward");
  out += line;
  const std::pair<const char*, double Moments::*> rows[] = {
      {"mean", &Moments::mean}, {"std", &Moments::std}, {"min", &Moments::min}, {"max", &Moments::max}};
  for (const auto& [name, field] : rows) {
    std::snprintf(line, sizeof line, "%-8s %12.2f %12.2f\n", name, stats.steps.*field,
                  stats.reward.*field);
    out += line;
  }
  return out;
}

}  // namespace exfil
