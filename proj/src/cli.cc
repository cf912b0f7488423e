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

#include "exfil/cli.h"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "exfil/analysis.h"
#include "exfil/benchmark.h"
#include "exfil/ppo.h"
#include "exfil/scenario.h"

namespace exfil {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Bad input from the user: exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string Hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string UtcNow() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json ConfigJson(const PpoConfig& c) {
  return {{"actor_lr", c.actor_lr},         {"critic_lr", c.critic_lr},
          {"gamma", c.gamma},               {"lambda", c.lambda},
          {"horizon", c.horizon},           {"minibatch", c.minibatch},
          {"epochs", c.epochs},             {"clip", c.clip},
          {"entropy_coef", c.entropy_coef}, {"value_coef", c.value_coef},
          {"episodes", c.episodes},         {"seed", c.seed},
          {"reward_scale", c.reward_scale}, {"normalize_observations", c.normalize_observations},
          {"mask_inapplicable", c.mask_inapplicable}, {"step_cap", c.step_cap}};
}

struct Loaded {
  std::shared_ptr<const Scenario> scenario;
  std::string text;
};

Loaded LoadScenario(const fs::path& path) {
  std::string text = ReadFile(path);
  return {std::make_shared<const Scenario>(ParseScenario(text)), std::move(text)};
}

int ScenarioGen(const std::string& id, std::uint64_t seed, const fs::path& out_path,
                std::ostream& out) {
  Scenario scenario;
  if (id == "relay") {
    scenario = MakeRelayScenario();
  } else if (auto parsed = ParseBenchmarkId(id)) {
    scenario = GenerateBenchmark(*parsed, seed);
  } else {
    throw UsageError("unknown scenario id '" + id + "' (expected net1, net2 or relay)");
  }
  SaveScenarioFile(scenario, out_path);
  out << "wrote " << out_path.string() << " (" << scenario.subnets.size() << " subnets, "
      << scenario.hosts.size() << " hosts)\n";
  return kExitOk;
}

int ScenarioValidate(const fs::path& path, std::ostream& out, std::ostream& err) {
  std::string text = ReadFile(path);
  try {
    Scenario scenario = ParseScenario(text);
    out << path.string() << ": ok (" << scenario.subnets.size() << " subnets, "
        << scenario.hosts.size() << " hosts)\n";
    return kExitOk;
  } catch (const ScenarioError& e) {
    err << path.string() << ": " << e.what() << "\n";
    return kExitInvalid;
  }
}

int TrainCommand(const fs::path& scenario_path, PpoConfig config, const fs::path& out_dir,
                 bool quiet, std::ostream& out) {
  Loaded loaded = LoadScenario(scenario_path);
  config.Validate();
  fs::create_directories(out_dir);
  json manifest;
  manifest["tool"] = std::string(kToolName);
  manifest["version"] = std::string(kToolVersion);
  manifest["command"] = "train";
  manifest["scenario"] = {{"path", scenario_path.string()},
                          {"fnv1a64", Hex64(Fnv1a64(loaded.text))}};
  manifest["seed"] = config.seed;
  manifest["config"] = ConfigJson(config);
  manifest["output_directory"] = out_dir.string();
  manifest["started_at"] = UtcNow();
  manifest["finished_at"] = nullptr;
  WriteFile(out_dir / "manifest.json", manifest.dump(2) + "\n");

  TrainHooks hooks;
  if (!quiet) {
    hooks.on_episode = [&out](const EpisodeMetrics& m) {
      out << "episode " << m.episode << " reward " << m.reward << " steps " << m.steps
          << (m.completed ? " completed" : "") << (m.detected ? " detected" : "") << "\n";
    };
  }
  TrainResult result = Train(loaded.scenario, config, hooks);
  SaveCheckpoint(out_dir / "final.ckpt", result.checkpoint);
  WriteFile(out_dir / "episodes.csv", EpisodeMetricsCsv(result.metrics.episodes));
  WriteFile(out_dir / "updates.csv", UpdateMetricsCsv(result.metrics.updates));
  std::vector<CurvePoint> points;
  for (const EpisodeMetrics& m : result.metrics.episodes) {
    points.push_back({m.episode, m.steps, m.reward});
  }
  WriteFile(out_dir / "curves.csv", ExportCurves(points, 100));
  manifest["finished_at"] = UtcNow();
  manifest["episodes_completed"] = result.checkpoint.episodes;
  manifest["updates"] = result.checkpoint.updates;
  WriteFile(out_dir / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << (out_dir / "final.ckpt").string() << "\n";
  return kExitOk;
}

int EvaluateCommand(const fs::path& checkpoint_path, const fs::path& scenario_path,
                    EvalOptions options, std::optional<fs::path> out_dir, std::ostream& out) {
  Loaded loaded = LoadScenario(scenario_path);
  Checkpoint checkpoint = LoadCheckpoint(checkpoint_path);
  std::vector<EpisodeRecord> records;
  try {
    records = Evaluate(checkpoint, loaded.scenario, options);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path dir = out_dir.value_or(checkpoint_path.parent_path().empty()
                                            ? fs::path(".")
                                            : checkpoint_path.parent_path());
  fs::create_directories(dir);
  std::string lines;
  for (const EpisodeRecord& r : records) lines += EpisodeRecordToJson(r) + "\n";
  WriteFile(dir / "evaluation.jsonl", lines);
  WriteFile(dir / "report.json", RenderReport(*loaded.scenario, records));
  int completed = 0, detected = 0;
  for (const EpisodeRecord& r : records) {
    completed += r.completed ? 1 : 0;
    detected += r.detected ? 1 : 0;
  }
  out << records.size() << " episodes ("
      << (options.mode == EvalMode::kGreedy ? "greedy" : "stochastic") << "): " << completed
      << " completed, " << detected << " detected\n";
  if (!records.empty()) out << FormatStatsTable(Summarize(records));
  out << "wrote " << (dir / "report.json").string() << "\n";
  return kExitOk;
}

int ReportCommand(const std::optional<fs::path>& evaluation, const std::optional<fs::path>& scenario_path,
                  const std::optional<fs::path>& metrics, int window, const fs::path& out_dir,
                  std::ostream& out) {
  if (!evaluation && !metrics) throw UsageError("report needs --evaluation or --metrics");
  if (evaluation && !scenario_path) throw UsageError("--evaluation requires --scenario");
  if (window < 1) throw UsageError("--window must be at least 1");
  fs::create_directories(out_dir);
  if (evaluation) {
    Loaded loaded = LoadScenario(*scenario_path);
    std::vector<EpisodeRecord> records;
    std::istringstream lines(ReadFile(*evaluation));
    for (std::string line; std::getline(lines, line);) {
      if (!line.empty()) records.push_back(ParseEpisodeRecord(line));
    }
    WriteFile(out_dir / "report.json", RenderReport(*loaded.scenario, records));
    if (!records.empty()) out << FormatStatsTable(Summarize(records));
    out << "wrote " << (out_dir / "report.json").string() << "\n";
  }
  if (metrics) {
    std::vector<CurvePoint> points;
    for (const EpisodeMetrics& m : ParseEpisodeMetricsCsv(ReadFile(*metrics))) {
      points.push_back({m.episode, m.steps, m.reward});
    }
    WriteFile(out_dir / "curves.csv", ExportCurves(points, window));
    out << "wrote " << (out_dir / "curves.csv").string() << "\n";
  }
  return kExitOk;
}

}  // namespace

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Protocol-aware data exfiltration simulator and PPO trainer", std::string(kToolName)};
  app.set_help_flag("--help", "Print help and exit");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string id;
  std::uint64_t seed = 0;
  fs::path out_path, scenario_path, checkpoint_path;
  std::optional<fs::path> out_dir, evaluation, metrics;
  PpoConfig config;
  bool quiet = false, greedy = false;
  EvalOptions eval;
  int window = 100;

  CLI::App* scenario = app.add_subcommand("scenario", "Generate or validate scenario files");
  scenario->require_subcommand(1);
  CLI::App* gen = scenario->add_subcommand("gen", "Write a benchmark scenario");
  gen->add_option("--id", id, "net1, net2 or relay")->required();
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", out_path, "Output file")->required();
  CLI::App* validate = scenario->add_subcommand("validate", "Check a scenario file");
  validate->add_option("--scenario", scenario_path, "Scenario file")->required();

  CLI::App* train = app.add_subcommand("train", "Train a PPO agent");
  train->add_option("--scenario", scenario_path, "Scenario file")->required();
  train->add_option("--episodes", config.episodes, "Training episodes");
  train->add_option("--seed", config.seed, "Run seed");
  train->add_option("--out", out_path, "Run directory")->required();
  train->add_option("--step-cap", config.step_cap, "Maximum steps per episode");
  train->add_flag("--mask-inapplicable", config.mask_inapplicable,
                  "Exclude inapplicable actions from the policy");
  train->add_flag("--quiet", quiet, "Suppress per-episode progress");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Run a trained agent");
  evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  evaluate->add_option("--scenario", scenario_path, "Scenario file")->required();
  evaluate->add_option("--episodes", eval.episodes, "Evaluation episodes");
  evaluate->add_option("--seed", eval.seed, "Evaluation seed");
  evaluate->add_option("--step-cap", eval.step_cap, "Maximum steps per episode");
  evaluate->add_flag("--greedy", greedy, "Take the most probable action");
  evaluate->add_flag("--mask-inapplicable", eval.mask_inapplicable,
                     "Exclude inapplicable actions from the policy");
  evaluate->add_option("--out", out_dir, "Output directory (default: checkpoint directory)");

  CLI::App* report = app.add_subcommand("report", "Build reports and learning curves");
  report->add_option("--evaluation", evaluation, "evaluation.jsonl from evaluate");
  report->add_option("--scenario", scenario_path, "Scenario file");
  report->add_option("--metrics", metrics, "episodes.csv from train");
  report->add_option("--window", window, "Moving-average window");
  report->add_option("--out", out_path, "Output directory")->required();

  std::vector<const char*> argv = {kToolName.data()};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  try {
    if (*gen) return ScenarioGen(id, seed, out_path, out);
    if (*validate) return ScenarioValidate(scenario_path, out, err);
    if (*train) return TrainCommand(scenario_path, config, out_path, quiet, out);
    if (*evaluate) {
      eval.mode = greedy ? EvalMode::kGreedy : EvalMode::kStochastic;
      if (eval.episodes < 0) throw UsageError("--episodes must be non-negative");
      return EvaluateCommand(checkpoint_path, scenario_path, eval, out_dir, out);
    }
    if (*report) return ReportCommand(evaluation, scenario_path, metrics, window, out_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace exfil
