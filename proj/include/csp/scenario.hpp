#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csp/metrics.hpp"

namespace csp {

enum class Archetype { Forgetting, Transfer, Robustness, Compositional, Custom };

Archetype archetype_from_string(const std::string& s);
std::string archetype_name(Archetype a);

struct Scenario {
  std::string name;
  Archetype archetype = Archetype::Custom;
  std::uint64_t seed = 0;
  std::vector<TaskSpec> tasks;

  bool operator==(const Scenario&) const = default;
};

// Length 4 builds the archetype's loop; length 8 repeats it twice.
Scenario build_scenario(Archetype archetype, int length, long budget = 20000);

// JSON schema: {name, archetype, seed, tasks:[{name, budget, tweaks:{...}}]}.
// Tweaks are explicit deltas from the base dynamics; unknown keys reject.
std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const std::filesystem::path& path, const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

struct RunConfig {
  MethodConfig method;
  Scenario scenario;
  SacConfig sac;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  bool compute_solo = true;   // fills the transfer column + reference row
  bool write_files = true;
  int n_eval = 32;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  PerformanceMatrix matrix{1};
  std::vector<GrowDecision> decisions;
  double size = 0.0;
  int anchors = 1;
  std::vector<std::string> events;  // one JSON record per line
};

struct Aggregate {
  double mean = 0.0, stddev = 0.0;
  int n = 0;
};

struct RunResult {
  RunConfig config;
  std::vector<SeedResult> seeds;

  Aggregate performance() const;
  Aggregate transfer() const;
  Aggregate forgetting_metric() const;
  Aggregate size() const;
};

// Sequential protocol: per seed, train the method task by task, evaluate on
// every task seen so far after each task, then (optionally) run the solo
// single-task trainings that define the transfer column and reference row.
RunResult run(const RunConfig& config);

struct AblateRow {
  double epsilon = 0.0;
  double performance = 0.0;
  double mean_size = 0.0;
  double replay_ratio = 0.0;  // growing factor from the recorded decision log
};

// Runs CSP once per threshold and additionally replays the epsilon = -2 run's
// decision log across the whole list (deterministic monotone table).
std::vector<AblateRow> ablate_threshold(const RunConfig& base,
                                        std::span<const double> epsilons);

// Rebuilds a performance matrix (and decision log) from an events.jsonl file.
struct ParsedEvents {
  PerformanceMatrix matrix{1};
  std::vector<GrowDecision> decisions;
  double size = 1.0;
};
ParsedEvents parse_events_file(const std::filesystem::path& path, int n_tasks);

}  // namespace csp
