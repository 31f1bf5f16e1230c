#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "csp/checkpoint.hpp"
#include "csp/landscape.hpp"
#include "csp/scenario.hpp"

namespace fs = std::filesystem;
using namespace csp;

namespace {

// --scenario accepts a JSON file path or a builtin archetype, optionally with
// a length suffix ("robustness", "robustness:8").
Scenario resolve_scenario(const std::string& spec, long budget) {
  if (fs::exists(spec)) {
    Scenario s = load_scenario(spec);
    if (budget > 0)
      for (TaskSpec& t : s.tasks) t.budget = budget;
    return s;
  }
  std::string name = spec;
  int length = 4;
  if (const auto colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    length = std::stoi(spec.substr(colon + 1));
  }
  return build_scenario(archetype_from_string(name), length,
                        budget > 0 ? budget : 20000);
}

std::vector<std::uint64_t> resolve_seeds(const std::string& spec,
                                         std::uint64_t base_seed) {
  std::vector<std::uint64_t> seeds;
  if (spec.empty()) return {base_seed};
  if (spec.find(',') == std::string::npos && spec.find('-') == std::string::npos) {
    // A bare count n means seeds base..base+n-1.
    const long n = std::stol(spec);
    for (long i = 0; i < n; ++i) seeds.push_back(base_seed + i);
    return seeds;
  }
  std::string rest = spec;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string tok = rest.substr(0, comma);
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    seeds.push_back(std::stoull(tok));
  }
  return seeds;
}

std::vector<double> parse_double_list(const std::string& spec) {
  std::vector<double> out;
  std::string rest = spec;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(std::stod(rest.substr(0, comma)));
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
  }
  return out;
}

std::uint64_t env_seed_or(std::uint64_t fallback) {
  if (const char* s = std::getenv("CSP_SEED")) return std::stoull(s);
  return fallback;
}

void print_metrics_row(const std::string& method, const RunResult& r) {
  const Aggregate p = r.performance(), t = r.transfer(),
                  f = r.forgetting_metric(), s = r.size();
  std::printf("%-12s performance %6.2f ±%5.2f   size %5.2f ±%4.2f   "
              "transfer %6.2f ±%5.2f   forgetting %6.2f ±%5.2f\n",
              method.c_str(), p.mean, p.stddev, s.mean, s.stddev, t.mean,
              t.stddev, f.mean, f.stddev);
}

RunConfig make_run_config(const std::string& scenario_spec,
                          const std::string& method, double epsilon,
                          double lambda, long budget, const std::string& seeds,
                          const std::string& out, bool no_solo) {
  RunConfig cfg;
  cfg.scenario = resolve_scenario(scenario_spec, budget);
  cfg.scenario.seed = env_seed_or(cfg.scenario.seed);
  cfg.method.id = method_from_string(method);
  cfg.method.epsilon = epsilon;
  cfg.method.lambda = lambda;
  cfg.seeds = resolve_seeds(seeds, cfg.scenario.seed);
  cfg.out_dir = out;
  cfg.compute_solo = !no_solo;
  cfg.write_files = !out.empty();
  return cfg;
}

int run_metrics(const std::string& runs_dir) {
  const fs::path dir(runs_dir);
  const Scenario scenario = load_scenario(dir / "scenario.json");
  const int n = static_cast<int>(scenario.tasks.size());

  std::string method = "?";
  {
    std::ifstream in(dir / "run_config.json");
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      const auto pos = text.find("\"method\"");
      if (pos != std::string::npos) {
        const auto q1 = text.find('"', text.find(':', pos));
        const auto q2 = text.find('"', q1 + 1);
        method = text.substr(q1 + 1, q2 - q1 - 1);
      }
    }
  }

  RunResult result;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed_", 0) != 0) continue;
    const ParsedEvents ev = parse_events_file(entry.path() / "events.jsonl", n);
    SeedResult sr;
    sr.seed = std::stoull(name.substr(5));
    sr.matrix = ev.matrix;
    sr.decisions = ev.decisions;
    sr.size = ev.size;
    result.seeds.push_back(std::move(sr));
  }
  if (result.seeds.empty())
    throw ConfigError("no seed_* directories under " + runs_dir);
  std::sort(result.seeds.begin(), result.seeds.end(),
            [](const SeedResult& a, const SeedResult& b) { return a.seed < b.seed; });
  print_metrics_row(method, result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual subspace-of-policies trainer and analysis tool"};
  app.require_subcommand(1);

  // run
  std::string scenario_spec, method = "csp", seeds, out;
  double epsilon = 0.1, lambda = 1.0;
  long budget = 0;
  bool no_solo = false;
  CLI::App* cmd_run = app.add_subcommand("run", "Train a method on a scenario");
  cmd_run->add_option("--scenario", scenario_spec,
                      "Scenario file or archetype[:length]")->required();
  cmd_run->add_option("--method", method,
                      "ft1|ftl2|ewc|sacn|ftn|csp|csp_linear|csp_oracle");
  cmd_run->add_option("--epsilon", epsilon, "Extension threshold");
  cmd_run->add_option("--lambda", lambda, "Regularization coefficient");
  cmd_run->add_option("--budget", budget, "Per-task interaction budget");
  cmd_run->add_option("--seeds", seeds, "Count or comma list of seeds");
  cmd_run->add_option("--out", out, "Output directory")->required();
  cmd_run->add_flag("--no-solo", no_solo, "Skip solo runs (no transfer column)");

  // metrics
  std::string runs_dir;
  CLI::App* cmd_metrics =
      app.add_subcommand("metrics", "Summarize a finished run directory");
  cmd_metrics->add_option("--runs", runs_dir, "Run directory")->required();

  // landscape
  std::string ckpt_path, land_task = "normal", land_out, critic_path;
  int grid_n = 127, mc_rollouts = 10, n_pairs = 1024;
  long critic_steps = 20000;
  std::uint64_t land_seed = 0;
  CLI::App* cmd_land = app.add_subcommand(
      "landscape", "Export reward/critic values over a 3-anchor simplex grid");
  cmd_land->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  cmd_land->add_option("--task", land_task, "Task name or index in the checkpoint");
  cmd_land->add_option("--grid-n", grid_n, "Grid resolution");
  cmd_land->add_option("--out", land_out, "Output CSV")->required();
  cmd_land->add_option("--critic", critic_path, "Optional trained critic file");
  cmd_land->add_option("--mc-rollouts", mc_rollouts, "Rollouts per grid point");
  cmd_land->add_option("--pairs", n_pairs, "Buffer pairs for the critic column");
  cmd_land->add_option("--critic-steps", critic_steps,
                       "Training budget when no critic file is given");
  cmd_land->add_option("--seed", land_seed, "Seed");

  // ablate
  std::string eps_list = "-2,0,0.1,0.25,0.5,1e18";
  CLI::App* cmd_ablate =
      app.add_subcommand("ablate", "Threshold sweep with decision-log replay");
  cmd_ablate->add_option("--scenario", scenario_spec, "Scenario file or archetype")
      ->required();
  cmd_ablate->add_option("--epsilons", eps_list, "Comma list of thresholds");
  cmd_ablate->add_option("--budget", budget, "Per-task interaction budget");
  cmd_ablate->add_option("--seeds", seeds, "Count or comma list of seeds");
  cmd_ablate->add_option("--out", out, "Output directory")->required();

  // compare
  std::string methods_list = "ft1,ftl2,ewc,sacn,ftn,csp";
  CLI::App* cmd_compare =
      app.add_subcommand("compare", "Run several methods on one scenario");
  cmd_compare->add_option("--scenario", scenario_spec, "Scenario file or archetype")
      ->required();
  cmd_compare->add_option("--methods", methods_list, "Comma list of methods");
  cmd_compare->add_option("--epsilon", epsilon, "Extension threshold");
  cmd_compare->add_option("--lambda", lambda, "Regularization coefficient");
  cmd_compare->add_option("--budget", budget, "Per-task interaction budget");
  cmd_compare->add_option("--seeds", seeds, "Count or comma list of seeds");
  cmd_compare->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);

    if (cmd_run->parsed()) {
      RunConfig cfg = make_run_config(scenario_spec, method, epsilon, lambda,
                                      budget, seeds, out, no_solo);
      const RunResult result = run(cfg);
      int failed = 0;
      for (const SeedResult& s : result.seeds) failed += s.failed ? 1 : 0;
      if (!no_solo) print_metrics_row(method, result);
      const Aggregate sz = result.size();
      std::printf("runs: %zu ok, %d failed; model size %.2f ±%.2f; out: %s\n",
                  result.seeds.size() - failed, failed, sz.mean, sz.stddev,
                  out.c_str());
      return failed == static_cast<int>(result.seeds.size()) ? 1 : 0;
    }

    if (cmd_metrics->parsed()) return run_metrics(runs_dir);

    if (cmd_land->parsed()) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      Subspace sub;
      PolicyRegistry reg;
      apply_checkpoint(ckpt, sub, reg);
      TaskSpec task;
      bool found = false;
      for (const PolicyEntry& e : reg.entries)
        if (e.task_name == land_task) found = true;
      task = make_task(land_task, {});
      (void)found;
      LandscapeOptions opts;
      opts.grid_n = grid_n;
      opts.mc_rollouts = mc_rollouts;
      opts.n_pairs = n_pairs;
      opts.critic_train_steps = critic_steps;
      opts.seed = env_seed_or(land_seed);
      SacConfig sac;
      ParamVector critic;
      const ParamVector* critic_ptr = nullptr;
      if (!critic_path.empty()) {
        critic = load_params(critic_path);
        critic_ptr = &critic;
      }
      const auto rows = export_landscape(sub, task, critic_ptr, sac, opts);
      write_landscape_csv(land_out, rows);
      std::printf("wrote %zu grid points to %s\n", rows.size(),
                  land_out.c_str());
      return 0;
    }

    if (cmd_ablate->parsed()) {
      RunConfig cfg = make_run_config(scenario_spec, "csp", epsilon, lambda,
                                      budget, seeds, out, false);
      const std::vector<double> eps = parse_double_list(eps_list);
      const std::vector<AblateRow> rows = ablate_threshold(cfg, eps);
      std::printf("%12s %12s %10s %14s\n", "epsilon", "performance", "size",
                  "replay_ratio");
      for (const AblateRow& r : rows)
        std::printf("%12g %12.3f %10.2f %14.3f\n", r.epsilon, r.performance,
                    r.mean_size, r.replay_ratio);
      return 0;
    }

    if (cmd_compare->parsed()) {
      std::string rest = methods_list;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string m = rest.substr(0, comma);
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        RunConfig cfg = make_run_config(scenario_spec, m, epsilon, lambda,
                                        budget, seeds,
                                        (fs::path(out) / m).string(), false);
        print_metrics_row(m, run(cfg));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
