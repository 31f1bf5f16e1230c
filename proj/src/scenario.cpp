#include "csp/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "csp/checkpoint.hpp"

namespace csp {

using nlohmann::json;

Archetype archetype_from_string(const std::string& s) {
  if (s == "forgetting") return Archetype::Forgetting;
  if (s == "transfer") return Archetype::Transfer;
  if (s == "robustness") return Archetype::Robustness;
  if (s == "compositional") return Archetype::Compositional;
  if (s == "custom") return Archetype::Custom;
  throw ConfigError("unknown archetype: " + s);
}

std::string archetype_name(Archetype a) {
  switch (a) {
    case Archetype::Forgetting: return "forgetting";
    case Archetype::Transfer: return "transfer";
    case Archetype::Robustness: return "robustness";
    case Archetype::Compositional: return "compositional";
    case Archetype::Custom: return "custom";
  }
  return "?";
}

namespace {

// Smallest mask seed whose 50% action mask hides exactly `dim`.
std::uint64_t act_mask_seed_hiding(int dim) {
  for (std::uint64_t s = 0; s < 64; ++s) {
    EnvParams p;
    p.act_mask_frac = 0.5;
    p.mask_seed = s;
    if (!p.act_mask()[dim]) return s;
  }
  throw ConfigError("no mask seed found for action dim");
}

std::vector<TaskSpec> archetype_loop(Archetype a, long budget) {
  switch (a) {
    case Archetype::Robustness:
      return {make_task("normal", {}, budget), make_task("inverted", {}, budget),
              make_task("normal", {}, budget), make_task("inverted", {}, budget)};
    case Archetype::Compositional:
      return {make_task("moon", {}, budget),
              make_task("defective_module", {}, budget),
              make_task("heavy", {}, budget),
              make_task("moon+defective_module", {}, budget)};
    case Archetype::Forgetting:
      return {make_task("heavy", {}, budget), make_task("moon", {}, budget),
              make_task("rainfall", {}, budget),
              make_task("defective_module", {}, budget)};
    case Archetype::Transfer: {
      // Complementary action masks, the point-mass analogue of alternating
      // disabled actuators.
      const double sa = static_cast<double>(act_mask_seed_hiding(0));
      const double sb = static_cast<double>(act_mask_seed_hiding(1));
      TaskSpec a0 = make_task("defective_module", {{"mask_seed", sa}}, budget);
      TaskSpec a1 = make_task("defective_module", {{"mask_seed", sb}}, budget);
      a0.name = "defective_module#0";
      a1.name = "defective_module#1";
      return {a0, a1, a0, a1};
    }
    case Archetype::Custom:
      break;
  }
  throw ConfigError("no builder for the custom archetype");
}

}  // namespace

Scenario build_scenario(Archetype archetype, int length, long budget) {
  if (length != 4 && length != 8)
    throw ConfigError("scenario length must be 4 or 8");
  Scenario s;
  s.archetype = archetype;
  s.name = archetype_name(archetype) + std::to_string(length);
  s.tasks = archetype_loop(archetype, budget);
  if (length == 8) {
    std::vector<TaskSpec> loop = s.tasks;
    s.tasks.insert(s.tasks.end(), loop.begin(), loop.end());
  }
  return s;
}

namespace {

json tweaks_to_json(const EnvParams& p) {
  const EnvParams base;
  json t = json::object();
  if (p.mass != base.mass) t["mass"] = p.mass;
  if (p.gravity_mult != base.gravity_mult) t["gravity"] = p.gravity_mult;
  if (p.friction_mult != base.friction_mult) t["friction"] = p.friction_mult;
  if (p.action_coeff != base.action_coeff) t["action_coeff"] = p.action_coeff;
  if (p.obs_mask_frac != base.obs_mask_frac)
    t["obs_mask_frac"] = p.obs_mask_frac;
  if (p.act_mask_frac != base.act_mask_frac)
    t["act_mask_frac"] = p.act_mask_frac;
  if (p.mask_seed != base.mask_seed) t["mask_seed"] = p.mask_seed;
  return t;
}

EnvParams tweaks_from_json(const json& t) {
  EnvParams p;
  for (const auto& [key, value] : t.items()) {
    if (key == "mass")
      p.mass = value.get<double>();
    else if (key == "gravity")
      p.gravity_mult = value.get<double>();
    else if (key == "friction")
      p.friction_mult = value.get<double>();
    else if (key == "action_coeff")
      p.action_coeff = value.get<double>();
    else if (key == "obs_mask_frac")
      p.obs_mask_frac = value.get<double>();
    else if (key == "act_mask_frac")
      p.act_mask_frac = value.get<double>();
    else if (key == "mask_seed")
      p.mask_seed = value.get<std::uint64_t>();
    else
      throw ConfigError("unknown tweak key in scenario file: " + key);
  }
  p.validate();
  return p;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json d;
  d["name"] = s.name;
  d["archetype"] = archetype_name(s.archetype);
  d["seed"] = s.seed;
  d["tasks"] = json::array();
  for (const TaskSpec& t : s.tasks) {
    json jt;
    jt["name"] = t.name;
    jt["budget"] = t.budget;
    jt["tweaks"] = tweaks_to_json(t.params);
    d["tasks"].push_back(std::move(jt));
  }
  return d.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  json d;
  try {
    d = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid scenario JSON: ") + e.what());
  }
  Scenario s;
  for (const auto& [key, value] : d.items()) {
    if (key == "name")
      s.name = value.get<std::string>();
    else if (key == "archetype")
      s.archetype = archetype_from_string(value.get<std::string>());
    else if (key == "seed")
      s.seed = value.get<std::uint64_t>();
    else if (key == "tasks") {
      for (const json& jt : value) {
        TaskSpec t;
        for (const auto& [tk, tv] : jt.items()) {
          if (tk == "name")
            t.name = tv.get<std::string>();
          else if (tk == "budget")
            t.budget = tv.get<long>();
          else if (tk == "tweaks")
            t.params = tweaks_from_json(tv);
          else
            throw ConfigError("unknown task key in scenario file: " + tk);
        }
        if (t.budget <= 0) throw ConfigError("task budget must be positive");
        s.tasks.push_back(std::move(t));
      }
    } else {
      throw ConfigError("unknown key in scenario file: " + key);
    }
  }
  if (s.tasks.empty()) throw ConfigError("scenario needs at least one task");
  return s;
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write scenario: " + path.string());
  out << scenario_to_json(s);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return scenario_from_json(text);
}

namespace {

std::uint64_t eval_seed(std::uint64_t run_seed, int task) {
  return mix_seed(run_seed, {tag::kEval, (std::uint64_t)task});
}

json decision_event(int task, const GrowDecision& d) {
  return json{{"event", "decision"}, {"task", task},   {"w_new", d.w_new},
              {"w_old", d.w_old},    {"epsilon", d.epsilon},
              {"extended", d.extended}};
}

SeedResult run_one_seed(const RunConfig& cfg, std::uint64_t seed) {
  const int n = static_cast<int>(cfg.scenario.tasks.size());
  SeedResult res;
  res.seed = seed;
  res.matrix = PerformanceMatrix(n);
  auto emit = [&](const json& j) { res.events.push_back(j.dump()); };

  std::unique_ptr<ContinualLearner> learner =
      make_learner(cfg.method, cfg.sac);
  std::size_t decisions_seen = 0;
  for (int j = 0; j < n; ++j) {
    const TaskSpec& task = cfg.scenario.tasks[j];
    emit(json{{"event", "task_start"},
              {"task", j},
              {"name", task.name},
              {"budget", task.budget}});
    learner->learn_task(task, j, seed);
    if (const auto* ds = learner->decisions()) {
      for (; decisions_seen < ds->size(); ++decisions_seen)
        emit(decision_event(j, (*ds)[decisions_seen]));
    }
    for (int i = 0; i <= j; ++i) {
      const double p = evaluate(learner->policy_for(i), cfg.scenario.tasks[i],
                                cfg.n_eval, eval_seed(seed, i));
      res.matrix.set_entry(i, j, p);
      emit(json{{"event", "eval"},
                {"task", i},
                {"stage", j},
                {"mean_return", p},
                {"n_eval", cfg.n_eval}});
    }
    emit(json{{"event", "task_end"},
              {"task", j},
              {"model_size", learner->model_size()}});
  }

  if (cfg.compute_solo) {
    for (int i = 0; i < n; ++i) {
      const ParamVector solo =
          train_sac_solo(cfg.scenario.tasks[i], i, seed, cfg.sac);
      const double p = evaluate(solo, cfg.scenario.tasks[i], cfg.n_eval,
                                eval_seed(seed, i));
      res.matrix.set_solo(i, p);
      res.matrix.set_reference(i, p);
      emit(json{{"event", "eval"},
                {"task", i},
                {"stage", kSoloStage},
                {"mean_return", p},
                {"n_eval", cfg.n_eval}});
      emit(json{{"event", "reference"}, {"task", i}, {"value", p}});
    }
  }

  if (const auto* ds = learner->decisions()) res.decisions = *ds;
  res.size = learner->model_size();
  if (const Subspace* sub = learner->subspace())
    res.anchors = sub->size();
  emit(json{{"event", "run_end"}, {"model_size", res.size}});

  if (cfg.write_files && !cfg.out_dir.empty()) {
    const std::filesystem::path dir =
        cfg.out_dir / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    std::ofstream ev(dir / "events.jsonl", std::ios::trunc);
    for (const std::string& line : res.events) ev << line << "\n";
    if (const Subspace* sub = learner->subspace()) {
      PolicyRegistry* reg = learner->registry();
      if (cfg.compute_solo && reg) {
        for (int i = 0; i < reg->size() && i < n; ++i)
          reg->entries[i].reference = res.matrix.reference(i);
      }
      save_checkpoint(dir / "checkpoint.cspc", checkpoint_from(*sub, *reg));
      if (const SacState* st = learner->sac_state())
        save_params(dir / "critic_final.cspc", st->critic1);
    }
    json summary;
    summary["seed"] = seed;
    summary["model_size"] = res.size;
    if (cfg.compute_solo) {
      summary["performance"] = average_performance(res.matrix);
      summary["transfer"] = forward_transfer(res.matrix);
      summary["forgetting"] = forgetting(res.matrix);
    }
    std::ofstream sf(dir / "summary.json", std::ios::trunc);
    sf << summary.dump(2) << "\n";
  }
  return res;
}

Aggregate aggregate_of(const std::vector<SeedResult>& seeds,
                       const std::function<double(const SeedResult&)>& f) {
  Aggregate a;
  double sum = 0.0, sq = 0.0;
  for (const SeedResult& s : seeds) {
    if (s.failed) continue;
    const double v = f(s);
    sum += v;
    sq += v * v;
    a.n += 1;
  }
  if (a.n == 0) return a;
  a.mean = sum / a.n;
  const double var = std::max(0.0, sq / a.n - a.mean * a.mean);
  a.stddev = std::sqrt(var);
  return a;
}

}  // namespace

Aggregate RunResult::performance() const {
  return aggregate_of(seeds, [](const SeedResult& s) {
    return average_performance(s.matrix);
  });
}
Aggregate RunResult::transfer() const {
  return aggregate_of(seeds, [](const SeedResult& s) {
    return forward_transfer(s.matrix);
  });
}
Aggregate RunResult::forgetting_metric() const {
  return aggregate_of(seeds,
                      [](const SeedResult& s) { return forgetting(s.matrix); });
}
Aggregate RunResult::size() const {
  return aggregate_of(seeds, [](const SeedResult& s) { return s.size; });
}

RunResult run(const RunConfig& config) {
  if (config.seeds.empty()) throw ConfigError("run needs at least one seed");
  if (config.scenario.tasks.empty())
    throw ConfigError("run needs a scenario with tasks");
  config.sac.validate();

  RunResult result;
  result.config = config;
  if (config.write_files && !config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    save_scenario(config.out_dir / "scenario.json", config.scenario);
    json rc;
    rc["method"] = method_name(config.method.id);
    rc["epsilon"] = config.method.epsilon;
    rc["lambda"] = config.method.lambda;
    rc["seeds"] = config.seeds;
    rc["n_tasks"] = config.scenario.tasks.size();
    rc["scenario"] = config.scenario.name;
    std::ofstream out(config.out_dir / "run_config.json", std::ios::trunc);
    out << rc.dump(2) << "\n";
  }

  for (std::uint64_t seed : config.seeds) {
    SeedResult res;
    try {
      res = run_one_seed(config, seed);
    } catch (const std::exception& e) {
      res.seed = seed;
      res.failed = true;
      res.error = e.what();
      std::cerr << "[csp] seed " << seed << " failed: " << e.what() << "\n";
    }
    result.seeds.push_back(std::move(res));
  }

  if (config.write_files && !config.out_dir.empty()) {
    json summary;
    summary["method"] = method_name(config.method.id);
    const Aggregate sz = result.size();
    summary["model_size"] = {{"mean", sz.mean}, {"std", sz.stddev}};
    if (config.compute_solo) {
      const Aggregate p = result.performance(), t = result.transfer(),
                      f = result.forgetting_metric();
      summary["performance"] = {{"mean", p.mean}, {"std", p.stddev}};
      summary["transfer"] = {{"mean", t.mean}, {"std", t.stddev}};
      summary["forgetting"] = {{"mean", f.mean}, {"std", f.stddev}};
    }
    std::ofstream out(config.out_dir / "summary.json", std::ios::trunc);
    out << summary.dump(2) << "\n";
  }
  return result;
}

std::vector<AblateRow> ablate_threshold(const RunConfig& base,
                                        std::span<const double> epsilons) {
  std::vector<AblateRow> rows;
  std::vector<std::vector<GrowDecision>> replay_logs;
  std::optional<std::size_t> linear_index;
  std::vector<RunResult> results;

  for (double eps : epsilons) {
    RunConfig cfg = base;
    cfg.method.id = MethodId::Csp;
    cfg.method.epsilon = eps;
    if (!base.out_dir.empty()) {
      std::string tagname = "eps_" + std::to_string(eps);
      for (char& ch : tagname)
        if (ch == '.' || ch == '+') ch = '_';
      cfg.out_dir = base.out_dir / tagname;
    }
    results.push_back(run(cfg));
    if (eps == -2.0) linear_index = results.size() - 1;
  }

  const RunResult& log_source =
      linear_index ? results[*linear_index] : results.front();
  for (const SeedResult& s : log_source.seeds)
    if (!s.failed) replay_logs.push_back(s.decisions);
  const std::vector<GrowthRow> growth = growing_factor(replay_logs, epsilons);

  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    AblateRow row;
    row.epsilon = epsilons[i];
    row.performance =
        base.compute_solo ? results[i].performance().mean : std::nan("");
    row.mean_size = results[i].size().mean;
    row.replay_ratio = growth[i].ratio;
    rows.push_back(row);
  }
  return rows;
}

ParsedEvents parse_events_file(const std::filesystem::path& path, int n_tasks) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open events file: " + path.string());
  ParsedEvents out;
  out.matrix = PerformanceMatrix(n_tasks);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("bad run-log record: " + std::string(e.what()));
    }
    const std::string event = j.at("event").get<std::string>();
    if (event == "eval") {
      EvalRecord r;
      r.task = j.at("task").get<int>();
      r.stage = j.at("stage").get<int>();
      r.mean_return = j.at("mean_return").get<double>();
      r.n_eval = j.at("n_eval").get<int>();
      out.matrix.record(r);
    } else if (event == "reference") {
      out.matrix.set_reference(j.at("task").get<int>(),
                               j.at("value").get<double>());
    } else if (event == "decision") {
      GrowDecision d;
      d.w_new = j.at("w_new").get<double>();
      d.w_old = j.at("w_old").get<double>();
      d.epsilon = j.at("epsilon").get<double>();
      d.extended = j.at("extended").get<bool>();
      out.decisions.push_back(d);
    } else if (event == "run_end") {
      out.size = j.at("model_size").get<double>();
    }
  }
  return out;
}

}  // namespace csp
