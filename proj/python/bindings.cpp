#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "csp/checkpoint.hpp"
#include "csp/landscape.hpp"
#include "csp/scenario.hpp"

namespace py = pybind11;
using namespace csp;

namespace {

AlphaMode alpha_mode_from_string(const std::string& s) {
  if (s == "mixture") return AlphaMode::Mixture;
  if (s == "flat") return AlphaMode::Flat;
  if (s == "peaked") return AlphaMode::Peaked;
  throw ConfigError("unknown alpha mode: " + s);
}

py::dict aggregate_dict(const Aggregate& a) {
  py::dict d;
  d["mean"] = a.mean;
  d["std"] = a.stddev;
  d["n"] = a.n;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Continual subspace-of-policies core";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<InputError>(m, "InputError");
  py::register_exception<TrainingFault>(m, "TrainingFault");
  py::register_exception<CapacityError>(m, "CapacityError");
  py::register_exception<ParseError>(m, "CheckpointParseError");

  py::class_<EnvParams>(m, "EnvParams")
      .def(py::init<>())
      .def_readwrite("mass", &EnvParams::mass)
      .def_readwrite("gravity_mult", &EnvParams::gravity_mult)
      .def_readwrite("friction_mult", &EnvParams::friction_mult)
      .def_readwrite("action_coeff", &EnvParams::action_coeff)
      .def_readwrite("obs_mask_frac", &EnvParams::obs_mask_frac)
      .def_readwrite("act_mask_frac", &EnvParams::act_mask_frac)
      .def_readwrite("mask_seed", &EnvParams::mask_seed)
      .def("validate", &EnvParams::validate);

  py::class_<TaskSpec>(m, "TaskSpec")
      .def_readonly("name", &TaskSpec::name)
      .def_readonly("params", &TaskSpec::params)
      .def_readwrite("budget", &TaskSpec::budget);

  py::class_<PointMassEnv>(m, "PointMassEnv")
      .def(py::init<EnvParams>())
      .def("reset",
           [](PointMassEnv& env, std::uint64_t seed) {
             const auto obs = env.reset(seed);
             return std::vector<double>(obs.begin(), obs.end());
           })
      .def("step", [](PointMassEnv& env, const std::vector<double>& action) {
        const StepResult r = env.step(action);
        return py::make_tuple(
            std::vector<double>(r.obs.begin(), r.obs.end()), r.reward, r.done);
      });

  m.def("make_task",
        [](const std::string& name, const std::map<std::string, double>& tweaks,
           long budget) { return make_task(name, tweaks, budget); },
        py::arg("name"), py::arg("tweaks") = std::map<std::string, double>{},
        py::arg("budget") = 20000);
  m.def("task_presets", [] { return task_presets(); });

  py::class_<ArchSignature>(m, "ArchSignature")
      .def_readonly("widths", &ArchSignature::widths)
      .def("param_count", &ArchSignature::param_count);
  m.def("mlp_signature", [](const std::vector<int>& widths) {
    return ArchSignature::mlp(widths);
  });

  py::class_<ParamVector>(m, "ParamVector")
      .def_readonly("signature", &ParamVector::signature)
      .def_readwrite("values", &ParamVector::values);
  m.def("init_params", &init_params, py::arg("signature"), py::arg("seed"));
  m.def("forward",
        [](const ParamVector& p, const std::vector<double>& x) {
          return forward(p, x);
        });

  py::class_<Subspace>(m, "Subspace")
      .def(py::init<>())
      .def_readonly("anchors", &Subspace::anchors)
      .def("size", &Subspace::size)
      .def("combine", [](const Subspace& s, const std::vector<double>& alpha) {
        return s.combine(alpha);
      });

  m.def("sample_alpha",
        [](int m_old, int m_new, const std::string& mode, std::uint64_t seed) {
          Rng rng = make_rng(seed);
          return sample_alpha(m_old, m_new, alpha_mode_from_string(mode), rng);
        },
        py::arg("m_old"), py::arg("m_new"), py::arg("mode") = "mixture",
        py::arg("seed") = 0);

  py::class_<GrowDecision>(m, "GrowDecision")
      .def_readonly("w_new", &GrowDecision::w_new)
      .def_readonly("w_old", &GrowDecision::w_old)
      .def_readonly("epsilon", &GrowDecision::epsilon)
      .def_readonly("extended", &GrowDecision::extended);
  m.def("decide", &decide, py::arg("w_new"), py::arg("w_old"),
        py::arg("epsilon"));

  m.def("barycentric_grid", [](int n) {
    std::vector<std::vector<double>> out;
    for (const auto& p : barycentric_grid3(n))
      out.push_back({p[0], p[1], p[2]});
    return out;
  });

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("tasks", &Scenario::tasks)
      .def_readwrite("seed", &Scenario::seed);
  m.def("build_scenario",
        [](const std::string& archetype, int length, long budget) {
          return build_scenario(archetype_from_string(archetype), length,
                                budget);
        },
        py::arg("archetype"), py::arg("length") = 4, py::arg("budget") = 20000);
  m.def("load_scenario",
        [](const std::filesystem::path& p) { return load_scenario(p); });
  m.def("save_scenario", [](const std::filesystem::path& p, const Scenario& s) {
    save_scenario(p, s);
  });

  m.def("evaluate", &evaluate, py::arg("actor"), py::arg("task"),
        py::arg("n_episodes"), py::arg("seed"));
  m.def("scripted_return", &scripted_return, py::arg("task"),
        py::arg("n_episodes"), py::arg("seed"));

  m.def(
      "run_scenario",
      [](const Scenario& scenario, const std::string& method, double epsilon,
         double lambda, const std::vector<std::uint64_t>& seeds,
         const std::filesystem::path& out_dir, bool solo, long budget,
         long warmup) {
        RunConfig cfg;
        cfg.scenario = scenario;
        if (budget > 0)
          for (TaskSpec& t : cfg.scenario.tasks) t.budget = budget;
        if (warmup >= 0) cfg.sac.warmup = warmup;
        cfg.method.id = method_from_string(method);
        cfg.method.epsilon = epsilon;
        cfg.method.lambda = lambda;
        cfg.seeds = seeds;
        cfg.out_dir = out_dir;
        cfg.write_files = !out_dir.empty();
        cfg.compute_solo = solo;
        const RunResult r = run(cfg);
        py::dict d;
        d["model_size"] = aggregate_dict(r.size());
        if (solo) {
          d["performance"] = aggregate_dict(r.performance());
          d["transfer"] = aggregate_dict(r.transfer());
          d["forgetting"] = aggregate_dict(r.forgetting_metric());
        }
        int failed = 0;
        for (const SeedResult& s : r.seeds) failed += s.failed ? 1 : 0;
        d["failed_seeds"] = failed;
        return d;
      },
      py::arg("scenario"), py::arg("method") = "csp", py::arg("epsilon") = 0.1,
      py::arg("lambda_") = 1.0, py::arg("seeds") = std::vector<std::uint64_t>{0},
      py::arg("out_dir") = std::filesystem::path{}, py::arg("solo") = true,
      py::arg("budget") = 0, py::arg("warmup") = -1);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("anchors", &Checkpoint::anchors)
      .def_property_readonly("task_names", [](const Checkpoint& c) {
        std::vector<std::string> names;
        for (const auto& t : c.tasks) names.push_back(t.task_name);
        return names;
      })
      .def_property_readonly("alphas", [](const Checkpoint& c) {
        std::vector<std::vector<double>> rows;
        for (const auto& t : c.tasks) rows.push_back(t.alpha);
        return rows;
      });
  m.def("load_checkpoint",
        [](const std::filesystem::path& p) { return load_checkpoint(p); });
  m.def("checkpoint_policy",
        [](const Checkpoint& c, int task_index) {
          Subspace sub;
          PolicyRegistry reg;
          apply_checkpoint(c, sub, reg);
          if (task_index < 0 || task_index >= reg.size())
            throw InputError("task index out of range");
          return sub.combine(reg.entries[task_index].alpha);
        },
        py::arg("checkpoint"), py::arg("task_index"));
}
