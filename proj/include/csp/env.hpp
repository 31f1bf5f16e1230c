#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csp/common.hpp"

namespace csp {

constexpr int kObsDim = 4;
constexpr int kActDim = 2;
constexpr int kHorizon = 200;
constexpr double kDt = 0.05;
constexpr double kGain = 5.0;
constexpr double kBaseFriction = 0.5;
constexpr double kCtrlCost = 0.05;
constexpr std::array<double, 2> kBaseGravity{-0.5, 0.0};

// Dynamics tweaks for one task of the point-mass family. Gravity pulls along
// -x, so the agent runs "uphill"; lowering gravity_mult makes the task easier.
struct EnvParams {
  double mass = 1.0;
  double gravity_mult = 1.0;   // [0.15, 1.5]
  double friction_mult = 1.0;  // [0.4, 1.5]
  double action_coeff = 1.0;   // {+1, -1}
  double obs_mask_frac = 0.0;  // [0, 0.8]
  double act_mask_frac = 0.0;  // [0, 0.75]
  std::uint64_t mask_seed = 0;

  void validate() const;
  std::array<bool, kObsDim> obs_mask() const;  // true = visible
  std::array<bool, kActDim> act_mask() const;

  bool operator==(const EnvParams&) const = default;
};

struct EnvState {
  std::array<double, 2> position{0.0, 0.0};
  std::array<double, 2> velocity{0.0, 0.0};
  int step_index = 0;
};

struct TaskSpec {
  std::string name;
  EnvParams params;
  long budget = 20000;

  bool operator==(const TaskSpec&) const = default;
};

struct StepResult {
  std::array<double, kObsDim> obs{};
  double reward = 0.0;
  bool done = false;
};

class PointMassEnv {
 public:
  explicit PointMassEnv(EnvParams params);

  std::array<double, kObsDim> reset(std::uint64_t seed);
  StepResult step(std::span<const double> action);

  const EnvState& state() const { return state_; }
  const EnvParams& params() const { return params_; }
  std::array<double, kObsDim> observation() const;

 private:
  EnvParams params_;
  EnvState state_;
  std::array<bool, kObsDim> obs_mask_;
  std::array<bool, kActDim> act_mask_;
};

// Named presets plus '+'-compositions ("moon+defective_module"); explicit
// tweak keys: mass, gravity, friction, action_coeff, obs_mask_frac,
// act_mask_frac, mask_seed. Unknown names/keys or out-of-range values reject.
TaskSpec make_task(const std::string& name,
                   const std::map<std::string, double>& tweaks = {},
                   long budget = 20000);

const std::vector<std::string>& task_presets();

// Closed-form per-step |reward| bound from the velocity fixed point of the
// update equation under clipped actions, starting from reset.
double reward_bound(const EnvParams& params);

}  // namespace csp
