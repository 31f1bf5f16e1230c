#include "csp/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace csp {

namespace {

template <std::size_t N>
std::array<bool, N> derive_mask(double frac, std::uint64_t mask_seed,
                                std::uint64_t stream_tag) {
  std::array<bool, N> visible;
  visible.fill(true);
  const int k = static_cast<int>(std::floor(frac * N + 1e-9));
  if (k <= 0) return visible;
  std::array<int, N> idx;
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(mask_seed, {stream_tag});
  for (std::size_t i = N - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i);
    std::swap(idx[i], idx[d(rng)]);
  }
  for (int i = 0; i < k; ++i) visible[idx[i]] = false;
  return visible;
}

double clip1(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

void EnvParams::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw ConfigError("mass must be positive");
  if (gravity_mult < 0.15 || gravity_mult > 1.5)
    throw ConfigError("gravity_mult out of [0.15, 1.5]");
  if (friction_mult < 0.4 || friction_mult > 1.5)
    throw ConfigError("friction_mult out of [0.4, 1.5]");
  if (action_coeff != 1.0 && action_coeff != -1.0)
    throw ConfigError("action_coeff must be +1 or -1");
  if (obs_mask_frac < 0.0 || obs_mask_frac > 0.8)
    throw ConfigError("obs_mask_frac out of [0, 0.8]");
  if (act_mask_frac < 0.0 || act_mask_frac > 0.75)
    throw ConfigError("act_mask_frac out of [0, 0.75]");
}

std::array<bool, kObsDim> EnvParams::obs_mask() const {
  return derive_mask<kObsDim>(obs_mask_frac, mask_seed, tag::kObsMask);
}

std::array<bool, kActDim> EnvParams::act_mask() const {
  return derive_mask<kActDim>(act_mask_frac, mask_seed, tag::kActMask);
}

PointMassEnv::PointMassEnv(EnvParams params) : params_(std::move(params)) {
  params_.validate();
  obs_mask_ = params_.obs_mask();
  act_mask_ = params_.act_mask();
}

std::array<double, kObsDim> PointMassEnv::observation() const {
  std::array<double, kObsDim> obs{state_.position[0], state_.position[1],
                                  state_.velocity[0], state_.velocity[1]};
  for (int i = 0; i < kObsDim; ++i)
    if (!obs_mask_[i]) obs[i] = 0.0;
  return obs;
}

std::array<double, kObsDim> PointMassEnv::reset(std::uint64_t seed) {
  Rng rng = make_rng(seed, {tag::kEnv});
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  state_.position = {0.0, 0.0};
  state_.velocity = {d(rng), d(rng)};
  state_.step_index = 0;
  return observation();
}

StepResult PointMassEnv::step(std::span<const double> action) {
  if (action.size() != kActDim) throw InputError("step: action must have 2 components");
  for (double a : action)
    if (!std::isfinite(a)) throw InputError("step: non-finite action");

  std::array<double, kActDim> clipped{clip1(action[0]), clip1(action[1])};
  std::array<double, kActDim> eff{};
  for (int i = 0; i < kActDim; ++i)
    eff[i] = params_.action_coeff * (act_mask_[i] ? clipped[i] : 0.0);

  for (int i = 0; i < 2; ++i) {
    const double accel = params_.gravity_mult * kBaseGravity[i] +
                         kGain * eff[i] / params_.mass -
                         params_.friction_mult * kBaseFriction * state_.velocity[i];
    state_.velocity[i] += kDt * accel;
    state_.position[i] += kDt * state_.velocity[i];
  }
  state_.step_index += 1;

  StepResult out;
  out.reward = state_.velocity[0] -
               kCtrlCost * (clipped[0] * clipped[0] + clipped[1] * clipped[1]);
  out.done = state_.step_index >= kHorizon;
  out.obs = observation();
  return out;
}

namespace {

const std::map<std::string, std::map<std::string, double>>& preset_map() {
  static const std::map<std::string, std::map<std::string, double>> presets = {
      {"normal", {}},
      {"moon", {{"gravity", 0.15}}},
      {"rainfall", {{"friction", 0.4}}},
      {"heavy", {{"mass", 1.5}}},
      {"inverted", {{"action_coeff", -1.0}}},
      {"defective_sensor", {{"obs_mask_frac", 0.5}}},
      {"defective_module", {{"act_mask_frac", 0.5}}},
  };
  return presets;
}

void apply_tweak(EnvParams& p, const std::string& key, double value) {
  if (key == "mass")
    p.mass = value;
  else if (key == "gravity")
    p.gravity_mult = value;
  else if (key == "friction")
    p.friction_mult = value;
  else if (key == "action_coeff")
    p.action_coeff = value;
  else if (key == "obs_mask_frac")
    p.obs_mask_frac = value;
  else if (key == "act_mask_frac")
    p.act_mask_frac = value;
  else if (key == "mask_seed")
    p.mask_seed = static_cast<std::uint64_t>(value);
  else
    throw ConfigError("unknown tweak key: " + key);
}

}  // namespace

const std::vector<std::string>& task_presets() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, v] : preset_map()) out.push_back(k);
    return out;
  }();
  return names;
}

TaskSpec make_task(const std::string& name,
                   const std::map<std::string, double>& tweaks, long budget) {
  if (budget <= 0) throw ConfigError("task budget must be positive");
  EnvParams params;
  std::string part;
  std::string rest = name;
  while (!rest.empty()) {
    const auto plus = rest.find('+');
    part = rest.substr(0, plus);
    rest = plus == std::string::npos ? "" : rest.substr(plus + 1);
    const auto it = preset_map().find(part);
    if (it == preset_map().end())
      throw ConfigError("unknown task preset: " + part);
    for (const auto& [k, v] : it->second) apply_tweak(params, k, v);
  }
  for (const auto& [k, v] : tweaks) apply_tweak(params, k, v);
  params.validate();
  return TaskSpec{name, params, budget};
}

double reward_bound(const EnvParams& params) {
  // Fixed point of |v| under sustained worst-case clipped action plus the
  // largest reachable overshoot from the reset distribution.
  const double accel_max = params.gravity_mult * std::abs(kBaseGravity[0]) +
                           kGain / params.mass;
  const double decay = params.friction_mult * kBaseFriction;
  const double v_max = accel_max / decay + 0.1;
  return v_max + kCtrlCost * 2.0 + 1e-9;
}

}  // namespace csp
