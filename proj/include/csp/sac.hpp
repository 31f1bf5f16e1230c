#pragma once

#include <functional>
#include <span>
#include <vector>

#include "csp/env.hpp"
#include "csp/net.hpp"
#include "csp/replay.hpp"

namespace csp {

struct SacConfig {
  double lr_policy = 3e-4;
  double lr_critic = 3e-4;
  double lr_entropy = 3e-4;
  double discount = 0.99;
  double polyak = 0.005;
  int batch = 256;
  double reward_scaling = 1.0;
  long warmup = 2000;
  int policy_update_delay = 2;
  int target_update_delay = 2;
  double updates_per_env_step = 0.5;
  double target_action_std = 0.1;
  int n_parallel = 8;
  int combination_rollout_len = 100;  // env steps between alpha redraws
  long buffer_capacity = 200000;
  int hidden = 64;
  int n_hidden = 2;
  int alpha_max = 16;  // critic alpha-input width; alphas are zero-padded
  bool train_actor = true;
  // Optional extra actor loss; returns the penalty value and adds its
  // gradient to `grad`. Installed by the regularized baselines.
  std::function<double(const ParamVector&, std::vector<double>& grad)>
      actor_penalty;

  void validate() const;
  ArchSignature actor_signature(int obs_dim, int act_dim) const;
  ArchSignature critic_signature(int obs_dim, int act_dim) const;
  double target_entropy(int act_dim) const;
};

// Supplies policy parameters for a convex-combination weight vector and the
// chain-rule weight of the trainable slice. A plain SAC actor ignores alpha.
class ActorSource {
 public:
  virtual ~ActorSource() = default;
  virtual int alpha_dim() const = 0;
  virtual const ParamVector& trainable() const = 0;
  virtual ParamVector& trainable() = 0;
  // Valid until the next params_for call or trainable mutation.
  virtual const ParamVector& params_for(std::span<const double> alpha) = 0;
  // d(combined params)/d(trainable params) scalar factor for this alpha.
  virtual double trainable_weight(std::span<const double> alpha) const = 0;
};

class SingleActorSource final : public ActorSource {
 public:
  explicit SingleActorSource(ParamVector& actor) : actor_(actor) {}
  int alpha_dim() const override { return 1; }
  const ParamVector& trainable() const override { return actor_; }
  ParamVector& trainable() override { return actor_; }
  const ParamVector& params_for(std::span<const double>) override {
    return actor_;
  }
  double trainable_weight(std::span<const double>) const override {
    return 1.0;
  }

 private:
  ParamVector& actor_;
};

struct SacState {
  ParamVector critic1, critic2, target1, target2;
  AdamState critic1_opt, critic2_opt, actor_opt;
  double log_temp = 0.0;
  AdamState temp_opt;
  long updates = 0;

  // Fresh twin critics and targets, reset temperature and optimizer state.
  void reset(std::uint64_t seed, const ArchSignature& critic_sig,
             long actor_params, const SacConfig& cfg);
  double temperature() const;
};

struct ActProbe {
  std::vector<double> mean, log_std, noise;
};

// Squashed-Gaussian policy head over the actor outputs. log-std is clamped
// to [-10, 2]. Deterministic mode returns tanh(mean).
std::vector<double> act(const ParamVector& actor, std::span<const double> obs,
                        bool stochastic, Rng& rng, ActProbe* probe = nullptr);

// Q(s, a, alpha): critic forward over concat(obs, action, alpha) with alpha
// zero-padded to the critic's input width.
double critic_eval(const ParamVector& critic, std::span<const double> obs,
                   std::span<const double> action,
                   std::span<const double> alpha);

struct SacLosses {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double temperature = 0.0;
};

// One gradient step: twin-critic regression on entropy-adjusted targets,
// delayed actor and temperature updates, delayed polyak target averaging.
SacLosses sac_update(SacState& state, ActorSource& source, ReplayBuffer& buffer,
                     const SacConfig& cfg, Rng& rng);

struct TrainResult {
  long env_steps = 0;
  long grad_updates = 0;
};

// Runs `task.budget` interactions across cfg.n_parallel environments; the
// alpha sampler is re-invoked every combination_rollout_len steps per env.
TrainResult train_on_task(
    SacState& state, ActorSource& source, const TaskSpec& task,
    const SacConfig& cfg, std::uint64_t seed,
    const std::function<std::vector<double>(Rng&)>& alpha_sampler,
    ReplayBuffer& buffer);

// Mean deterministic-policy return over n_episodes; episode seeds depend only
// on (seed, episode), never on when the evaluation happens.
double evaluate(const ParamVector& actor, const TaskSpec& task, int n_episodes,
                std::uint64_t seed);

// Return of the scripted full-throttle policy a = (1, 0).
double scripted_return(const TaskSpec& task, int n_episodes,
                       std::uint64_t seed);

}  // namespace csp
