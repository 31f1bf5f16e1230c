#include "csp/sac.hpp"

#include <algorithm>
#include <cmath>

namespace csp {

namespace {

constexpr double kLogStdMin = -10.0;
constexpr double kLogStdMax = 2.0;
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLog2 = 0.6931471805599453094;

double softplus(double x) {
  if (x > 20.0) return x;
  if (x < -20.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// log pi for one squashed-Gaussian dim given the pre-squash value u = mu +
// sigma*z: Gaussian density term plus the tanh change-of-variable correction.
double log_pi_dim(double z, double log_std, double u) {
  return -0.5 * z * z - log_std - 0.5 * kLog2Pi -
         2.0 * (kLog2 - u - softplus(-2.0 * u));
}

// Reusable single-sample evaluation through the batched kernels.
struct SampleEval {
  Matrix in;
  BatchWorkspace ws;

  const Matrix& fwd(const ParamVector& p, std::span<const double> x) {
    in.resize(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) in(0, i) = x[i];
    return forward_batch(p, in, ws);
  }
};

}  // namespace

void SacConfig::validate() const {
  if (lr_policy <= 0 || lr_critic <= 0 || lr_entropy <= 0)
    throw ConfigError("learning rates must be positive");
  if (discount <= 0 || polyak <= 0 || batch <= 0 || reward_scaling <= 0 ||
      updates_per_env_step <= 0 || target_action_std <= 0 || n_parallel <= 0 ||
      combination_rollout_len <= 0 || buffer_capacity <= 0 || hidden <= 0 ||
      n_hidden <= 0 || alpha_max <= 0 || warmup < 0)
    throw ConfigError("sac config values must be positive");
  if (policy_update_delay < 1 || target_update_delay < 1)
    throw ConfigError("update delays must be >= 1");
}

ArchSignature SacConfig::actor_signature(int obs_dim, int act_dim) const {
  std::vector<int> w{obs_dim};
  for (int i = 0; i < n_hidden; ++i) w.push_back(hidden);
  w.push_back(2 * act_dim);
  return ArchSignature::mlp(std::move(w));
}

ArchSignature SacConfig::critic_signature(int obs_dim, int act_dim) const {
  std::vector<int> w{obs_dim + act_dim + alpha_max};
  for (int i = 0; i < n_hidden; ++i) w.push_back(hidden);
  w.push_back(1);
  return ArchSignature::mlp(std::move(w));
}

double SacConfig::target_entropy(int act_dim) const {
  // Entropy of a diagonal Gaussian with target_action_std per dim, pre-squash.
  return act_dim * (std::log(target_action_std) + 0.5 * std::log(2.0 * M_PI * M_E));
}

void SacState::reset(std::uint64_t seed, const ArchSignature& critic_sig,
                     long actor_params, const SacConfig& cfg) {
  critic1 = init_params(critic_sig, mix_seed(seed, {tag::kCritic, 1}));
  critic2 = init_params(critic_sig, mix_seed(seed, {tag::kCritic, 2}));
  target1 = critic1;
  target2 = critic2;
  const std::size_t pc = critic1.values.size();
  critic1_opt = AdamState(pc, cfg.lr_critic);
  critic2_opt = AdamState(pc, cfg.lr_critic);
  actor_opt = AdamState(static_cast<std::size_t>(actor_params), cfg.lr_policy);
  log_temp = 0.0;
  temp_opt = AdamState(1, cfg.lr_entropy);
  updates = 0;
}

double SacState::temperature() const { return std::exp(log_temp); }

std::vector<double> act(const ParamVector& actor, std::span<const double> obs,
                        bool stochastic, Rng& rng, ActProbe* probe) {
  const std::vector<double> out = forward(actor, obs);
  const int act_dim = static_cast<int>(out.size()) / 2;
  std::vector<double> action(act_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (probe) {
    probe->mean.assign(act_dim, 0.0);
    probe->log_std.assign(act_dim, 0.0);
    probe->noise.assign(act_dim, 0.0);
  }
  for (int d = 0; d < act_dim; ++d) {
    const double mean = out[d];
    const double log_std = std::clamp(out[act_dim + d], kLogStdMin, kLogStdMax);
    double u = mean;
    double z = 0.0;
    if (stochastic) {
      z = normal(rng);
      u = mean + std::exp(log_std) * z;
    }
    action[d] = std::tanh(u);
    if (probe) {
      probe->mean[d] = mean;
      probe->log_std[d] = log_std;
      probe->noise[d] = z;
    }
  }
  return action;
}

double critic_eval(const ParamVector& critic, std::span<const double> obs,
                   std::span<const double> action,
                   std::span<const double> alpha) {
  const int in_dim = critic.signature.input_dim();
  const int pad = in_dim - static_cast<int>(obs.size() + action.size());
  if (pad < 0 || static_cast<int>(alpha.size()) > pad)
    throw InputError("critic_eval: input widths do not fit the critic");
  std::vector<double> input;
  input.reserve(in_dim);
  input.insert(input.end(), obs.begin(), obs.end());
  input.insert(input.end(), action.begin(), action.end());
  input.insert(input.end(), alpha.begin(), alpha.end());
  input.resize(in_dim, 0.0);
  return forward(critic, input)[0];
}

SacLosses sac_update(SacState& state, ActorSource& source, ReplayBuffer& buffer,
                     const SacConfig& cfg, Rng& rng) {
  const int B = cfg.batch;
  if (buffer.size() < B) throw InputError("sac_update: buffer smaller than batch");
  const int obs_dim = buffer.obs_dim();
  const int act_dim = buffer.act_dim();
  const int a_dim = buffer.alpha_dim();
  const int cin_dim = state.critic1.signature.input_dim();
  if (obs_dim + act_dim + a_dim > cin_dim)
    throw InputError("sac_update: alpha wider than the critic input");

  std::vector<long> idx(B);
  for (int b = 0; b < B; ++b) idx[b] = buffer.sample_index(rng);

  Matrix OBS(B, obs_dim), NOBS(B, obs_dim), CIN(B, cin_dim);
  Eigen::VectorXd R(B), NOTDONE(B);
  CIN.setZero();
  for (int b = 0; b < B; ++b) {
    const auto o = buffer.obs(idx[b]);
    const auto a = buffer.action(idx[b]);
    const auto no = buffer.next_obs(idx[b]);
    const auto al = buffer.alpha(idx[b]);
    for (int i = 0; i < obs_dim; ++i) {
      OBS(b, i) = o[i];
      NOBS(b, i) = no[i];
      CIN(b, i) = o[i];
    }
    for (int i = 0; i < act_dim; ++i) CIN(b, obs_dim + i) = a[i];
    for (int i = 0; i < a_dim; ++i) CIN(b, obs_dim + act_dim + i) = al[i];
    R(b) = buffer.reward(idx[b]);
    NOTDONE(b) = buffer.done(idx[b]) ? 0.0 : 1.0;
  }

  const double temp = state.temperature();
  const double gamma = cfg.discount;
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleEval actor_eval;

  // Targets: y = r + gamma (1-done) (min twin target Q(s',a',alpha) - temp log pi).
  Matrix CIN2 = CIN;  // same alpha block; obs/action replaced below
  Eigen::VectorXd logp_next(B);
  for (int b = 0; b < B; ++b) {
    const auto al = buffer.alpha(idx[b]);
    const ParamVector& theta = source.params_for(al);
    std::vector<double> no(obs_dim);
    for (int i = 0; i < obs_dim; ++i) no[i] = NOBS(b, i);
    const Matrix& out = actor_eval.fwd(theta, no);
    double lp = 0.0;
    for (int d = 0; d < act_dim; ++d) {
      const double mean = out(0, d);
      const double ls = std::clamp(out(0, act_dim + d), kLogStdMin, kLogStdMax);
      const double z = normal(rng);
      const double u = mean + std::exp(ls) * z;
      lp += log_pi_dim(z, ls, u);
      CIN2(b, obs_dim + d) = std::tanh(u);
    }
    for (int i = 0; i < obs_dim; ++i) CIN2(b, i) = NOBS(b, i);
    logp_next(b) = lp;
  }
  BatchWorkspace wst1, wst2;
  const Eigen::VectorXd qt1 = forward_batch(state.target1, CIN2, wst1).col(0);
  const Eigen::VectorXd qt2 = forward_batch(state.target2, CIN2, wst2).col(0);
  Eigen::VectorXd y(B);
  for (int b = 0; b < B; ++b)
    y(b) = R(b) + gamma * NOTDONE(b) *
                      (std::min(qt1(b), qt2(b)) - temp * logp_next(b));

  // Twin critic regression.
  SacLosses losses;
  losses.temperature = temp;
  BatchWorkspace ws1, ws2;
  Gradient cgrad(state.critic1.values.size());
  const Eigen::VectorXd q1 = forward_batch(state.critic1, CIN, ws1).col(0);
  Matrix cot(B, 1);
  cot.col(0) = (q1 - y) / static_cast<double>(B);
  backward_batch(state.critic1, ws1, cot, &cgrad, nullptr);
  adam_step(state.critic1_opt, state.critic1, cgrad);

  std::fill(cgrad.values.begin(), cgrad.values.end(), 0.0);
  const Eigen::VectorXd q2 = forward_batch(state.critic2, CIN, ws2).col(0);
  cot.col(0) = (q2 - y) / static_cast<double>(B);
  backward_batch(state.critic2, ws2, cot, &cgrad, nullptr);
  adam_step(state.critic2_opt, state.critic2, cgrad);

  losses.critic_loss =
      0.5 * ((q1 - y).squaredNorm() + (q2 - y).squaredNorm()) / B;

  state.updates += 1;

  if (cfg.train_actor && state.updates % cfg.policy_update_delay == 0) {
    // Fresh reparameterized actions at s, then gradients through min-Q and
    // the entropy term back to the trainable parameter slice.
    Matrix CINA = CIN;
    Matrix Z(B, act_dim), U(B, act_dim), LS(B, act_dim);
    Matrix CLAMPED(B, act_dim);
    for (int b = 0; b < B; ++b) {
      const auto al = buffer.alpha(idx[b]);
      const ParamVector& theta = source.params_for(al);
      std::vector<double> o(obs_dim);
      for (int i = 0; i < obs_dim; ++i) o[i] = OBS(b, i);
      const Matrix& out = actor_eval.fwd(theta, o);
      for (int d = 0; d < act_dim; ++d) {
        const double mean = out(0, d);
        const double raw = out(0, act_dim + d);
        const double ls = std::clamp(raw, kLogStdMin, kLogStdMax);
        const double z = normal(rng);
        const double u = mean + std::exp(ls) * z;
        Z(b, d) = z;
        U(b, d) = u;
        LS(b, d) = ls;
        CLAMPED(b, d) = (raw < kLogStdMin || raw > kLogStdMax) ? 0.0 : 1.0;
        CINA(b, obs_dim + d) = std::tanh(u);
      }
    }
    BatchWorkspace wsa1, wsa2;
    const Eigen::VectorXd qa1 = forward_batch(state.critic1, CINA, wsa1).col(0);
    const Eigen::VectorXd qa2 = forward_batch(state.critic2, CINA, wsa2).col(0);
    Matrix cot1 = Matrix::Zero(B, 1), cot2 = Matrix::Zero(B, 1);
    for (int b = 0; b < B; ++b)
      (qa1(b) <= qa2(b) ? cot1 : cot2)(b, 0) = -1.0 / B;
    Matrix ig1, ig2;
    backward_batch(state.critic1, wsa1, cot1, nullptr, &ig1);
    backward_batch(state.critic2, wsa2, cot2, nullptr, &ig2);

    Gradient agrad(source.trainable().values.size());
    Matrix cot_actor(1, 2 * act_dim);
    double actor_loss = 0.0, logp_sum = 0.0;
    for (int b = 0; b < B; ++b) {
      const auto al = buffer.alpha(idx[b]);
      const ParamVector& theta = source.params_for(al);
      std::vector<double> o(obs_dim);
      for (int i = 0; i < obs_dim; ++i) o[i] = OBS(b, i);
      actor_eval.fwd(theta, o);  // refill caches for the backward pass
      const double w = source.trainable_weight(al);
      double logp = 0.0;
      for (int d = 0; d < act_dim; ++d) {
        const double u = U(b, d), ls = LS(b, d), z = Z(b, d);
        const double a = CINA(b, obs_dim + d);
        const double tanh_u = std::tanh(u);
        const double sz = std::exp(ls) * z;
        const double ga = (qa1(b) <= qa2(b) ? ig1 : ig2)(b, obs_dim + d);
        logp += log_pi_dim(z, ls, u);
        const double dmean = (temp / B) * 2.0 * tanh_u + ga * (1.0 - a * a);
        const double dls =
            ((temp / B) * (-1.0 + 2.0 * tanh_u * sz) + ga * (1.0 - a * a) * sz) *
            CLAMPED(b, d);
        cot_actor(0, d) = w * dmean;
        cot_actor(0, act_dim + d) = w * dls;
      }
      backward_batch(theta, actor_eval.ws, cot_actor, &agrad, nullptr);
      const double minq = std::min(qa1(b), qa2(b));
      actor_loss += temp * logp - minq;
      logp_sum += logp;
    }
    actor_loss /= B;
    if (cfg.actor_penalty)
      actor_loss += cfg.actor_penalty(source.trainable(), agrad.values);
    adam_step(state.actor_opt, source.trainable(), agrad);
    losses.actor_loss = actor_loss;

    const double mean_logp = logp_sum / B;
    const double h_target =
        cfg.target_entropy(act_dim);
    double tgrad = -(mean_logp + h_target);
    adam_step_values(state.temp_opt, std::span<double>(&state.log_temp, 1),
                     std::span<const double>(&tgrad, 1));
  }

  if (state.updates % cfg.target_update_delay == 0) {
    const double tau = cfg.polyak;
    for (std::size_t i = 0; i < state.target1.values.size(); ++i) {
      state.target1.values[i] =
          (1.0 - tau) * state.target1.values[i] + tau * state.critic1.values[i];
      state.target2.values[i] =
          (1.0 - tau) * state.target2.values[i] + tau * state.critic2.values[i];
    }
  }
  return losses;
}

TrainResult train_on_task(
    SacState& state, ActorSource& source, const TaskSpec& task,
    const SacConfig& cfg, std::uint64_t seed,
    const std::function<std::vector<double>(Rng&)>& alpha_sampler,
    ReplayBuffer& buffer) {
  cfg.validate();
  TrainResult result;
  if (task.budget <= 0) return result;

  const int n_par = cfg.n_parallel;
  std::vector<PointMassEnv> envs;
  std::vector<std::array<double, kObsDim>> cur_obs(n_par);
  std::vector<Rng> act_rng, alpha_rng;
  std::vector<long> episodes(n_par, 0), seg(n_par, 0);
  std::vector<std::vector<double>> alpha(n_par);
  for (int i = 0; i < n_par; ++i) {
    envs.emplace_back(task.params);
    cur_obs[i] = envs[i].reset(mix_seed(seed, {tag::kEnv, (std::uint64_t)i, 0}));
    act_rng.push_back(make_rng(seed, {tag::kAct, (std::uint64_t)i}));
    alpha_rng.push_back(make_rng(seed, {tag::kAlpha, (std::uint64_t)i}));
    alpha[i] = alpha_sampler(alpha_rng[i]);
    if (static_cast<int>(alpha[i].size()) != buffer.alpha_dim())
      throw InputError("alpha sampler width does not match the buffer");
  }
  Rng update_rng = make_rng(seed, {tag::kTrain});
  std::uniform_real_distribution<double> uact(-1.0, 1.0);

  long steps = 0;
  double credit = 0.0;
  std::vector<double> action(kActDim);
  while (steps < task.budget) {
    for (int i = 0; i < n_par && steps < task.budget; ++i) {
      if (steps < cfg.warmup) {
        for (int d = 0; d < kActDim; ++d) action[d] = uact(act_rng[i]);
      } else {
        action = act(source.params_for(alpha[i]), cur_obs[i], true, act_rng[i]);
      }
      const StepResult sr = envs[i].step(action);
      buffer.push(cur_obs[i], action, sr.reward * cfg.reward_scaling, sr.obs,
                  sr.done, alpha[i]);
      cur_obs[i] = sr.obs;
      steps += 1;
      seg[i] += 1;
      if (sr.done) {
        episodes[i] += 1;
        cur_obs[i] = envs[i].reset(
            mix_seed(seed, {tag::kEnv, (std::uint64_t)i, (std::uint64_t)episodes[i]}));
      }
      if (steps > cfg.warmup) credit += cfg.updates_per_env_step;
      if (seg[i] >= cfg.combination_rollout_len) {
        alpha[i] = alpha_sampler(alpha_rng[i]);
        seg[i] = 0;
      }
    }
    while (credit >= 1.0 && buffer.size() >= cfg.batch) {
      sac_update(state, source, buffer, cfg, update_rng);
      result.grad_updates += 1;
      credit -= 1.0;
    }
  }
  result.env_steps = steps;
  return result;
}

namespace {

template <typename Policy>
double rollout_mean(const TaskSpec& task, int n_episodes, std::uint64_t seed,
                    Policy&& policy) {
  PointMassEnv env(task.params);
  double total = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    std::array<double, kObsDim> obs =
        env.reset(mix_seed(seed, {tag::kEpisode, (std::uint64_t)ep}));
    double ret = 0.0;
    for (int t = 0; t < kHorizon; ++t) {
      const std::vector<double> a = policy(obs);
      const StepResult sr = env.step(a);
      ret += sr.reward;
      obs = sr.obs;
      if (sr.done) break;
    }
    total += ret;
  }
  return total / n_episodes;
}

}  // namespace

double evaluate(const ParamVector& actor, const TaskSpec& task, int n_episodes,
                std::uint64_t seed) {
  Rng dummy = make_rng(0);
  return rollout_mean(task, n_episodes, seed,
                      [&](std::span<const double> obs) {
                        return act(actor, obs, false, dummy);
                      });
}

double scripted_return(const TaskSpec& task, int n_episodes,
                       std::uint64_t seed) {
  return rollout_mean(task, n_episodes, seed, [](std::span<const double>) {
    return std::vector<double>{1.0, 0.0};
  });
}

}  // namespace csp
