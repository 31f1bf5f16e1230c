#include "csp/landscape.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

namespace csp {

long barycentric_count(int n) {
  return static_cast<long>(n + 1) * (n + 2) / 2;
}

std::vector<std::array<double, 3>> barycentric_grid3(int n) {
  if (n < 1) throw InputError("barycentric grid needs resolution >= 1");
  std::vector<std::array<double, 3>> pts;
  pts.reserve(barycentric_count(n));
  const double inv = 1.0 / n;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n - i; ++j) {
      const int k = n - i - j;
      pts.push_back({i * inv, j * inv, k * inv});
    }
  return pts;
}

ParamVector train_frozen_critic(const Subspace& subspace, const TaskSpec& task,
                                SacConfig cfg, std::uint64_t seed,
                                std::shared_ptr<ReplayBuffer>* out_buffer) {
  if (subspace.empty()) throw InputError("train_frozen_critic: empty subspace");
  Subspace frozen = subspace;  // anchors stay untouched either way
  const int m = frozen.size();

  cfg.train_actor = false;
  SacState state;
  state.reset(mix_seed(seed, {tag::kCritic}),
              cfg.critic_signature(kObsDim, kActDim),
              frozen.signature.param_count(), cfg);
  auto buffer =
      std::make_shared<ReplayBuffer>(kObsDim, kActDim, m, cfg.buffer_capacity);
  SubspaceActorSource source(frozen);
  auto sampler = [m](Rng& rng) {
    return sample_alpha(m, m, AlphaMode::Flat, rng);
  };
  train_on_task(state, source, task, cfg, mix_seed(seed, {tag::kTrain}),
                sampler, *buffer);
  if (out_buffer) *out_buffer = buffer;
  return state.critic1;
}

std::vector<LandscapeRow> export_landscape(const Subspace& subspace,
                                           const TaskSpec& task,
                                           const ParamVector* critic,
                                           const SacConfig& sac,
                                           const LandscapeOptions& opts) {
  if (subspace.size() != 3)
    throw InputError("landscape grid mode needs exactly 3 anchors");

  ParamVector critic_params;
  std::shared_ptr<ReplayBuffer> buffer;
  if (critic == nullptr) {
    SacConfig cfg = sac;
    TaskSpec train_task = task;
    train_task.budget = opts.critic_train_steps;
    critic_params = train_frozen_critic(subspace, train_task, cfg,
                                        mix_seed(opts.seed, {tag::kLandscape, 1}),
                                        &buffer);
  } else {
    critic_params = *critic;
    // No training buffer available: regenerate pairs with a random policy.
    buffer = std::make_shared<ReplayBuffer>(kObsDim, kActDim, 3, opts.n_pairs);
    PointMassEnv env(task.params);
    Rng rng = make_rng(opts.seed, {tag::kLandscape, 2});
    std::uniform_real_distribution<double> uact(-1.0, 1.0);
    std::array<double, kObsDim> obs = env.reset(mix_seed(opts.seed, {tag::kLandscape, 3}));
    const AlphaWeights uniform(3, 1.0 / 3.0);
    long episodes = 0;
    for (int t = 0; t < opts.n_pairs; ++t) {
      const std::vector<double> a{uact(rng), uact(rng)};
      const StepResult sr = env.step(a);
      buffer->push(obs, a, sr.reward, sr.obs, sr.done, uniform);
      obs = sr.obs;
      if (sr.done) {
        episodes += 1;
        obs = env.reset(
            mix_seed(opts.seed, {tag::kLandscape, 3, (std::uint64_t)episodes}));
      }
    }
  }

  Rng pair_rng = make_rng(opts.seed, {tag::kLandscape, 4});
  std::vector<long> pairs;
  if (opts.n_pairs >= buffer->size()) {
    pairs.resize(buffer->size());
    std::iota(pairs.begin(), pairs.end(), 0);
  } else {
    pairs = sample_pairs(*buffer, opts.n_pairs, pair_rng);
  }

  const std::uint64_t mc_seed = mix_seed(opts.seed, {tag::kLandscape, 5});
  std::vector<LandscapeRow> rows;
  for (const std::array<double, 3>& alpha : barycentric_grid3(opts.grid_n)) {
    LandscapeRow row;
    row.alpha = alpha;
    const ParamVector policy = subspace.combine(alpha);
    row.mc_return = evaluate(policy, task, opts.mc_rollouts, mc_seed);
    row.critic_w = estimate_W(critic_params, *buffer, alpha, pairs);
    rows.push_back(row);
  }
  return rows;
}

void write_landscape_csv(const std::filesystem::path& path,
                         const std::vector<LandscapeRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write landscape: " + path.string());
  out << "alpha_0,alpha_1,alpha_2,mc_return,critic_w\n";
  char buf[256];
  for (const LandscapeRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.alpha[0], r.alpha[1], r.alpha[2], r.mc_return, r.critic_w);
    out << buf;
  }
}

}  // namespace csp
