#include "csp/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <memory>
#include <numeric>

namespace csp {

bool is_simplex(std::span<const double> alpha, double tol) {
  if (alpha.empty()) return false;
  double sum = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0) || !std::isfinite(a)) return false;
    sum += a;
  }
  return std::abs(sum - 1.0) <= tol;
}

AlphaWeights one_hot(int m, int index) {
  if (index < 0 || index >= m) throw InputError("one_hot: index out of range");
  AlphaWeights a(m, 0.0);
  a[index] = 1.0;
  return a;
}

AlphaWeights zero_pad(std::span<const double> alpha, int m) {
  if (static_cast<int>(alpha.size()) > m)
    throw InputError("zero_pad: alpha longer than target length");
  AlphaWeights out(alpha.begin(), alpha.end());
  out.resize(m, 0.0);
  return out;
}

void Subspace::combine_into(std::span<const double> alpha,
                            std::vector<double>& out) const {
  if (static_cast<int>(alpha.size()) != size())
    throw InputError("combine: alpha length does not match anchor count");
  const std::size_t p = anchors.front().values.size();
  out.assign(p, 0.0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double w = alpha[i];
    const double* v = anchors[i].values.data();
    for (std::size_t j = 0; j < p; ++j) out[j] += w * v[j];
  }
}

ParamVector Subspace::combine(std::span<const double> alpha) const {
  if (empty()) throw InputError("combine: empty subspace");
  ParamVector out(signature);
  combine_into(alpha, out.values);
  return out;
}

AlphaWeights sample_alpha(int m_old, int m_new, AlphaMode mode, Rng& rng) {
  if (m_old < 1 || m_old > m_new)
    throw InputError("sample_alpha: need 1 <= m_old <= m_new");
  if (m_new == 1) return {1.0};

  int dim = m_new;
  double concentration = 1.0;
  switch (mode) {
    case AlphaMode::Mixture: {
      std::bernoulli_distribution pick_new(0.5);
      dim = pick_new(rng) ? m_new : m_old;
      break;
    }
    case AlphaMode::Flat:
      break;
    case AlphaMode::Peaked:
      concentration = 1.0 / m_new;
      break;
  }

  AlphaWeights a(dim, 0.0);
  std::gamma_distribution<double> gamma(concentration, 1.0);
  double sum = 0.0;
  do {
    sum = 0.0;
    for (int i = 0; i < dim; ++i) {
      a[i] = gamma(rng);
      sum += a[i];
    }
  } while (!(sum > 0.0));
  for (int i = 0; i < dim; ++i) a[i] /= sum;
  a.resize(m_new, 0.0);
  return a;
}

void grow(Subspace& subspace, int alpha_max) {
  if (subspace.empty()) throw InputError("grow: empty subspace");
  if (subspace.size() >= alpha_max)
    throw CapacityError("grow: anchor cap reached");
  const std::size_t p = subspace.anchors.front().values.size();
  ParamVector fresh(subspace.signature);
  const double inv = 1.0 / subspace.size();
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (const ParamVector& a : subspace.anchors) acc += a.values[j];
    fresh.values[j] = acc * inv;
  }
  subspace.anchors.push_back(std::move(fresh));
}

void PolicyRegistry::pad_all(int m) {
  for (PolicyEntry& e : entries)
    if (static_cast<int>(e.alpha.size()) < m)
      e.alpha.resize(m, 0.0);
}

std::vector<long> sample_pairs(const ReplayBuffer& buffer, int n_pairs,
                               Rng& rng, bool with_replacement) {
  if (buffer.size() < 1) throw InputError("sample_pairs: empty buffer");
  std::vector<long> idx(n_pairs);
  if (with_replacement) {
    for (int i = 0; i < n_pairs; ++i) idx[i] = buffer.sample_index(rng);
  } else {
    if (n_pairs > buffer.size())
      throw InputError("sample_pairs: n_pairs exceeds buffer size");
    std::vector<long> all(buffer.size());
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < n_pairs; ++i) {
      std::uniform_int_distribution<long> d(i, buffer.size() - 1);
      std::swap(all[i], all[d(rng)]);
    }
    idx.assign(all.begin(), all.begin() + n_pairs);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

double estimate_W(const ParamVector& critic, const ReplayBuffer& buffer,
                  std::span<const double> alpha,
                  std::span<const long> pair_idx) {
  if (pair_idx.empty()) throw InputError("estimate_W: no pairs");
  const int in_dim = critic.signature.input_dim();
  const int obs_dim = buffer.obs_dim();
  const int act_dim = buffer.act_dim();
  if (obs_dim + act_dim + static_cast<int>(alpha.size()) > in_dim)
    throw InputError("estimate_W: alpha wider than the critic input");

  Matrix in(static_cast<Eigen::Index>(pair_idx.size()), in_dim);
  in.setZero();
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const auto o = buffer.obs(pair_idx[r]);
    const auto a = buffer.action(pair_idx[r]);
    for (int i = 0; i < obs_dim; ++i) in(r, i) = o[i];
    for (int i = 0; i < act_dim; ++i) in(r, obs_dim + i) = a[i];
    for (std::size_t i = 0; i < alpha.size(); ++i)
      in(r, obs_dim + act_dim + i) = alpha[i];
  }
  BatchWorkspace ws;
  return forward_batch(critic, in, ws).col(0).mean();
}

GrowDecision decide(double w_new, double w_old, double epsilon) {
  if (w_old < 0.0)
    std::cerr << "[csp] warning: W(alpha_old) < 0; the multiplicative "
                 "extension threshold flips meaning for negative values\n";
  GrowDecision d;
  d.w_new = w_new;
  d.w_old = w_old;
  d.epsilon = epsilon;
  d.extended = w_new > (1.0 + epsilon) * w_old;
  return d;
}

namespace {

struct FaceSelection {
  AlphaWeights alpha;
  double w = 0.0;
};

FaceSelection select_face(const std::vector<AlphaWeights>& candidates,
                          const std::vector<double>& w,
                          const Subspace& subspace,
                          const BestAlphaOptions& opts) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(candidates.size()); ++i)
    if (w[i] > w[best]) best = i;

  if (opts.top_k > 0 && opts.rollout_task != nullptr) {
    // Re-rank the critic's top-k by one deterministic rollout each; identical
    // episode seeds keep the comparison paired.
    std::vector<int> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return w[a] > w[b]; });
    const int k = std::min<int>(opts.top_k, order.size());
    int rollout_best = order[0];
    double best_ret = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < k; ++r) {
      const int c = order[r];
      const ParamVector policy = subspace.combine(candidates[c]);
      const double ret = evaluate(policy, *opts.rollout_task, 1,
                                  mix_seed(opts.rollout_seed, {tag::kDecision}));
      if (ret > best_ret) {
        best_ret = ret;
        rollout_best = c;
      }
    }
    best = rollout_best;
  }
  return {candidates[best], w[best]};
}

}  // namespace

BestAlphaResult best_alpha(const ParamVector& critic,
                           const ReplayBuffer& buffer, const Subspace& subspace,
                           const PolicyRegistry& registry, int m_old, Rng& rng,
                           const BestAlphaOptions& opts) {
  const int m_new = subspace.size();
  if (m_old < 1 || m_old > m_new)
    throw InputError("best_alpha: need 1 <= m_old <= subspace size");
  const std::vector<long> pairs = sample_pairs(buffer, opts.n_pairs, rng);

  // Forced candidates first so the lowest-index tie-break prefers committed
  // policies and the newest vertex.
  std::vector<AlphaWeights> old_face, new_face;
  for (const PolicyEntry& e : registry.entries) {
    old_face.push_back(zero_pad(e.alpha, m_new));
    new_face.push_back(zero_pad(e.alpha, m_new));
  }
  new_face.push_back(one_hot(m_new, m_new - 1));
  for (int i = 0; i < opts.n_candidates; ++i)
    old_face.push_back(zero_pad(sample_alpha(m_old, m_old, AlphaMode::Flat, rng), m_new));
  for (int i = 0; i < opts.n_candidates; ++i)
    new_face.push_back(sample_alpha(m_new, m_new, AlphaMode::Flat, rng));

  auto estimate_all = [&](const std::vector<AlphaWeights>& cands) {
    std::vector<double> w(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
      w[i] = estimate_W(critic, buffer, cands[i], pairs);
    return w;
  };
  const std::vector<double> w_old_all = estimate_all(old_face);
  const std::vector<double> w_new_all = estimate_all(new_face);

  const FaceSelection sel_old = select_face(old_face, w_old_all, subspace, opts);
  const FaceSelection sel_new = select_face(new_face, w_new_all, subspace, opts);

  BestAlphaResult out;
  out.alpha_old = sel_old.alpha;
  out.alpha_new = sel_new.alpha;
  out.w_old = sel_old.w;
  out.w_new = sel_new.w;
  return out;
}

void commit(Subspace& subspace, PolicyRegistry& registry,
            const GrowDecision& decision, const AlphaWeights& alpha_new,
            const AlphaWeights& alpha_old, const std::string& task_name) {
  if (decision.extended) {
    registry.pad_all(subspace.size());
    PolicyEntry e;
    e.task_name = task_name;
    e.alpha = alpha_new;
    registry.entries.push_back(std::move(e));
  } else {
    subspace.anchors.pop_back();
    PolicyEntry e;
    e.task_name = task_name;
    e.alpha = alpha_old;
    e.alpha.resize(subspace.size());
    if (!is_simplex(e.alpha))
      throw InputError("commit: pruned alpha leaves the old face");
    registry.entries.push_back(std::move(e));
  }
}

SubspaceActorSource::SubspaceActorSource(Subspace& subspace)
    : subspace_(subspace), combined_(subspace.signature) {
  if (subspace_.empty())
    throw InputError("SubspaceActorSource: empty subspace");
}

int SubspaceActorSource::alpha_dim() const { return subspace_.size(); }

const ParamVector& SubspaceActorSource::trainable() const {
  return subspace_.anchors.back();
}
ParamVector& SubspaceActorSource::trainable() {
  return subspace_.anchors.back();
}

double SubspaceActorSource::trainable_weight(
    std::span<const double> alpha) const {
  return alpha.back();
}

const ParamVector& SubspaceActorSource::params_for(
    std::span<const double> alpha) {
  const int m = subspace_.size();
  if (static_cast<int>(alpha.size()) != m)
    throw InputError("params_for: alpha length does not match anchor count");
  const std::size_t p = combined_.values.size();
  if (m == 1) {
    // Single trainable anchor; alpha is [1].
    std::memcpy(combined_.values.data(), subspace_.anchors[0].values.data(),
                p * sizeof(double));
  } else {
    std::string key(reinterpret_cast<const char*>(alpha.data()),
                    (alpha.size() - 1) * sizeof(double));
    auto it = frozen_cache_.find(key);
    if (it == frozen_cache_.end()) {
      std::vector<double> frozen(p, 0.0);
      for (int i = 0; i + 1 < m; ++i) {
        const double w = alpha[i];
        const double* v = subspace_.anchors[i].values.data();
        for (std::size_t j = 0; j < p; ++j) frozen[j] += w * v[j];
      }
      it = frozen_cache_.emplace(std::move(key), std::move(frozen)).first;
    }
    const double w_last = alpha.back();
    const double* last = subspace_.anchors.back().values.data();
    const double* frozen = it->second.data();
    for (std::size_t j = 0; j < p; ++j)
      combined_.values[j] = frozen[j] + w_last * last[j];
  }
  return combined_;
}

TaskOutcome csp_learn_task(Subspace& subspace, PolicyRegistry& registry,
                           SacState& state, const TaskSpec& task,
                           const CspConfig& cfg, std::uint64_t run_seed,
                           int task_index,
                           std::shared_ptr<ReplayBuffer>* buffer_handle) {
  TaskOutcome outcome;
  SacConfig sac_cfg = cfg.sac;
  sac_cfg.validate();
  const std::uint64_t idx = static_cast<std::uint64_t>(task_index);

  const bool first = subspace.empty();
  if (first) {
    subspace.signature = sac_cfg.actor_signature(kObsDim, kActDim);
    subspace.anchors.push_back(init_params(
        subspace.signature, mix_seed(run_seed, {tag::kTaskInit, idx})));
  } else {
    grow(subspace, cfg.alpha_max);
  }
  const int m_new = subspace.size();
  const int m_old = first ? 1 : m_new - 1;

  auto buffer = std::make_shared<ReplayBuffer>(kObsDim, kActDim, m_new,
                                               sac_cfg.buffer_capacity);
  if (buffer_handle) *buffer_handle = buffer;
  state.reset(mix_seed(run_seed, {tag::kCritic, idx}),
              sac_cfg.critic_signature(kObsDim, kActDim),
              subspace.signature.param_count(), sac_cfg);

  SubspaceActorSource source(subspace);
  auto sampler = [&](Rng& rng) {
    return first ? AlphaWeights{1.0}
                 : sample_alpha(m_old, m_new, cfg.sample_mode, rng);
  };
  const TrainResult tr =
      train_on_task(state, source, task, sac_cfg,
                    mix_seed(run_seed, {tag::kTrain, idx}), sampler, *buffer);
  outcome.env_steps = tr.env_steps;
  outcome.grad_updates = tr.grad_updates;

  if (first) {
    outcome.first_task = true;
    outcome.selected_alpha = {1.0};
    PolicyEntry e;
    e.task_name = task.name;
    e.alpha = {1.0};
    registry.entries.push_back(std::move(e));
  } else {
    Rng decision_rng = make_rng(run_seed, {tag::kDecision, idx});
    BestAlphaOptions opts;
    opts.n_candidates = cfg.n_candidates;
    opts.n_pairs = cfg.n_pairs;
    opts.top_k = cfg.refine ? cfg.top_k : 0;
    opts.rollout_task = cfg.refine ? &task : nullptr;
    opts.rollout_seed = mix_seed(run_seed, {tag::kDecision, idx, 1});
    const BestAlphaResult best = best_alpha(state.critic1, *buffer, subspace,
                                            registry, m_old, decision_rng, opts);
    const GrowDecision d = decide(best.w_new, best.w_old, cfg.epsilon);
    commit(subspace, registry, d, best.alpha_new, best.alpha_old, task.name);
    outcome.decision = d;
    outcome.selected_alpha = registry.entries.back().alpha;
  }

  buffer->invalidate();
  return outcome;
}

}  // namespace csp
