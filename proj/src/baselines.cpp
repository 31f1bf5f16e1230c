#include "csp/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace csp {

MethodId method_from_string(const std::string& name) {
  if (name == "ft1") return MethodId::Ft1;
  if (name == "ftl2") return MethodId::FtL2;
  if (name == "ewc") return MethodId::Ewc;
  if (name == "sacn") return MethodId::SacN;
  if (name == "ftn") return MethodId::FtN;
  if (name == "csp") return MethodId::Csp;
  if (name == "csp_linear") return MethodId::CspLinear;
  if (name == "csp_oracle") return MethodId::CspOracle;
  throw ConfigError("unknown method: " + name);
}

std::string method_name(MethodId id) {
  switch (id) {
    case MethodId::Ft1: return "ft1";
    case MethodId::FtL2: return "ftl2";
    case MethodId::Ewc: return "ewc";
    case MethodId::SacN: return "sacn";
    case MethodId::FtN: return "ftn";
    case MethodId::Csp: return "csp";
    case MethodId::CspLinear: return "csp_linear";
    case MethodId::CspOracle: return "csp_oracle";
  }
  return "?";
}

void MethodConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
}

double l2_penalty(const ParamVector& params, const ParamVector& reference,
                  double lambda, std::vector<double>* grad) {
  if (params.values.size() != reference.values.size())
    throw InputError("l2_penalty: misaligned parameter lengths");
  if (grad && grad->size() != params.values.size())
    throw InputError("l2_penalty: misaligned gradient length");
  double loss = 0.0;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    const double d = params.values[i] - reference.values[i];
    loss += d * d;
    if (grad) (*grad)[i] += lambda * d;
  }
  return 0.5 * lambda * loss;
}

double ewc_penalty(const ParamVector& params,
                   std::span<const FisherDiag> fishers, double lambda,
                   std::vector<double>* grad) {
  double loss = 0.0;
  for (const FisherDiag& f : fishers) {
    if (f.weight.size() != params.values.size() ||
        f.reference.values.size() != params.values.size())
      throw InputError("ewc_penalty: misaligned Fisher lengths");
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      const double d = params.values[i] - f.reference.values[i];
      loss += f.weight[i] * d * d;
      if (grad) (*grad)[i] += lambda * f.weight[i] * d;
    }
  }
  return 0.5 * lambda * loss;
}

FisherDiag fisher_estimate(const ParamVector& actor, const ReplayBuffer& buffer,
                           int n_samples, Rng& rng) {
  if (buffer.size() < 1) throw InputError("fisher_estimate: empty buffer");
  if (n_samples < 1) throw InputError("fisher_estimate: need n_samples >= 1");
  const int act_dim = actor.signature.output_dim() / 2;
  FisherDiag out;
  out.weight.assign(actor.values.size(), 0.0);
  out.reference = actor;

  std::normal_distribution<double> normal(0.0, 1.0);
  Gradient score(actor.values.size());
  std::vector<double> cot(2 * act_dim, 0.0);
  for (int s = 0; s < n_samples; ++s) {
    const long i = buffer.sample_index(rng);
    const auto obs = buffer.obs(i);
    const std::vector<double> head = forward(actor, obs);
    // Score of log pi(a|s) with the drawn action held fixed: the tanh
    // correction is constant in the parameters, leaving the Gaussian score.
    for (int d = 0; d < act_dim; ++d) {
      const double raw = head[act_dim + d];
      const double ls = std::clamp(raw, -10.0, 2.0);
      const double z = normal(rng);
      const double clamp_mask = (raw < -10.0 || raw > 2.0) ? 0.0 : 1.0;
      cot[d] = z / std::exp(ls);
      cot[act_dim + d] = (z * z - 1.0) * clamp_mask;
    }
    std::fill(score.values.begin(), score.values.end(), 0.0);
    backward(actor, obs, cot, &score, nullptr);
    for (std::size_t p = 0; p < score.values.size(); ++p)
      out.weight[p] += score.values[p] * score.values[p] / n_samples;
  }
  return out;
}

namespace {

std::uint64_t task_init_seed(std::uint64_t run_seed, int i) {
  return mix_seed(run_seed, {tag::kTaskInit, (std::uint64_t)i});
}
std::uint64_t task_critic_seed(std::uint64_t run_seed, int i) {
  return mix_seed(run_seed, {tag::kCritic, (std::uint64_t)i});
}
std::uint64_t task_train_seed(std::uint64_t run_seed, int i) {
  return mix_seed(run_seed, {tag::kTrain, (std::uint64_t)i});
}

AlphaWeights unit_alpha(Rng&) { return {1.0}; }

// Finetuning family: one persistent actor, critics and buffer reset per task,
// optional actor regularizer supplied by the subclass.
class FinetuneLearner : public ContinualLearner {
 public:
  explicit FinetuneLearner(const SacConfig& sac) : sac_(sac) {}

  void learn_task(const TaskSpec& task, int task_index,
                  std::uint64_t run_seed) override {
    if (tasks_trained_ == 0)
      actor_ = init_params(sac_.actor_signature(kObsDim, kActDim),
                           task_init_seed(run_seed, task_index));
    state_.reset(task_critic_seed(run_seed, task_index),
                 sac_.critic_signature(kObsDim, kActDim),
                 actor_.signature.param_count(), sac_);
    buffer_ = std::make_shared<ReplayBuffer>(kObsDim, kActDim, 1,
                                             sac_.buffer_capacity);
    SacConfig cfg = sac_;
    cfg.actor_penalty = penalty();
    SingleActorSource source(actor_);
    train_on_task(state_, source, task, cfg,
                  task_train_seed(run_seed, task_index), unit_alpha, *buffer_);
    after_task(task, task_index, run_seed);
    buffer_->invalidate();
    tasks_trained_ += 1;
  }

  ParamVector policy_for(int) const override { return actor_; }
  double model_size() const override { return 1.0; }
  const SacState* sac_state() const override { return &state_; }
  std::shared_ptr<ReplayBuffer> last_buffer() const override { return buffer_; }

 protected:
  virtual std::function<double(const ParamVector&, std::vector<double>&)>
  penalty() {
    return nullptr;
  }
  virtual void after_task(const TaskSpec&, int, std::uint64_t) {}

  SacConfig sac_;
  ParamVector actor_;
  SacState state_;
  std::shared_ptr<ReplayBuffer> buffer_;
  int tasks_trained_ = 0;
};

class Ft1Learner final : public FinetuneLearner {
 public:
  using FinetuneLearner::FinetuneLearner;
};

class FtL2Learner final : public FinetuneLearner {
 public:
  FtL2Learner(const SacConfig& sac, double lambda)
      : FinetuneLearner(sac), lambda_(lambda) {}
  double model_size() const override { return 2.0; }

 protected:
  std::function<double(const ParamVector&, std::vector<double>&)> penalty()
      override {
    if (tasks_trained_ == 0) return nullptr;
    return [this](const ParamVector& p, std::vector<double>& g) {
      return l2_penalty(p, reference_, lambda_, &g);
    };
  }
  void after_task(const TaskSpec&, int, std::uint64_t) override {
    reference_ = actor_;
  }

 private:
  double lambda_;
  ParamVector reference_;
};

class EwcLearner final : public FinetuneLearner {
 public:
  EwcLearner(const SacConfig& sac, double lambda)
      : FinetuneLearner(sac), lambda_(lambda) {}
  double model_size() const override { return 3.0; }
  const std::vector<FisherDiag>& fishers() const { return fishers_; }

 protected:
  std::function<double(const ParamVector&, std::vector<double>&)> penalty()
      override {
    if (tasks_trained_ == 0) return nullptr;
    return [this](const ParamVector& p, std::vector<double>& g) {
      return ewc_penalty(p, fishers_, lambda_, &g);
    };
  }
  void after_task(const TaskSpec&, int task_index,
                  std::uint64_t run_seed) override {
    Rng rng = make_rng(run_seed, {tag::kOracle, (std::uint64_t)task_index});
    fishers_.push_back(fisher_estimate(actor_, *buffer_, 1024, rng));
  }

 private:
  double lambda_;
  std::vector<FisherDiag> fishers_;
};

// One stored model per task; SAC-N trains each from scratch, FT-N warm-starts
// from the previous model.
class PerTaskLearner final : public ContinualLearner {
 public:
  PerTaskLearner(const SacConfig& sac, bool warm_start)
      : sac_(sac), warm_start_(warm_start) {}

  void learn_task(const TaskSpec& task, int task_index,
                  std::uint64_t run_seed) override {
    ParamVector actor;
    if (warm_start_ && !actors_.empty())
      actor = actors_.back();
    else
      actor = init_params(sac_.actor_signature(kObsDim, kActDim),
                          task_init_seed(run_seed, task_index));
    state_.reset(task_critic_seed(run_seed, task_index),
                 sac_.critic_signature(kObsDim, kActDim),
                 actor.signature.param_count(), sac_);
    buffer_ = std::make_shared<ReplayBuffer>(kObsDim, kActDim, 1,
                                             sac_.buffer_capacity);
    SingleActorSource source(actor);
    train_on_task(state_, source, task, sac_,
                  task_train_seed(run_seed, task_index), unit_alpha, *buffer_);
    buffer_->invalidate();
    actors_.push_back(std::move(actor));
  }

  ParamVector policy_for(int task_index) const override {
    if (task_index < 0 || task_index >= static_cast<int>(actors_.size()))
      throw InputError("policy_for: task not trained yet");
    return actors_[task_index];
  }
  double model_size() const override {
    return static_cast<double>(actors_.size());
  }
  const SacState* sac_state() const override { return &state_; }
  std::shared_ptr<ReplayBuffer> last_buffer() const override { return buffer_; }

 private:
  SacConfig sac_;
  bool warm_start_;
  std::vector<ParamVector> actors_;
  SacState state_;
  std::shared_ptr<ReplayBuffer> buffer_;
};

class CspLearner final : public ContinualLearner {
 public:
  CspLearner(const SacConfig& sac, double epsilon, bool oracle)
      : oracle_(oracle) {
    cfg_.sac = sac;
    cfg_.epsilon = epsilon;
  }

  void learn_task(const TaskSpec& task, int task_index,
                  std::uint64_t run_seed) override {
    if (!oracle_ || subspace_.empty()) {
      const TaskOutcome out = csp_learn_task(subspace_, registry_, state_, task,
                                             cfg_, run_seed, task_index,
                                             &buffer_);
      if (out.decision) decisions_.push_back(*out.decision);
      return;
    }
    // Oracle variant: identical grow/train flow, but the face comparison uses
    // Monte-Carlo returns of rolled-out candidates instead of the critic.
    const int m_old = subspace_.size();
    grow(subspace_, cfg_.alpha_max);
    const int m_new = subspace_.size();
    buffer_ = std::make_shared<ReplayBuffer>(kObsDim, kActDim, m_new,
                                             cfg_.sac.buffer_capacity);
    state_.reset(task_critic_seed(run_seed, task_index),
                 cfg_.sac.critic_signature(kObsDim, kActDim),
                 subspace_.signature.param_count(), cfg_.sac);
    SubspaceActorSource source(subspace_);
    auto sampler = [&](Rng& rng) {
      return sample_alpha(m_old, m_new, cfg_.sample_mode, rng);
    };
    train_on_task(state_, source, task, cfg_.sac,
                  task_train_seed(run_seed, task_index), sampler, *buffer_);

    Rng rng = make_rng(run_seed, {tag::kDecision, (std::uint64_t)task_index});
    const std::uint64_t roll_seed =
        mix_seed(run_seed, {tag::kOracle, (std::uint64_t)task_index});
    const auto faces = oracle_faces(task, m_old, rng, roll_seed);
    const GrowDecision d = decide(faces.w_new, faces.w_old, cfg_.epsilon);
    commit(subspace_, registry_, d, faces.alpha_new, faces.alpha_old,
           task.name);
    decisions_.push_back(d);
    buffer_->invalidate();
  }

  ParamVector policy_for(int task_index) const override {
    if (task_index < 0 || task_index >= registry_.size())
      throw InputError("policy_for: task not trained yet");
    return subspace_.combine(registry_.entries[task_index].alpha);
  }
  double model_size() const override { return subspace_.size(); }
  const std::vector<GrowDecision>* decisions() const override {
    return &decisions_;
  }
  const Subspace* subspace() const override { return &subspace_; }
  PolicyRegistry* registry() override { return &registry_; }
  const SacState* sac_state() const override { return &state_; }
  std::shared_ptr<ReplayBuffer> last_buffer() const override { return buffer_; }

 private:
  BestAlphaResult oracle_faces(const TaskSpec& task, int m_old, Rng& rng,
                               std::uint64_t roll_seed) const {
    const int m_new = subspace_.size();
    std::vector<AlphaWeights> old_face, new_face;
    for (const PolicyEntry& e : registry_.entries) {
      old_face.push_back(zero_pad(e.alpha, m_new));
      new_face.push_back(zero_pad(e.alpha, m_new));
    }
    new_face.push_back(one_hot(m_new, m_new - 1));
    for (int i = 0; i < cfg_.n_candidates; ++i)
      old_face.push_back(
          zero_pad(sample_alpha(m_old, m_old, AlphaMode::Flat, rng), m_new));
    for (int i = 0; i < cfg_.n_candidates; ++i)
      new_face.push_back(sample_alpha(m_new, m_new, AlphaMode::Flat, rng));

    auto pick = [&](const std::vector<AlphaWeights>& cands) {
      int best = 0;
      double best_ret = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < static_cast<int>(cands.size()); ++c) {
        const double ret = evaluate(subspace_.combine(cands[c]), task,
                                    kOracleRollouts, roll_seed);
        if (ret > best_ret) {
          best_ret = ret;
          best = c;
        }
      }
      return std::pair<AlphaWeights, double>(cands[best], best_ret);
    };
    const auto [a_old, w_old] = pick(old_face);
    const auto [a_new, w_new] = pick(new_face);
    return BestAlphaResult{a_old, a_new, w_old, w_new};
  }

  static constexpr int kOracleRollouts = 10;

  bool oracle_;
  CspConfig cfg_;
  Subspace subspace_;
  PolicyRegistry registry_;
  SacState state_;
  std::vector<GrowDecision> decisions_;
  std::shared_ptr<ReplayBuffer> buffer_;
};

}  // namespace

AlphaWeights csp_oracle_select(const Subspace& subspace, const TaskSpec& task,
                               int n_candidates, int rollouts_per_candidate,
                               Rng& rng, std::uint64_t rollout_seed) {
  const int m = subspace.size();
  if (m < 1) throw InputError("csp_oracle_select: empty subspace");
  if (m == 1) return {1.0};
  std::vector<AlphaWeights> cands;
  for (int i = 0; i < m; ++i) cands.push_back(one_hot(m, i));
  for (int i = 0; i < n_candidates; ++i)
    cands.push_back(sample_alpha(m, m, AlphaMode::Flat, rng));
  int best = 0;
  double best_ret = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < static_cast<int>(cands.size()); ++c) {
    const double ret = evaluate(subspace.combine(cands[c]), task,
                                rollouts_per_candidate, rollout_seed);
    if (ret > best_ret) {
      best_ret = ret;
      best = c;
    }
  }
  return cands[best];
}

ParamVector train_sac_solo(const TaskSpec& task, int task_index,
                           std::uint64_t run_seed, const SacConfig& cfg) {
  ParamVector actor = init_params(cfg.actor_signature(kObsDim, kActDim),
                                  task_init_seed(run_seed, task_index));
  SacState state;
  state.reset(task_critic_seed(run_seed, task_index),
              cfg.critic_signature(kObsDim, kActDim),
              actor.signature.param_count(), cfg);
  ReplayBuffer buffer(kObsDim, kActDim, 1, cfg.buffer_capacity);
  SingleActorSource source(actor);
  train_on_task(state, source, task, cfg, task_train_seed(run_seed, task_index),
                unit_alpha, buffer);
  return actor;
}

std::unique_ptr<ContinualLearner> make_learner(const MethodConfig& method,
                                               const SacConfig& sac) {
  method.validate();
  switch (method.id) {
    case MethodId::Ft1:
      return std::make_unique<Ft1Learner>(sac);
    case MethodId::FtL2:
      return std::make_unique<FtL2Learner>(sac, method.lambda);
    case MethodId::Ewc:
      return std::make_unique<EwcLearner>(sac, method.lambda);
    case MethodId::SacN:
      return std::make_unique<PerTaskLearner>(sac, false);
    case MethodId::FtN:
      return std::make_unique<PerTaskLearner>(sac, true);
    case MethodId::Csp:
      return std::make_unique<CspLearner>(sac, method.epsilon, false);
    case MethodId::CspLinear:
      return std::make_unique<CspLearner>(sac, -2.0, false);
    case MethodId::CspOracle:
      return std::make_unique<CspLearner>(sac, method.epsilon, true);
  }
  throw ConfigError("unknown method id");
}

}  // namespace csp
