#pragma once

#include <memory>
#include <string>
#include <vector>

#include "csp/subspace.hpp"

namespace csp {

enum class MethodId { Ft1, FtL2, Ewc, SacN, FtN, Csp, CspLinear, CspOracle };

MethodId method_from_string(const std::string& name);
std::string method_name(MethodId id);

struct MethodConfig {
  MethodId id = MethodId::Csp;
  double lambda = 1.0;    // regularization coefficient for ftl2/ewc
  double epsilon = 0.1;   // extension threshold for the csp family

  void validate() const;
};

// Per-parameter importance weights with the reference snapshot they protect.
struct FisherDiag {
  std::vector<double> weight;
  ParamVector reference;
};

// lambda/2 * sum (p - p*)^2; adds lambda (p - p*) to grad when given.
double l2_penalty(const ParamVector& params, const ParamVector& reference,
                  double lambda, std::vector<double>* grad);

// Diagonal Fisher: mean over sampled buffer states of the squared score of
// log pi(a|s) with a drawn from the policy and then held fixed.
FisherDiag fisher_estimate(const ParamVector& actor, const ReplayBuffer& buffer,
                           int n_samples, Rng& rng);

// lambda/2 * sum_tasks sum_p F_p (p - p*_task)^2.
double ewc_penalty(const ParamVector& params,
                   std::span<const FisherDiag> fishers, double lambda,
                   std::vector<double>* grad);

// Best alpha of the current simplex by Monte-Carlo return instead of the
// critic. Candidate order is the m vertices followed by sampled draws; ties
// break toward the lowest index. Rollout episode seeds are shared across
// candidates.
AlphaWeights csp_oracle_select(const Subspace& subspace, const TaskSpec& task,
                               int n_candidates, int rollouts_per_candidate,
                               Rng& rng, std::uint64_t rollout_seed = 0);

// A continual learner driven task by task by the scenario runner.
class ContinualLearner {
 public:
  virtual ~ContinualLearner() = default;
  virtual void learn_task(const TaskSpec& task, int task_index,
                          std::uint64_t run_seed) = 0;
  // Policy selected for a previously learned task.
  virtual ParamVector policy_for(int task_index) const = 0;
  // Final parameter count in FT-1 units.
  virtual double model_size() const = 0;
  virtual const std::vector<GrowDecision>* decisions() const { return nullptr; }
  virtual const Subspace* subspace() const { return nullptr; }
  virtual PolicyRegistry* registry() { return nullptr; }
  virtual const SacState* sac_state() const { return nullptr; }
  // Handle to the most recent task's buffer; poisoned at task end.
  virtual std::shared_ptr<ReplayBuffer> last_buffer() const { return nullptr; }
};

std::unique_ptr<ContinualLearner> make_learner(const MethodConfig& method,
                                               const SacConfig& sac);

// Fresh single-task SAC training with the same per-task seed streams the
// sequential protocol uses; shared by SAC-N and the solo (transfer) column.
ParamVector train_sac_solo(const TaskSpec& task, int task_index,
                           std::uint64_t run_seed, const SacConfig& cfg);

}  // namespace csp
